//! Engine findings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::trace::{LabelId, ThreadId};

/// Every engine the crate ships.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EngineKind {
    RegionTrackFull,
    RegionTrackAtomicity,
    RegionTrackTrace,
    Velodrome,
    Aerodrome,
    NaiveBlame,
}

impl EngineKind {
    pub const ALL: [EngineKind; 6] = [
        EngineKind::RegionTrackFull,
        EngineKind::RegionTrackAtomicity,
        EngineKind::RegionTrackTrace,
        EngineKind::Velodrome,
        EngineKind::Aerodrome,
        EngineKind::NaiveBlame,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::RegionTrackFull => "regiontrack-full",
            EngineKind::RegionTrackAtomicity => "regiontrack-atomicity",
            EngineKind::RegionTrackTrace => "regiontrack-trace",
            EngineKind::Velodrome => "velodrome",
            EngineKind::Aerodrome => "aerodrome",
            EngineKind::NaiveBlame => "naive-blame",
        }
    }

    /// Whether the engine localizes violations to transactions at all.
    pub fn reports_violations(self) -> bool {
        !matches!(self, EngineKind::RegionTrackTrace | EngineKind::Aerodrome)
    }

    pub fn is_comparator(self) -> bool {
        matches!(
            self,
            EngineKind::Velodrome | EngineKind::Aerodrome | EngineKind::NaiveBlame
        )
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown engine {0:?}")]
pub struct UnknownEngine(pub alloc::string::String);

impl FromStr for EngineKind {
    type Err = UnknownEngine;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EngineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownEngine(s.into()))
    }
}

/// One dynamic violation: the join at `event` revealed that the running
/// transaction (`thread`, `ordinal`) cannot be serialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub event: usize,
    pub thread: ThreadId,
    /// `None` for a unary transaction.
    pub label: Option<LabelId>,
    pub ordinal: u64,
    pub source_thread: ThreadId,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RegionStats {
    pub joins: u64,
    pub subregions: u64,
    pub max_live_nodes: u64,
    pub transactions: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphStats {
    pub edges: u64,
    pub cycle_checks: u64,
    pub max_live_nodes: u64,
    pub transactions: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AeroStats {
    pub joins: u64,
    pub end_events: u64,
    pub locations: u64,
    pub locks: u64,
    pub transactions: u64,
}

/// Engine-specific counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stats {
    Region(RegionStats),
    Graph(GraphStats),
    Aero(AeroStats),
}

impl Stats {
    pub fn transactions(&self) -> u64 {
        match self {
            Stats::Region(s) => s.transactions,
            Stats::Graph(s) => s.transactions,
            Stats::Aero(s) => s.transactions,
        }
    }

    pub fn max_live_nodes(&self) -> Option<u64> {
        match self {
            Stats::Region(s) => Some(s.max_live_nodes),
            Stats::Graph(s) => Some(s.max_live_nodes),
            Stats::Aero(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub engine: EngineKind,
    pub non_serializable: bool,
    /// Earliest event at which the trace was found non-serializable.
    pub first_nonser_event: Option<usize>,
    pub violations: Vec<Violation>,
    pub stats: Stats,
}

impl Report {
    pub fn new(engine: EngineKind, stats: Stats) -> Self {
        Self {
            engine,
            non_serializable: false,
            first_nonser_event: None,
            violations: Vec::new(),
            stats,
        }
    }

    /// Latches the trace verdict; later calls keep the earliest event.
    pub fn mark_non_serializable(&mut self, event: usize) {
        if !self.non_serializable {
            self.non_serializable = true;
            self.first_nonser_event = Some(event);
        }
    }

    /// Violated transactions as `(thread, ordinal)` pairs.
    pub fn violated_transactions(&self) -> BTreeSet<(ThreadId, u64)> {
        self.violations.iter().map(|v| (v.thread, v.ordinal)).collect()
    }

    /// Dynamic violation count per region label (unary transactions under `None`).
    pub fn violations_by_label(&self) -> BTreeMap<Option<LabelId>, usize> {
        let mut out = BTreeMap::new();
        for v in &self.violations {
            *out.entry(v.label).or_insert(0) += 1;
        }
        out
    }

    /// Labels with at least one violation ("distinct" violations).
    pub fn violated_labels(&self) -> BTreeSet<LabelId> {
        self.violations.iter().filter_map(|v| v.label).collect()
    }
}
