//! JSON shapes of everything the CLI prints. Field order is part of the
//! format; serde keeps declaration order.

use serde::Serialize;

use atomcheck_core::oracle::OracleVerdict;
use atomcheck_core::refine::Refinement;
use atomcheck_core::report::{Report, Stats};
use atomcheck_core::trace::{LabelId, ThreadId, Trace};

/// Printed for transactions that belong to no region.
pub const UNARY_LABEL: &str = "⟨unary⟩";

pub fn label_name(trace: &Trace, label: Option<LabelId>) -> String {
    label.map_or_else(|| UNARY_LABEL.to_string(), |l| trace.label_name(l).to_string())
}

#[derive(Debug, Serialize)]
pub struct ReportJson {
    pub engine: String,
    pub non_serializable: bool,
    pub first_nonser_event: Option<usize>,
    pub violations: Vec<ViolationJson>,
    pub stats: StatsJson,
}

#[derive(Debug, Serialize)]
pub struct ViolationJson {
    pub event: usize,
    pub thread: String,
    pub label: String,
    pub ordinal: u64,
    pub source_thread: String,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum StatsJson {
    Region {
        joins: u64,
        subregions: u64,
        max_live_nodes: u64,
        transactions: u64,
    },
    Graph {
        edges: u64,
        cycle_checks: u64,
        max_live_nodes: u64,
        transactions: u64,
    },
    Aero {
        joins: u64,
        end_events: u64,
        locations: u64,
        locks: u64,
        transactions: u64,
    },
}

impl From<Stats> for StatsJson {
    fn from(s: Stats) -> Self {
        match s {
            Stats::Region(s) => StatsJson::Region {
                joins: s.joins,
                subregions: s.subregions,
                max_live_nodes: s.max_live_nodes,
                transactions: s.transactions,
            },
            Stats::Graph(s) => StatsJson::Graph {
                edges: s.edges,
                cycle_checks: s.cycle_checks,
                max_live_nodes: s.max_live_nodes,
                transactions: s.transactions,
            },
            Stats::Aero(s) => StatsJson::Aero {
                joins: s.joins,
                end_events: s.end_events,
                locations: s.locations,
                locks: s.locks,
                transactions: s.transactions,
            },
        }
    }
}

impl StatsJson {
    /// Counter names and values in field order.
    pub fn fields(&self) -> Vec<(&'static str, u64)> {
        match *self {
            StatsJson::Region {
                joins,
                subregions,
                max_live_nodes,
                transactions,
            } => vec![
                ("joins", joins),
                ("subregions", subregions),
                ("max_live_nodes", max_live_nodes),
                ("transactions", transactions),
            ],
            StatsJson::Graph {
                edges,
                cycle_checks,
                max_live_nodes,
                transactions,
            } => vec![
                ("edges", edges),
                ("cycle_checks", cycle_checks),
                ("max_live_nodes", max_live_nodes),
                ("transactions", transactions),
            ],
            StatsJson::Aero {
                joins,
                end_events,
                locations,
                locks,
                transactions,
            } => vec![
                ("joins", joins),
                ("end_events", end_events),
                ("locations", locations),
                ("locks", locks),
                ("transactions", transactions),
            ],
        }
    }
}

impl ReportJson {
    pub fn new(trace: &Trace, report: &Report) -> Self {
        let name = |t: ThreadId| trace.thread_name(t).to_string();
        ReportJson {
            engine: report.engine.name().to_string(),
            non_serializable: report.non_serializable,
            first_nonser_event: report.first_nonser_event,
            violations: report
                .violations
                .iter()
                .map(|v| ViolationJson {
                    event: v.event,
                    thread: name(v.thread),
                    label: label_name(trace, v.label),
                    ordinal: v.ordinal,
                    source_thread: name(v.source_thread),
                })
                .collect(),
            stats: report.stats.into(),
        }
    }
}

/// A violated transaction without the event that revealed it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TxJson {
    pub thread: String,
    pub ordinal: u64,
    pub label: String,
}

#[derive(Debug, Serialize)]
pub struct OracleJson {
    pub nonserializable: bool,
    pub violations: Vec<TxJson>,
}

impl OracleJson {
    pub fn new(trace: &Trace, verdict: &OracleVerdict) -> Self {
        OracleJson {
            nonserializable: verdict.nonserializable,
            violations: verdict
                .violations
                .iter()
                .map(|&(t, ordinal)| TxJson {
                    thread: trace.thread_name(t).to_string(),
                    ordinal,
                    label: label_name(trace, verdict.label_of((t, ordinal))),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct IterationJson {
    pub iteration: usize,
    pub excluded: Vec<String>,
    pub violations: usize,
    pub cumulative: usize,
    pub new_labels: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RefineJson {
    pub engine: String,
    pub threshold: usize,
    pub iterations: Vec<IterationJson>,
    pub excluded: Vec<String>,
}

impl RefineJson {
    pub fn new(trace: &Trace, engine: &str, threshold: usize, r: &Refinement) -> Self {
        let names = |set: &std::collections::BTreeSet<LabelId>| -> Vec<String> {
            set.iter().map(|&l| trace.label_name(l).to_string()).collect()
        };
        RefineJson {
            engine: engine.to_string(),
            threshold,
            iterations: r
                .iterations
                .iter()
                .map(|i| IterationJson {
                    iteration: i.number,
                    excluded: names(&i.excluded),
                    violations: i.violations,
                    cumulative: i.cumulative,
                    new_labels: names(&i.new_labels),
                })
                .collect(),
            excluded: names(&r.excluded),
        }
    }
}
