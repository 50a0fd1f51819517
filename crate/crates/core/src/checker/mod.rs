//! The region-tracking engine.
//!
//! Each thread `t` keeps a vector clock `V(t)` whose own entry counts the
//! transactions `t` has begun. A running transaction is split into dynamic
//! subregions: all events of a subregion share one immutable shadow copy of
//! `V(t)`, and a new shadow is taken only when a join actually changes `V(t)`.
//! Last-write, last-read and last-release entries point at those shadows.
//!
//! Whenever an event `e_m` of the running transaction `tx` on `t` joins the
//! clock of a conflicting event `e_x` from another thread, one scalar test
//! decides whether `tx.begin` happens before `e_x`:
//! `V(tx.begin)[t] <= V(e_x)[t]`. If so, `tx` can never be serialized.
//!
//! Traces can also be non-serializable without any single transaction being
//! at fault (a non-increasing cycle). For that the engine keeps one
//! transactional vector clock per thread, see [`tvc`].
//!
//! Transactions are flat. An event outside any region runs as a unary
//! transaction: full begin semantics, the event, then end semantics.

mod tvc;

use alloc::sync::Arc;
use alloc::vec::Vec;

use thiserror::Error;

use crate::clock::VectorClock;
use crate::report::{EngineKind, RegionStats, Report, Stats, Violation};
use crate::trace::{Event, LabelId, LockId, Op, Rule, StructuralIssue, ThreadId, Trace, VarId};

pub use tvc::{TvcPhase, TvcUpdate};

/// What the engine looks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Transactional atomicity violations only; no transactional clocks.
    AtomicityOnly,
    /// Trace verdict only; violations set the verdict but are not listed.
    TraceOnly,
    /// Both.
    Full,
}

impl Mode {
    pub fn engine(self) -> EngineKind {
        match self {
            Mode::AtomicityOnly => EngineKind::RegionTrackAtomicity,
            Mode::TraceOnly => EngineKind::RegionTrackTrace,
            Mode::Full => EngineKind::RegionTrackFull,
        }
    }

    fn tracks_tvc(self) -> bool {
        self != Mode::AtomicityOnly
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("structural error: {0}")]
pub struct AnalysisError(pub StructuralIssue);

impl AnalysisError {
    pub fn index(&self) -> usize {
        self.0.index
    }
}

/// Immutable shadow copy of a thread clock.
#[derive(Debug)]
struct Snapshot {
    id: u64,
    clock: VectorClock,
}

type Shadow = Arc<Snapshot>;

/// A shadow tagged with the thread that produced it.
#[derive(Debug, Clone)]
struct Tagged {
    shadow: Shadow,
    thread: ThreadId,
}

/// A running transaction.
#[derive(Debug)]
struct TransactionNode {
    label: Option<LabelId>,
    ordinal: u64,
    begin: Shadow,
    curr: Shadow,
    /// `TV(t)[t]` equals this transaction's ordinal. Maintained where `TV(t)[t]`
    /// is written so that the trace check reads a flag instead of comparing.
    latest_source: bool,
    /// Snapshots that already produced a violation on this transaction.
    blamed_sources: Vec<u64>,
}

/// Instrumentation around the O(1) check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckCounters {
    pub checks: u64,
    /// Scalar timestamp comparisons performed by all checks.
    pub comparisons: u64,
    pub max_comparisons_per_check: u32,
    pub forward_calls: u64,
    pub back_calls: u64,
    /// Largest number of forward plus back invocations for a single update.
    pub max_propagation_calls_per_update: u64,
}

/// Streaming analyzer state.
#[derive(Debug)]
pub struct Analyzer {
    mode: Mode,
    threads: usize,
    clocks: Vec<VectorClock>,
    current: Vec<Option<TransactionNode>>,
    tvc: Vec<Vec<u64>>,
    writes: Vec<Option<Tagged>>,
    reads: Vec<Vec<Option<Shadow>>>,
    read_counts: Vec<u32>,
    releases: Vec<Option<Tagged>>,
    next_snapshot: u64,
    live_nodes: u64,
    stats: RegionStats,
    counters: CheckCounters,
    report: Report,
    last_event_clock: Option<Shadow>,
    tvc_log: Option<Vec<TvcUpdate>>,
    event_index: usize,
}

impl Analyzer {
    /// Fresh state. `thread_hint` presizes per-thread tables; more threads are
    /// added as they appear.
    pub fn new(mode: Mode, thread_hint: usize) -> Self {
        let mut a = Analyzer {
            mode,
            threads: 0,
            clocks: Vec::new(),
            current: Vec::new(),
            tvc: Vec::new(),
            writes: Vec::new(),
            reads: Vec::new(),
            read_counts: Vec::new(),
            releases: Vec::new(),
            next_snapshot: 0,
            live_nodes: 0,
            stats: RegionStats::default(),
            counters: CheckCounters::default(),
            report: Report::new(mode.engine(), Stats::Region(RegionStats::default())),
            last_event_clock: None,
            tvc_log: None,
            event_index: 0,
        };
        if thread_hint > 0 {
            a.ensure_thread(thread_hint - 1);
        }
        a
    }

    /// Records every transactional clock row change from now on.
    pub fn enable_tvc_log(&mut self) {
        self.tvc_log.get_or_insert_with(Vec::new);
    }

    pub fn tvc_log(&self) -> &[TvcUpdate] {
        self.tvc_log.as_deref().unwrap_or(&[])
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn thread_count(&self) -> usize {
        self.threads
    }

    /// `V(t)`.
    pub fn clock(&self, t: ThreadId) -> VectorClock {
        self.clocks.get(t.index()).cloned().unwrap_or_default()
    }

    /// `TV(t)`, padded to the current thread count. All zeros in
    /// atomicity-only mode.
    pub fn tvc(&self, t: ThreadId) -> Vec<u64> {
        (0..self.threads)
            .map(|u| self.tvc.get(t.index()).map_or(0, |row| row[u]))
            .collect()
    }

    /// Ordinal (begin timestamp) of the running transaction on `t`.
    pub fn running_ordinal(&self, t: ThreadId) -> Option<u64> {
        self.current
            .get(t.index())
            .and_then(|c| c.as_ref())
            .map(|n| n.ordinal)
    }

    /// Clock of the running transaction's current subregion on `t`.
    pub fn subregion_clock(&self, t: ThreadId) -> Option<&VectorClock> {
        self.current
            .get(t.index())
            .and_then(|c| c.as_ref())
            .map(|n| &n.curr.clock)
    }

    /// Clock of the running transaction's begin event on `t`.
    pub fn begin_clock(&self, t: ThreadId) -> Option<&VectorClock> {
        self.current
            .get(t.index())
            .and_then(|c| c.as_ref())
            .map(|n| &n.begin.clock)
    }

    /// `V(e)` for the most recently processed event.
    pub fn last_event_clock(&self) -> Option<&VectorClock> {
        self.last_event_clock.as_ref().map(|s| &s.clock)
    }

    pub fn live_nodes(&self) -> u64 {
        self.live_nodes
    }

    pub fn stats(&self) -> RegionStats {
        self.stats
    }

    pub fn counters(&self) -> &CheckCounters {
        &self.counters
    }

    pub fn report(&self) -> &Report {
        &self.report
    }

    pub fn finish(mut self) -> Report {
        self.report.stats = Stats::Region(self.stats);
        self.report
    }

    /// Processes the next event of the trace.
    pub fn on_event(&mut self, e: &Event) -> Result<(), AnalysisError> {
        let t = e.thread.index();
        self.ensure_thread(t);
        self.event_index = e.index;
        let structural = |rule| AnalysisError(StructuralIssue { index: e.index, rule });
        match e.op {
            Op::Begin(l) => {
                if self.current[t].is_some() {
                    return Err(structural(Rule::NestedBegin));
                }
                self.handle_begin(t, Some(l));
                self.last_event_clock = self.current[t].as_ref().map(|n| n.begin.clone());
            }
            Op::End(l) => {
                match &self.current[t] {
                    None => return Err(structural(Rule::EndWithoutBegin)),
                    Some(n) if n.label != Some(l) => return Err(structural(Rule::LabelMismatch)),
                    Some(n) => self.last_event_clock = Some(n.curr.clone()),
                }
                self.handle_end(t);
            }
            op => {
                let unary = self.current[t].is_none();
                if unary {
                    self.handle_begin(t, None);
                }
                match op {
                    Op::Read(x) => self.handle_read(t, x),
                    Op::Write(x) => self.handle_write(t, x),
                    Op::Acquire(m) => self.handle_acquire(t, m),
                    Op::Release(m) => self.handle_release(t, m),
                    Op::Begin(_) | Op::End(_) => unreachable!(),
                }
                self.last_event_clock = self.current[t].as_ref().map(|n| n.curr.clone());
                if unary {
                    self.handle_end(t);
                }
            }
        }
        Ok(())
    }

    fn ensure_thread(&mut self, t: usize) {
        if t < self.threads {
            return;
        }
        let n = t + 1;
        self.clocks.resize_with(n, VectorClock::new);
        self.current.resize_with(n, || None);
        if self.mode.tracks_tvc() {
            for row in &mut self.tvc {
                row.resize(n, 0);
            }
            self.tvc.resize_with(n, || alloc::vec![0; n]);
        }
        self.threads = n;
    }

    fn shadow(&mut self, clock: VectorClock) -> Shadow {
        let id = self.next_snapshot;
        self.next_snapshot += 1;
        Arc::new(Snapshot { id, clock })
    }

    fn node(&self, t: usize) -> &TransactionNode {
        self.current[t].as_ref().expect("no running transaction")
    }

    fn node_mut(&mut self, t: usize) -> &mut TransactionNode {
        self.current[t].as_mut().expect("no running transaction")
    }

    fn handle_begin(&mut self, t: usize, label: Option<LabelId>) {
        self.clocks[t].inc(t);
        let ordinal = self.clocks[t].get(t);
        let snapshot = self.shadow(self.clocks[t].clone());
        self.current[t] = Some(TransactionNode {
            label,
            ordinal,
            begin: snapshot.clone(),
            curr: snapshot,
            latest_source: false,
            blamed_sources: Vec::new(),
        });
        self.live_nodes += 1;
        self.stats.transactions += 1;
        self.stats.max_live_nodes = self.stats.max_live_nodes.max(self.live_nodes);
    }

    fn handle_end(&mut self, t: usize) {
        if self.current[t].take().is_some() {
            self.live_nodes -= 1;
        }
    }

    fn handle_read(&mut self, t: usize, x: VarId) {
        let x = x.index();
        let reads_known = self
            .reads
            .get(x)
            .and_then(|r| r.get(t))
            .is_some_and(Option::is_some);
        let source = match self.writes.get(x) {
            Some(Some(w)) if w.thread.index() != t && !reads_known => Some(w.clone()),
            _ => None,
        };
        if let Some(w) = source {
            self.do_join(&w, t);
            self.sub_region(t);
        }
        let curr = self.node(t).curr.clone();
        self.set_read(x, t, curr);
    }

    fn handle_write(&mut self, t: usize, x: VarId) {
        let x = x.index();
        if self.read_counts.get(x).copied().unwrap_or(0) > 0 {
            for u in 0..self.reads[x].len() {
                if u == t {
                    continue;
                }
                if let Some(shadow) = self.reads[x][u].clone() {
                    let source = Tagged {
                        shadow,
                        thread: ThreadId::from_index(u),
                    };
                    self.do_join(&source, t);
                }
            }
        } else if let Some(Some(w)) = self.writes.get(x) {
            if w.thread.index() != t {
                let w = w.clone();
                self.do_join(&w, t);
            }
        }
        self.sub_region(t);
        let curr = Tagged {
            shadow: self.node(t).curr.clone(),
            thread: ThreadId::from_index(t),
        };
        if x >= self.writes.len() {
            self.writes.resize_with(x + 1, || None);
        }
        self.writes[x] = Some(curr);
        if let Some(readers) = self.reads.get_mut(x) {
            readers.iter_mut().for_each(|r| *r = None);
            self.read_counts[x] = 0;
        }
    }

    fn handle_acquire(&mut self, t: usize, m: LockId) {
        if let Some(Some(rel)) = self.releases.get(m.index()) {
            if rel.thread.index() != t {
                let rel = rel.clone();
                self.do_join(&rel, t);
                self.sub_region(t);
            }
        }
    }

    fn handle_release(&mut self, t: usize, m: LockId) {
        let m = m.index();
        if m >= self.releases.len() {
            self.releases.resize_with(m + 1, || None);
        }
        self.releases[m] = Some(Tagged {
            shadow: self.node(t).curr.clone(),
            thread: ThreadId::from_index(t),
        });
    }

    fn set_read(&mut self, x: usize, t: usize, shadow: Shadow) {
        if x >= self.reads.len() {
            self.reads.resize_with(x + 1, Vec::new);
            self.read_counts.resize(x + 1, 0);
        }
        let readers = &mut self.reads[x];
        if t >= readers.len() {
            readers.resize_with(t + 1, || None);
        }
        if readers[t].replace(shadow).is_none() {
            self.read_counts[x] += 1;
        }
    }

    /// Starts a new subregion if a join moved `V(t)` past the current shadow.
    fn sub_region(&mut self, t: usize) {
        if self.node(t).curr.clock == self.clocks[t] {
            return;
        }
        let fresh = self.shadow(self.clocks[t].clone());
        self.node_mut(t).curr = fresh;
        self.stats.subregions += 1;
    }

    /// Propagates `V(e_x)` into `V(t)`, updates transactional clocks, then checks.
    fn do_join(&mut self, source: &Tagged, t: usize) {
        debug_assert_ne!(source.thread.index(), t);
        self.stats.joins += 1;
        self.clocks[t].join(&source.shadow.clock);
        if self.mode.tracks_tvc() {
            self.update_tvc(&source.shadow.clock, source.thread.index(), t);
        }
        self.check_hb(t, source);
    }

    /// Constant-time check run after every join. At most two scalar
    /// comparisons: the atomicity test, and `0 < TV(t)[s] <= V(e_x)[s]`
    /// folded into one unsigned comparison.
    fn check_hb(&mut self, t: usize, source: &Tagged) {
        let index = self.event_index;
        let s = source.thread.index();
        let node = self.node(t);
        let ordinal = node.ordinal;
        let mut comparisons = 1;
        if ordinal <= source.shadow.clock.get(t) {
            if self.mode != Mode::TraceOnly && !node.blamed_sources.contains(&source.shadow.id) {
                let violation = Violation {
                    event: index,
                    thread: ThreadId::from_index(t),
                    label: node.label,
                    ordinal,
                    source_thread: source.thread,
                };
                self.node_mut(t).blamed_sources.push(source.shadow.id);
                self.report.violations.push(violation);
            }
            self.report.mark_non_serializable(index);
        } else if self.mode.tracks_tvc() {
            debug_assert_eq!(node.latest_source, self.tvc[t][t] == ordinal);
            if node.latest_source {
                comparisons += 1;
                if self.tvc[t][s].wrapping_sub(1) < source.shadow.clock.get(s) {
                    self.report.mark_non_serializable(index);
                }
            }
        }
        let c = &mut self.counters;
        c.checks += 1;
        c.comparisons += u64::from(comparisons);
        c.max_comparisons_per_check = c.max_comparisons_per_check.max(comparisons);
    }
}

/// Runs a whole trace through a fresh analyzer.
pub fn analyze(trace: &Trace, mode: Mode) -> Result<Report, AnalysisError> {
    let mut a = Analyzer::new(mode, trace.thread_count());
    for e in trace.events() {
        a.on_event(e)?;
    }
    Ok(a.finish())
}

#[cfg(test)]
mod tests;
