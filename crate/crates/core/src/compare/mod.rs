//! Reference engines for differential comparison.
//!
//! * [`velodrome_check`]: a transaction graph keeping at most one edge per
//!   ordered pair of nodes (the first one seen) and blaming a transaction
//!   only when the cycle found through it is increasing.
//! * [`aerodrome_check`]: event vector clocks plus a traversal at every
//!   transaction end; decides the trace verdict only.
//! * [`naive_blame_check`]: an exact transaction graph that blames whichever
//!   transaction completes a cycle.
//!
//! All three wrap events outside regions in unary transactions and number
//! transactions per thread the same way the region-tracking engine does, so
//! their reports compare as `(thread, ordinal)` sets.

mod aerodrome;
pub mod differential;
mod graph;

use alloc::vec::Vec;

use crate::checker::{analyze, AnalysisError, Mode};
use crate::report::{EngineKind, Report};
use crate::trace::{LabelId, Op, Rule, StructuralIssue, Trace};

pub use aerodrome::aerodrome_check;
pub use differential::{differential, DiffError, Differential, Relations};
pub use graph::{naive_blame_check, velodrome_check};

/// Transaction-level callbacks; [`drive`] supplies unary wrapping.
pub(crate) trait TxEngine {
    fn begin(&mut self, t: usize, label: Option<LabelId>, index: usize);
    fn end(&mut self, t: usize, index: usize);
    fn access(&mut self, t: usize, op: Op, index: usize);
}

pub(crate) fn drive<E: TxEngine>(trace: &Trace, engine: &mut E) -> Result<(), AnalysisError> {
    let mut open: Vec<Option<LabelId>> = alloc::vec![None; trace.thread_count()];
    for e in trace.events() {
        let t = e.thread.index();
        let fail = |rule| Err(AnalysisError(StructuralIssue { index: e.index, rule }));
        match e.op {
            Op::Begin(l) => {
                if open[t].is_some() {
                    return fail(Rule::NestedBegin);
                }
                open[t] = Some(l);
                engine.begin(t, Some(l), e.index);
            }
            Op::End(l) => match open[t] {
                None => return fail(Rule::EndWithoutBegin),
                Some(o) if o != l => return fail(Rule::LabelMismatch),
                Some(_) => {
                    open[t] = None;
                    engine.end(t, e.index);
                }
            },
            op if open[t].is_none() => {
                engine.begin(t, None, e.index);
                engine.access(t, op, e.index);
                engine.end(t, e.index);
            }
            op => engine.access(t, op, e.index),
        }
    }
    Ok(())
}

/// Runs any engine by kind.
pub fn run_engine(trace: &Trace, kind: EngineKind) -> Result<Report, AnalysisError> {
    match kind {
        EngineKind::RegionTrackFull => analyze(trace, Mode::Full),
        EngineKind::RegionTrackAtomicity => analyze(trace, Mode::AtomicityOnly),
        EngineKind::RegionTrackTrace => analyze(trace, Mode::TraceOnly),
        EngineKind::Velodrome => velodrome_check(trace),
        EngineKind::Aerodrome => aerodrome_check(trace),
        EngineKind::NaiveBlame => naive_blame_check(trace),
    }
}
