//! Iterative refinement of the atomicity specification.
//!
//! Every iteration analyzes the same trace with the excluded labels' regions
//! dissolved: their `begin`/`end` events are dropped, so the events inside
//! run as unary transactions. Labels with a reported violation are excluded
//! from the next iteration. The loop stops after `threshold` consecutive
//! iterations that exclude nothing new.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use thiserror::Error;

use crate::checker::AnalysisError;
use crate::compare::run_engine;
use crate::report::EngineKind;
use crate::trace::{LabelId, Op, Trace};

pub const DEFAULT_THRESHOLD: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefineError {
    #[error("engine {0} does not report violations and cannot drive refinement")]
    Engine(EngineKind),
    #[error("threshold must be at least 1")]
    Threshold,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Iteration {
    /// 1-based.
    pub number: usize,
    /// Labels excluded while running this iteration.
    pub excluded: BTreeSet<LabelId>,
    /// Dynamic violations reported in this iteration.
    pub violations: usize,
    /// Running total of dynamic violations up to this iteration.
    pub cumulative: usize,
    /// Labels excluded as a result of this iteration.
    pub new_labels: BTreeSet<LabelId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refinement {
    pub iterations: Vec<Iteration>,
    /// Final exclusion set.
    pub excluded: BTreeSet<LabelId>,
}

/// Drops the `begin`/`end` events of every excluded label.
pub fn demote(trace: &Trace, excluded: &BTreeSet<LabelId>) -> Trace {
    trace
        .retain_events(|e| match e.op {
            Op::Begin(l) | Op::End(l) => !excluded.contains(&l),
            _ => true,
        })
        .0
}

pub fn refine(
    trace: &Trace,
    engine: EngineKind,
    threshold: usize,
    initial: &BTreeSet<LabelId>,
) -> Result<Refinement, RefineError> {
    if !engine.reports_violations() {
        return Err(RefineError::Engine(engine));
    }
    if threshold == 0 {
        return Err(RefineError::Threshold);
    }
    let mut excluded = initial.clone();
    let mut iterations = Vec::new();
    let mut clean_streak = 0;
    let mut cumulative = 0;
    while clean_streak < threshold {
        let report = run_engine(&demote(trace, &excluded), engine)?;
        cumulative += report.violations.len();
        let new_labels: BTreeSet<LabelId> = report.violated_labels().difference(&excluded).copied().collect();
        iterations.push(Iteration {
            number: iterations.len() + 1,
            excluded: excluded.clone(),
            violations: report.violations.len(),
            cumulative,
            new_labels: new_labels.clone(),
        });
        if new_labels.is_empty() {
            clean_streak += 1;
        } else {
            clean_streak = 0;
            excluded.extend(new_labels);
        }
    }
    Ok(Refinement { iterations, excluded })
}
