//! Every engine plus the oracle on one trace, and the relations between them.

use alloc::vec::Vec;

use thiserror::Error;

use super::run_engine;
use crate::checker::AnalysisError;
use crate::oracle::{self, OracleError, OracleVerdict};
use crate::report::{EngineKind, Report};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// The documented relations, each `true` when it holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Relations {
    /// Full mode's violated transactions and verdict equal the oracle's.
    pub full_matches_oracle: bool,
    pub velodrome_within_full: bool,
    pub full_within_naive: bool,
    /// Every engine that decides the trace verdict agrees with the oracle.
    pub verdicts_agree: bool,
    /// Atomicity-only violations equal full mode's; trace-only verdict
    /// equals full mode's.
    pub modes_cohere: bool,
}

impl Relations {
    pub fn all_hold(&self) -> bool {
        self.full_matches_oracle
            && self.velodrome_within_full
            && self.full_within_naive
            && self.verdicts_agree
            && self.modes_cohere
    }
}

#[derive(Debug, Clone)]
pub struct Differential {
    pub oracle: OracleVerdict,
    /// One report per engine, in [`EngineKind::ALL`] order.
    pub reports: Vec<Report>,
    pub relations: Relations,
    /// Velodrome found strictly fewer violated transactions than full mode.
    pub velodrome_strict: bool,
    /// Naive blame found strictly more violated transactions than full mode.
    pub naive_strict: bool,
}

impl Differential {
    pub fn report(&self, kind: EngineKind) -> &Report {
        self.reports
            .iter()
            .find(|r| r.engine == kind)
            .expect("every engine runs")
    }
}

pub fn differential(trace: &Trace) -> Result<Differential, DiffError> {
    let oracle = oracle::check(trace)?;
    let reports = EngineKind::ALL
        .iter()
        .map(|&k| run_engine(trace, k))
        .collect::<Result<Vec<_>, _>>()?;
    let get = |k: EngineKind| reports.iter().find(|r| r.engine == k).expect("every engine runs");
    let full = get(EngineKind::RegionTrackFull);
    let velo = get(EngineKind::Velodrome).violated_transactions();
    let naive = get(EngineKind::NaiveBlame).violated_transactions();
    let full_set = full.violated_transactions();
    let relations = Relations {
        full_matches_oracle: full_set == oracle.violations && full.non_serializable == oracle.nonserializable,
        velodrome_within_full: velo.is_subset(&full_set),
        full_within_naive: full_set.is_subset(&naive),
        verdicts_agree: reports
            .iter()
            .filter(|r| r.engine != EngineKind::RegionTrackAtomicity)
            .all(|r| r.non_serializable == oracle.nonserializable),
        modes_cohere: get(EngineKind::RegionTrackAtomicity).violations == full.violations
            && get(EngineKind::RegionTrackTrace).non_serializable == full.non_serializable,
    };
    let velodrome_strict = velo.len() < full_set.len() && velo.is_subset(&full_set);
    let naive_strict = naive.len() > full_set.len() && full_set.is_subset(&naive);
    Ok(Differential {
        oracle,
        reports,
        relations,
        velodrome_strict,
        naive_strict,
    })
}
