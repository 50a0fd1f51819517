//! End-of-transaction vector clock checker.
//!
//! Each thread keeps `C_t` and the clock of its running transaction's begin,
//! `B_t`. Reads, writes and acquires join the conflicting clock through
//! `check_and_get`, which first reports the trace as non-serializable if the
//! source already knows `B_t`. When a transaction ends, every thread, write,
//! read and release clock that knows `B_t` absorbs `C_t`, which lifts the
//! event order to whole transactions. Threads absorb it through
//! `check_and_get`, so a running transaction that the ending one already
//! knows about closes a cycle there.

use alloc::vec::Vec;

use super::{drive, TxEngine};
use crate::checker::AnalysisError;
use crate::clock::VectorClock;
use crate::report::{AeroStats, EngineKind, Report, Stats};
use crate::trace::{LabelId, Op, Trace};

#[derive(Debug, Clone, Default)]
struct Location {
    write: Option<(VectorClock, usize)>,
    reads: Vec<Option<VectorClock>>,
}

struct Aerodrome {
    clocks: Vec<VectorClock>,
    begins: Vec<VectorClock>,
    active: Vec<bool>,
    locations: Vec<Location>,
    locks: Vec<Option<(VectorClock, usize)>>,
    stats: AeroStats,
    report: Report,
    index: usize,
}

impl Aerodrome {
    fn check_and_get(&mut self, clock: &VectorClock, t: usize) {
        if self.active[t] && self.begins[t].leq(clock) {
            self.report.mark_non_serializable(self.index);
        }
        self.clocks[t].join(clock);
        self.stats.joins += 1;
    }
}

impl TxEngine for Aerodrome {
    fn begin(&mut self, t: usize, _label: Option<LabelId>, index: usize) {
        self.index = index;
        self.clocks[t].inc(t);
        self.begins[t] = self.clocks[t].clone();
        self.active[t] = true;
        self.stats.transactions += 1;
    }

    fn end(&mut self, t: usize, index: usize) {
        self.index = index;
        self.stats.end_events += 1;
        self.active[t] = false;
        let ct = self.clocks[t].clone();
        for u in 0..self.clocks.len() {
            if u != t && self.begins[t].leq(&self.clocks[u]) {
                self.check_and_get(&ct, u);
            }
        }
        let begin = &self.begins[t];
        for loc in &mut self.locations {
            if let Some((w, _)) = loc.write.as_mut() {
                if begin.leq(w) {
                    w.join(&ct);
                }
            }
            for r in loc.reads.iter_mut().flatten() {
                if begin.leq(r) {
                    r.join(&ct);
                }
            }
        }
        for (l, _) in self.locks.iter_mut().flatten() {
            if begin.leq(l) {
                l.join(&ct);
            }
        }
    }

    fn access(&mut self, t: usize, op: Op, index: usize) {
        self.index = index;
        match op {
            Op::Read(x) => {
                let x = x.index();
                if x >= self.locations.len() {
                    self.locations.resize_with(x + 1, Location::default);
                }
                if let Some((w, writer)) = self.locations[x].write.clone() {
                    if writer != t {
                        self.check_and_get(&w, t);
                    }
                }
                let reads = &mut self.locations[x].reads;
                if t >= reads.len() {
                    reads.resize(t + 1, None);
                }
                reads[t] = Some(self.clocks[t].clone());
            }
            Op::Write(x) => {
                let x = x.index();
                if x >= self.locations.len() {
                    self.locations.resize_with(x + 1, Location::default);
                }
                let loc = self.locations[x].clone();
                if let Some((w, writer)) = loc.write {
                    if writer != t {
                        self.check_and_get(&w, t);
                    }
                }
                for (u, r) in loc.reads.iter().enumerate() {
                    if let (true, Some(r)) = (u != t, r) {
                        self.check_and_get(r, t);
                    }
                }
                self.locations[x].write = Some((self.clocks[t].clone(), t));
            }
            Op::Acquire(m) => {
                if let Some(Some((l, releaser))) = self.locks.get(m.index()).cloned() {
                    if releaser != t {
                        self.check_and_get(&l, t);
                    }
                }
            }
            Op::Release(m) => {
                let m = m.index();
                if m >= self.locks.len() {
                    self.locks.resize(m + 1, None);
                }
                self.locks[m] = Some((self.clocks[t].clone(), t));
            }
            Op::Begin(_) | Op::End(_) => unreachable!("boundaries are not accesses"),
        }
    }
}

/// Trace verdict only; `violations` is always empty.
pub fn aerodrome_check(trace: &Trace) -> Result<Report, AnalysisError> {
    let n = trace.thread_count();
    let mut a = Aerodrome {
        clocks: alloc::vec![VectorClock::new(); n],
        begins: alloc::vec![VectorClock::new(); n],
        active: alloc::vec![false; n],
        locations: Vec::new(),
        locks: Vec::new(),
        stats: AeroStats::default(),
        report: Report::new(EngineKind::Aerodrome, Stats::Aero(AeroStats::default())),
        index: 0,
    };
    drive(trace, &mut a)?;
    a.stats.locations = a.locations.len() as u64;
    a.stats.locks = a.locks.len() as u64;
    a.report.stats = Stats::Aero(a.stats);
    Ok(a.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{self, CLEAN, CROSSED_PAIR, INCREASING_PAIR, NONINCREASING_CYCLE, STALE_EDGE};
    use crate::trace::parse_trace;

    #[test]
    fn verdicts_on_samples() {
        for (text, expected, at) in [
            (NONINCREASING_CYCLE, true, Some(14)),
            (STALE_EDGE, true, Some(14)),
            (INCREASING_PAIR, true, Some(7)),
            (CROSSED_PAIR, true, Some(7)),
            (CLEAN, false, None),
        ] {
            let r = aerodrome_check(&samples::load(text)).unwrap();
            assert_eq!(r.non_serializable, expected);
            assert_eq!(r.first_nonser_event, at);
            assert!(r.violations.is_empty());
        }
    }

    #[test]
    fn disjoint_variables_are_serializable() {
        let t = parse_trace("t1 begin A\nt2 begin B\nt1 w x\nt2 w y\nt1 r x\nt2 r y\nt1 end A\nt2 end B")
            .unwrap();
        let r = aerodrome_check(&t).unwrap();
        assert!(!r.non_serializable);
        assert_eq!(
            r.stats,
            Stats::Aero(AeroStats {
                joins: 0,
                end_events: 2,
                locations: 2,
                locks: 0,
                transactions: 2
            })
        );
    }
}
