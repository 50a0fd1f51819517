//! Transactional vector clocks.
//!
//! `TV(t)[t]` holds the ordinal of the latest transaction of `t` that is the
//! source of a cross-thread transactional happens-before relation. For every
//! other thread `u`, `TV(t)[u]` holds the ordinal of the first transaction of
//! `u` that this source reaches, 0 meaning none. A running transaction `tx`
//! on `t` reaches transaction `tx'` of `u` exactly when it is the latest
//! source and `0 < TV(t)[u] <= ordinal(tx')`.
//!
//! A new direct relation updates the source thread's row, then forward
//! propagation copies into a row what the threads it reaches already reach,
//! and back propagation pushes the new sink into the rows of every thread
//! whose source reaches the new source. Both recursions shrink a working set
//! of threads, so each visits every thread at most once per set.

use alloc::vec::Vec;

use super::Analyzer;
use crate::threadset::ThreadSet;
use crate::trace::ThreadId;
use crate::VectorClock;

/// Which step of the update wrote a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvcPhase {
    Direct,
    Forward,
    Back,
}

/// One row change, recorded when the log is enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TvcUpdate {
    pub event: usize,
    pub thread: ThreadId,
    pub phase: TvcPhase,
    /// The whole row after the change.
    pub row: Vec<u64>,
}

impl Analyzer {
    /// Records the relation `Trans(e_x) ~> C(t)` formed by a join from thread `s`.
    pub(super) fn update_tvc(&mut self, source_clock: &VectorClock, s: usize, t: usize) {
        let source = source_clock.get(s);
        let sink = self.clocks[t].get(t);
        let calls_before = self.counters.forward_calls + self.counters.back_calls;

        let latest = self.tvc[s][s];
        if latest == source {
            let slot = self.tvc[s][t];
            if slot == 0 || slot > sink {
                self.tvc[s][t] = sink;
                self.log_row(s, TvcPhase::Direct);
            }
            self.forward_propagate(&mut ThreadSet::full(self.threads), s, t);
        } else if latest < source {
            let row = &mut self.tvc[s];
            row.iter_mut().for_each(|v| *v = 0);
            row[s] = source;
            row[t] = sink;
            if let Some(node) = self.current[s].as_mut() {
                node.latest_source = node.ordinal == source;
            }
            self.log_row(s, TvcPhase::Direct);
            self.forward_propagate(&mut ThreadSet::full(self.threads), s, t);
        }
        self.back_propagate(&mut ThreadSet::full(self.threads), s, t, source, sink);

        let calls = self.counters.forward_calls + self.counters.back_calls - calls_before;
        let max = &mut self.counters.max_propagation_calls_per_update;
        *max = (*max).max(calls);
    }

    /// Pushes `sink` to every thread whose latest source reaches transaction
    /// `source` of `t1`. Threads are removed from `working` as they are
    /// visited; the caller sees the reduced set.
    fn back_propagate(&mut self, working: &mut ThreadSet, t1: usize, t2: usize, source: u64, sink: u64) {
        self.counters.back_calls += 1;
        let entry_set = working.clone();
        working.remove(t1);
        working.remove(t2);
        for u in 0..self.threads {
            if !working.contains(u) {
                continue;
            }
            let reach = self.tvc[u][t1];
            if reach == 0 || reach > source {
                continue;
            }
            let slot = self.tvc[u][t2];
            if slot == 0 || slot > sink {
                self.tvc[u][t2] = sink;
                self.log_row(u, TvcPhase::Back);
            }
            self.forward_propagate(&mut entry_set.clone(), u, t1);
            let u_source = self.tvc[u][u];
            self.back_propagate(working, u, t2, u_source, sink);
        }
    }

    /// If the source of `t1` reaches the latest source of `t2`, copies into
    /// `TV(t1)` every first-sink of `TV(t2)` that is earlier or missing.
    fn forward_propagate(&mut self, working: &mut ThreadSet, t1: usize, t2: usize) {
        self.counters.forward_calls += 1;
        working.remove(t1);
        working.remove(t2);
        let reach = self.tvc[t1][t2];
        let latest = self.tvc[t2][t2];
        if reach == 0 || latest == 0 || reach > latest {
            return;
        }
        for u in 0..self.threads {
            if u == t1 {
                continue;
            }
            let theirs = self.tvc[t2][u];
            let mine = self.tvc[t1][u];
            if theirs != 0 && (mine == 0 || mine > theirs) {
                self.tvc[t1][u] = theirs;
                self.log_row(t1, TvcPhase::Forward);
                if working.contains(u) {
                    self.forward_propagate(working, t1, u);
                }
            }
        }
    }

    fn log_row(&mut self, t: usize, phase: TvcPhase) {
        if let Some(log) = self.tvc_log.as_mut() {
            log.push(TvcUpdate {
                event: self.event_index,
                thread: ThreadId::from_index(t),
                phase,
                row: self.tvc[t].clone(),
            });
        }
    }
}
