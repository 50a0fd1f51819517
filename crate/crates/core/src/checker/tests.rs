use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::samples::{self, CROSSED_PAIR, INCREASING_PAIR, NONINCREASING_CYCLE, STALE_EDGE};
use crate::trace::parse_trace;

fn tid(i: usize) -> ThreadId {
    ThreadId::from_index(i)
}

fn run_prefix(text: &str, mode: Mode, upto: usize) -> Analyzer {
    let trace = parse_trace(text).unwrap();
    let mut a = Analyzer::new(mode, trace.thread_count());
    a.enable_tvc_log();
    for e in &trace.events()[..upto] {
        a.on_event(e).unwrap();
    }
    a
}

fn region_stats(r: &Report) -> RegionStats {
    match r.stats {
        Stats::Region(s) => s,
        _ => unreachable!(),
    }
}

#[test]
fn fresh_state_is_zero() {
    let a = Analyzer::new(Mode::Full, 3);
    for t in 0..3 {
        assert_eq!(a.clock(tid(t)).to_vec(3), [0, 0, 0]);
        assert_eq!(a.tvc(tid(t)), [0, 0, 0]);
        assert_eq!(a.running_ordinal(tid(t)), None);
    }
    let a = Analyzer::new(Mode::AtomicityOnly, 0);
    assert_eq!(a.thread_count(), 0);
}

#[test]
fn empty_trace_is_serializable() {
    let r = analyze(&parse_trace("").unwrap(), Mode::Full).unwrap();
    assert!(!r.non_serializable);
    assert_eq!(r.first_nonser_event, None);
    assert!(r.violations.is_empty());
    assert_eq!(region_stats(&r), RegionStats::default());
}

#[test]
fn begin_increments_and_snapshots() {
    let a = run_prefix("t1 begin A", Mode::AtomicityOnly, 1);
    assert_eq!(a.clock(tid(0)).as_slice(), &[1]);
    assert_eq!(a.begin_clock(tid(0)).unwrap().as_slice(), &[1]);
    assert_eq!(a.running_ordinal(tid(0)), Some(1));
}

#[test]
fn event_outside_region_is_unary() {
    let a = run_prefix("t1 w x", Mode::Full, 1);
    assert_eq!(a.clock(tid(0)).get(0), 1);
    assert_eq!(a.running_ordinal(tid(0)), None);
    assert_eq!(a.live_nodes(), 0);
    assert_eq!(a.stats().transactions, 1);
}

#[test]
fn structural_errors_surface() {
    let bad = |text: &str| analyze(&parse_trace(text).unwrap(), Mode::Full).unwrap_err().0;
    assert_eq!(
        bad("t1 begin A\nt1 end B"),
        StructuralIssue {
            index: 2,
            rule: Rule::LabelMismatch
        }
    );
    assert_eq!(bad("t1 begin A\nt1 begin B").rule, Rule::NestedBegin);
    assert_eq!(bad("t2 w x\nt1 end A").index, 2);
}

#[test]
fn sequential_transactions_get_increasing_ordinals() {
    let a = run_prefix("t1 begin A\nt1 end A\nt1 begin A", Mode::Full, 3);
    assert_eq!(a.running_ordinal(tid(0)), Some(2));
    assert_eq!(a.clock(tid(0)).get(0), 2);
    let r = analyze(&parse_trace("t1 begin A\nt1 end A").unwrap(), Mode::Full).unwrap();
    assert_eq!(region_stats(&r).transactions, 1);
    assert_eq!(region_stats(&r).joins, 0);
}

#[test]
fn noninc_cycle_clock_trajectory() {
    // after t1 begin A
    let a = run_prefix(NONINCREASING_CYCLE, Mode::Full, 1);
    assert_eq!(a.clock(tid(0)).to_vec(3), [1, 0, 0]);
    assert_eq!(a.begin_clock(tid(0)).unwrap().to_vec(3), [1, 0, 0]);

    // read of `a` by t2 joins the write by t1
    let a = run_prefix(NONINCREASING_CYCLE, Mode::Full, 5);
    assert_eq!(a.clock(tid(1)).to_vec(3), [1, 1, 0]);
    assert_eq!(a.stats().subregions, 1);

    // read of `b` by t3 joins the pre-join shadow of t2
    let a = run_prefix(NONINCREASING_CYCLE, Mode::Full, 7);
    assert_eq!(a.clock(tid(2)).to_vec(3), [0, 1, 1]);

    // final read by t1 joins [0,1,2]
    let a = run_prefix(NONINCREASING_CYCLE, Mode::Full, 14);
    assert_eq!(a.clock(tid(0)).to_vec(3), [1, 1, 2]);
    assert_eq!(a.begin_clock(tid(0)).unwrap().to_vec(3), [1, 0, 0]);
    assert_eq!(a.stats().subregions, 3);
}

#[test]
fn noninc_cycle_tvc_trajectory() {
    let rows = |a: &Analyzer, event: usize, t: usize, phase: TvcPhase| -> Vec<Vec<u64>> {
        a.tvc_log()
            .iter()
            .filter(|u| u.event == event && u.thread == tid(t) && u.phase == phase)
            .map(|u| u.row.clone())
            .collect()
    };
    let a = run_prefix(NONINCREASING_CYCLE, Mode::Full, 14);
    assert_eq!(rows(&a, 5, 0, TvcPhase::Direct), [vec![1, 1, 0]]);
    assert_eq!(rows(&a, 7, 1, TvcPhase::Direct), [vec![0, 1, 1]]);
    assert_eq!(rows(&a, 7, 0, TvcPhase::Back), [vec![1, 1, 1]]);
    assert_eq!(rows(&a, 14, 2, TvcPhase::Direct), [vec![1, 0, 2]]);
    // source E also reaches B through A
    assert_eq!(a.tvc(tid(2)), [1, 1, 2]);
    assert_eq!(a.tvc(tid(0)), [1, 1, 1]);

    let after_e3 = run_prefix(NONINCREASING_CYCLE, Mode::Full, 5);
    assert_eq!(after_e3.tvc(tid(0)), [1, 1, 0]);
    let after_e4 = run_prefix(NONINCREASING_CYCLE, Mode::Full, 7);
    assert_eq!(after_e4.tvc(tid(0)), [1, 1, 1]);
    assert_eq!(after_e4.tvc(tid(1)), [0, 1, 1]);
}

#[test]
fn noninc_cycle_verdicts() {
    let trace = samples::load(NONINCREASING_CYCLE);
    let r = analyze(&trace, Mode::Full).unwrap();
    assert!(r.non_serializable);
    assert_eq!(r.first_nonser_event, Some(14));
    assert!(r.violations.is_empty());
    assert_eq!(
        region_stats(&r),
        RegionStats {
            joins: 3,
            subregions: 3,
            max_live_nodes: 3,
            transactions: 5
        }
    );

    let r = analyze(&trace, Mode::AtomicityOnly).unwrap();
    assert!(!r.non_serializable);
    let r = analyze(&trace, Mode::TraceOnly).unwrap();
    assert!(r.non_serializable);
}

#[test]
fn stale_edge_violation_on_a() {
    let trace = samples::load(STALE_EDGE);
    let r = analyze(&trace, Mode::Full).unwrap();
    assert!(r.non_serializable);
    assert_eq!(
        r.violations,
        [Violation {
            event: 14,
            thread: tid(0),
            label: trace.label_id("A"),
            ordinal: 1,
            source_thread: tid(2),
        }]
    );
    // the write of `a` by t3 joined t2's read
    let a = run_prefix(STALE_EDGE, Mode::Full, 8);
    let v = a.clock(tid(2));
    assert!(v.get(0) >= 1 && v.get(1) >= 1);

    let r = analyze(&trace, Mode::TraceOnly).unwrap();
    assert!(r.non_serializable && r.violations.is_empty());
    let r = analyze(&trace, Mode::AtomicityOnly).unwrap();
    assert_eq!(r.violated_transactions().len(), 1);
}

#[test]
fn increasing_pair_violates_first_region() {
    let trace = samples::load(INCREASING_PAIR);
    let r = analyze(&trace, Mode::Full).unwrap();
    assert_eq!(
        r.violated_transactions().into_iter().collect::<Vec<_>>(),
        [(tid(0), 1)]
    );
    assert_eq!(r.first_nonser_event, Some(7));
}

#[test]
fn crossed_pair_is_nonserializable_without_violations() {
    let trace = samples::load(CROSSED_PAIR);
    let r = analyze(&trace, Mode::Full).unwrap();
    assert!(r.non_serializable);
    assert_eq!(r.first_nonser_event, Some(6));
    assert!(r.violations.is_empty());
}

#[test]
fn covered_read_does_not_join() {
    let r = analyze(&parse_trace("t1 w x\nt2 r x\nt2 r x").unwrap(), Mode::Full).unwrap();
    assert_eq!(region_stats(&r).joins, 1);
    let r = analyze(&parse_trace("t2 r x").unwrap(), Mode::Full).unwrap();
    assert_eq!(region_stats(&r).joins, 0);
}

#[test]
fn write_joins() {
    // own read and own prior write: nothing to join
    let r = analyze(&parse_trace("t1 w x\nt1 r x\nt1 w x").unwrap(), Mode::Full).unwrap();
    assert_eq!(region_stats(&r).joins, 0);
    // two foreign readers: two joins
    let r = analyze(&parse_trace("t1 r x\nt2 r x\nt3 w x").unwrap(), Mode::Full).unwrap();
    assert_eq!(region_stats(&r).joins, 2);
    // foreign write, no readers
    let r = analyze(&parse_trace("t1 w x\nt2 w x").unwrap(), Mode::Full).unwrap();
    assert_eq!(region_stats(&r).joins, 1);
}

#[test]
fn lock_joins() {
    let a = run_prefix("t1 acq m\nt1 rel m\nt2 acq m", Mode::Full, 3);
    assert_eq!(a.clock(tid(1)).to_vec(2), [2, 1]);
    let r = analyze(&parse_trace("t1 acq m\nt1 rel m\nt1 acq m").unwrap(), Mode::Full).unwrap();
    assert_eq!(region_stats(&r).joins, 0);
    let r = analyze(&parse_trace("t1 acq m").unwrap(), Mode::Full).unwrap();
    assert_eq!(region_stats(&r).joins, 0);
}

#[test]
fn unchanged_join_keeps_subregion() {
    // t2 already saw t1's write through the lock before reading x
    let text = "t1 begin A\nt1 w x\nt1 rel m\nt1 end A\nt2 begin B\nt2 acq m\nt2 r x\nt2 end B";
    let r = analyze(&parse_trace(text).unwrap(), Mode::Full).unwrap();
    let s = region_stats(&r);
    assert_eq!(s.joins, 2);
    assert_eq!(s.subregions, 1);
}

#[test]
fn first_sink_is_kept() {
    // A (t1) reaches B1 (t2) and later B2 (t2): TV(t1)[t2] stays at B1
    let text = "t1 begin A\nt1 w x\nt1 w y\nt2 r x\nt2 r y\nt1 end A";
    let a = run_prefix(text, Mode::Full, 6);
    assert_eq!(a.tvc(tid(0)), [1, 1]);
    assert_eq!(a.clock(tid(1)).get(1), 2);
}

#[test]
fn check_uses_at_most_two_comparisons() {
    for text in [NONINCREASING_CYCLE, STALE_EDGE, INCREASING_PAIR, CROSSED_PAIR] {
        let trace = samples::load(text);
        let mut a = Analyzer::new(Mode::Full, 0);
        for e in trace.events() {
            a.on_event(e).unwrap();
        }
        assert!(a.counters().max_comparisons_per_check <= 2);
        assert_eq!(a.counters().checks, a.stats().joins);
    }
}
