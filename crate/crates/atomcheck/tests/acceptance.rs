//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use atomcheck_core::checker::{analyze, Analyzer, Mode, TvcPhase};
use atomcheck_core::compare::{aerodrome_check, differential, naive_blame_check, velodrome_check};
use atomcheck_core::gen::{generate_random, GenConfig};
use atomcheck_core::oracle::{self, transactions};
use atomcheck_core::refine::{refine, DEFAULT_THRESHOLD};
use atomcheck_core::samples::{self, CLEAN, CROSSED_PAIR, INCREASING_PAIR, NONINCREASING_CYCLE, STALE_EDGE};
use atomcheck_core::trace::{OpKind, ThreadId, Trace, TraceBuilder};
use atomcheck_core::Stats;

const PROPERTY_SEEDS: u64 = 100_000;
const SWAP_SEEDS: u64 = 20_000;
const TIMESTAMP_SEEDS: u64 = 5_000;
const STRESS_EVENTS: usize = 1_000_000;
const STRESS_LIMIT: Duration = Duration::from_secs(60);
const MICRO_LIMIT: Duration = Duration::from_secs(1);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn small(seed: u64) -> Trace {
    generate_random(&GenConfig::small(seed), seed).expect("small configs are valid")
}

fn tid(i: usize) -> ThreadId {
    ThreadId::from_index(i)
}

fn timed<T>(f: impl FnOnce() -> T) -> Result<T, String> {
    let start = Instant::now();
    let value = f();
    let took = start.elapsed();
    ensure(took < MICRO_LIMIT, || format!("took {took:?}"))?;
    Ok(value)
}

fn micro_traces() -> Outcome {
    let noninc = samples::load(NONINCREASING_CYCLE);
    let full = timed(|| analyze(&noninc, Mode::Full).unwrap())?;
    ensure(
        full.first_nonser_event == Some(14) && full.violations.is_empty(),
        || format!("noninc full: {:?} {:?}", full.first_nonser_event, full.violations),
    )?;
    let velo = timed(|| velodrome_check(&noninc).unwrap())?;
    ensure(velo.non_serializable && velo.violations.is_empty(), || {
        "noninc velodrome".into()
    })?;
    let naive = timed(|| naive_blame_check(&noninc).unwrap())?;
    ensure(
        naive.violated_transactions() == BTreeSet::from([(tid(0), 1)]),
        || format!("noninc naive blames {:?}", naive.violated_transactions()),
    )?;
    let aero = timed(|| aerodrome_check(&noninc).unwrap())?;
    ensure(aero.non_serializable, || "noninc aerodrome serializable".into())?;

    let stale = samples::load(STALE_EDGE);
    let full = timed(|| analyze(&stale, Mode::Full).unwrap())?;
    ensure(
        full.violated_transactions() == BTreeSet::from([(tid(0), 1)]),
        || "stale full".into(),
    )?;
    let velo = timed(|| velodrome_check(&stale).unwrap())?;
    ensure(velo.violations.is_empty(), || {
        "stale velodrome reported a violation".into()
    })?;
    let truth = timed(|| oracle::check(&stale).unwrap())?;
    ensure(truth.violations == full.violated_transactions(), || {
        "stale oracle disagrees".into()
    })?;

    let inc = timed(|| analyze(&samples::load(INCREASING_PAIR), Mode::Full).unwrap())?;
    ensure(!inc.violations.is_empty(), || {
        "increasing pair not violated".into()
    })?;
    let crossed = timed(|| analyze(&samples::load(CROSSED_PAIR), Mode::Full).unwrap())?;
    ensure(crossed.non_serializable && crossed.violations.is_empty(), || {
        "crossed pair".into()
    })?;

    let mut a = Analyzer::new(Mode::Full, noninc.thread_count());
    a.enable_tvc_log();
    for e in noninc.events() {
        a.on_event(e).unwrap();
    }
    let row = |event: usize, t: usize, phase: TvcPhase| -> Vec<Vec<u64>> {
        a.tvc_log()
            .iter()
            .filter(|u| u.event == event && u.thread == tid(t) && u.phase == phase)
            .map(|u| u.row.clone())
            .collect()
    };
    let expected = [
        (5, 0, TvcPhase::Direct, vec![1, 1, 0]),
        (7, 0, TvcPhase::Back, vec![1, 1, 1]),
        (14, 2, TvcPhase::Direct, vec![1, 0, 2]),
    ];
    for (event, t, phase, want) in expected {
        let got = row(event, t, phase);
        ensure(got == [want.clone()], || {
            format!("tvc at {event} t{}: {got:?}, want {want:?}", t + 1)
        })?;
    }
    Ok("5 encodings, verdicts and TVC rows exact, each under 1 s".into())
}

#[derive(Default)]
struct Tally {
    traces: u64,
    oracle_divergence: Vec<u64>,
    relation_breach: Vec<u64>,
    incoherent: Vec<u64>,
    resource_breach: Vec<u64>,
    velodrome_strict: u64,
    naive_strict: u64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.traces += o.traces;
        self.oracle_divergence.extend(o.oracle_divergence);
        self.relation_breach.extend(o.relation_breach);
        self.incoherent.extend(o.incoherent);
        self.resource_breach.extend(o.resource_breach);
        self.velodrome_strict += o.velodrome_strict;
        self.naive_strict += o.naive_strict;
        self
    }
}

fn property_run(seed: u64) -> Tally {
    let trace = small(seed);
    let mut t = Tally {
        traces: 1,
        ..Tally::default()
    };
    let d = differential(&trace).expect("generated traces are well formed");
    let r = d.relations;
    if !r.full_matches_oracle {
        t.oracle_divergence.push(seed);
    }
    if !(r.velodrome_within_full && r.full_within_naive && r.verdicts_agree) {
        t.relation_breach.push(seed);
    }
    if !r.modes_cohere {
        t.incoherent.push(seed);
    }
    t.velodrome_strict += d.velodrome_strict as u64;
    t.naive_strict += d.naive_strict as u64;

    let threads = trace.thread_count() as u64;
    let mut a = Analyzer::new(Mode::Full, trace.thread_count());
    let mut bounded = true;
    for e in trace.events() {
        a.on_event(e).unwrap();
        bounded &= a.live_nodes() <= threads;
    }
    if !bounded || a.counters().max_comparisons_per_check > 2 {
        t.resource_breach.push(seed);
    }
    t
}

fn first(seeds: &[u64]) -> String {
    format!(
        "{} divergence(s), first seeds {:?}",
        seeds.len(),
        &seeds[..seeds.len().min(5)]
    )
}

fn swap_search() -> Outcome {
    let (checked, bad): (u64, Vec<u64>) = (0..SWAP_SEEDS)
        .into_par_iter()
        .map(|seed| {
            let trace =
                generate_random(&GenConfig::small_within(seed, oracle::MAX_SWAP_EVENTS), seed).unwrap();
            let violated = oracle::oracle_violations(&trace).unwrap();
            let swaps = oracle::swap_serializable_all(&trace).unwrap();
            let agree = swaps.iter().all(|(k, &ser)| ser != violated.contains(k));
            (swaps.len() as u64, if agree { vec![] } else { vec![seed] })
        })
        .reduce(|| (0, vec![]), |a, b| (a.0 + b.0, [a.1, b.1].concat()));
    ensure(bad.is_empty(), || first(&bad))?;
    Ok(format!(
        "{SWAP_SEEDS} traces of at most 12 events, {checked} transactions, 0 divergences"
    ))
}

fn begin_timestamps() -> Outcome {
    let (pairs, bad): (u64, Vec<u64>) = (0..TIMESTAMP_SEEDS)
        .into_par_iter()
        .map(|seed| {
            let trace = small(seed);
            let hb = oracle::event_closure(&trace).unwrap();
            let mut a = Analyzer::new(Mode::Full, trace.thread_count());
            let clocks: Vec<_> = trace
                .events()
                .iter()
                .map(|e| {
                    a.on_event(e).unwrap();
                    a.last_event_clock().unwrap().clone()
                })
                .collect();
            let mut pairs = 0;
            let mut ok = true;
            for tx in transactions(&trace) {
                for (i, clock) in clocks.iter().enumerate() {
                    let index = i + 1;
                    if index != tx.begin() {
                        pairs += 1;
                        ok &= (tx.ordinal <= clock.get(tx.thread.index())) == hb.reaches(tx.begin(), index);
                    }
                }
            }
            (pairs, if ok { vec![] } else { vec![seed] })
        })
        .reduce(|| (0, vec![]), |a, b| (a.0 + b.0, [a.1, b.1].concat()));
    ensure(bad.is_empty(), || first(&bad))?;
    Ok(format!(
        "{TIMESTAMP_SEEDS} traces, {pairs} (transaction, event) pairs, 0 divergences"
    ))
}

/// Two producers and two consumers passing values through eight slots.
fn stress_trace(events: usize) -> Trace {
    let mut b = TraceBuilder::new();
    let slots: Vec<String> = (0..8).map(|i| format!("slot{i}")).collect();
    let mut round = 0usize;
    while b.len() + 20 <= events {
        for p in 0..2 {
            let slot = &slots[(round * 2 + p) % 8];
            let t = ["producer0", "producer1"][p];
            b.event(t, OpKind::Begin, "produce")
                .event(t, OpKind::Acquire, "queue")
                .event(t, OpKind::Write, slot)
                .event(t, OpKind::Release, "queue")
                .event(t, OpKind::End, "produce");
        }
        for c in 0..2 {
            let slot = &slots[(round * 2 + c + 7) % 8];
            let t = ["consumer0", "consumer1"][c];
            b.event(t, OpKind::Begin, "consume")
                .event(t, OpKind::Read, slot)
                .event(t, OpKind::Write, slot)
                .event(t, OpKind::Read, &slots[(round + c) % 8])
                .event(t, OpKind::End, "consume");
        }
        round += 1;
    }
    while b.len() < events {
        b.event("producer0", OpKind::Read, "slot0");
    }
    b.finish()
}

fn stress() -> Result<String, String> {
    let trace = stress_trace(STRESS_EVENTS);
    let start = Instant::now();
    let mut a = Analyzer::new(Mode::Full, trace.thread_count());
    let mut max_live = 0;
    for e in trace.events() {
        a.on_event(e).map_err(|e| e.to_string())?;
        max_live = max_live.max(a.live_nodes());
    }
    let took = start.elapsed();
    let counters = *a.counters();
    let report = a.finish();
    ensure(took <= STRESS_LIMIT, || format!("stress took {took:?}"))?;
    ensure(max_live <= trace.thread_count() as u64, || {
        format!("stress live nodes {max_live}")
    })?;
    ensure(counters.max_comparisons_per_check <= 2, || {
        "stress comparisons".into()
    })?;
    ensure(counters.checks > 0, || "stress ran no checks".into())?;
    Ok(format!(
        "{} events in {:.2?}, {} checks, max live nodes {max_live}, {} violations",
        trace.len(),
        took,
        counters.checks,
        report.violations.len()
    ))
}

fn trace_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/traces")
        .join(name)
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_atomcheck"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn determinism() -> Outcome {
    let mut runs = 0;
    for name in [
        "noninc_cycle.trace",
        "stale_edge.trace",
        "shadowed.trace",
        "clean.trace",
    ] {
        let p = trace_path(name);
        let p = p.to_str().unwrap();
        for engine in [
            "regiontrack-full",
            "regiontrack-atomicity",
            "regiontrack-trace",
            "velodrome",
            "aerodrome",
            "naive-blame",
        ] {
            let a = cli(&["check", p, "--engine", engine]);
            let b = cli(&["check", p, "--engine", engine]);
            ensure(a.stdout == b.stdout && !a.stdout.is_empty(), || {
                format!("{name} {engine} differs")
            })?;
            runs += 1;
        }
    }
    let p = trace_path("noninc_cycle.trace");
    let out = cli(&["stats", p.to_str().unwrap(), "--engine", "regiontrack-full"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let anchors = [
        ("joins", 3),
        ("subregions", 3),
        ("max_live_nodes", 3),
        ("transactions", 5),
    ];
    for (k, v) in anchors {
        ensure(json[k] == v, || format!("stats {k} = {}, want {v}", json[k]))?;
    }
    let Stats::Region(s) = analyze(&samples::load(NONINCREASING_CYCLE), Mode::Full)
        .unwrap()
        .stats
    else {
        return Err("region engine returned foreign stats".into());
    };
    ensure(
        (s.joins, s.subregions, s.max_live_nodes, s.transactions) == (3, 3, 3, 5),
        || format!("{s:?}"),
    )?;
    Ok(format!("{runs} engine/trace pairs byte-identical, stats 3/3/3/5"))
}

fn refinement() -> Outcome {
    let stale = samples::load(STALE_EDGE);
    let a = stale.label_id("A").unwrap();
    let r = refine(
        &stale,
        atomcheck_core::EngineKind::RegionTrackFull,
        DEFAULT_THRESHOLD,
        &BTreeSet::new(),
    )
    .map_err(|e| e.to_string())?;
    ensure(r.excluded == BTreeSet::from([a]), || {
        format!("excluded {:?}", r.excluded)
    })?;
    ensure(r.iterations.len() == 3, || {
        format!("{} iterations", r.iterations.len())
    })?;
    let tail_clean = r.iterations[1..].iter().all(|i| i.new_labels.is_empty());
    ensure(tail_clean, || "late iterations found new labels".into())?;
    let clean = refine(
        &samples::load(CLEAN),
        atomcheck_core::EngineKind::RegionTrackFull,
        DEFAULT_THRESHOLD,
        &BTreeSet::new(),
    )
    .map_err(|e| e.to_string())?;
    ensure(clean.excluded.is_empty() && clean.iterations.len() == 2, || {
        "clean trace".into()
    })?;
    Ok("violated trace excludes {A} after 3 iterations; clean trace stops after 2 with {}".into())
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut line = |n: u32, name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("criterion {n} PASS {name}: {detail}"),
        Err(why) => {
            failed += 1;
            println!("criterion {n} FAIL {name}: {why}");
        }
    };

    line(1, "micro-traces", guarded(micro_traces));

    let start = Instant::now();
    let tally = panic::catch_unwind(|| {
        (0..PROPERTY_SEEDS)
            .into_par_iter()
            .map(property_run)
            .reduce(Tally::default, Tally::merge)
    })
    .unwrap_or_default();
    let took = start.elapsed();
    let verdicts = format!("violation sets and verdicts equal the oracle in {took:.1?}");
    line(
        2,
        "oracle equivalence",
        property_outcome(&tally, &tally.oracle_divergence, &verdicts),
    );
    line(3, "swap search", guarded(swap_search));
    line(4, "comparator relations", {
        let base = property_outcome(
            &tally,
            &tally.relation_breach,
            "velodrome <= full <= naive-blame, verdicts agree",
        );
        base.and_then(|d| {
            ensure(tally.velodrome_strict > 0 && tally.naive_strict > 0, || {
                format!(
                    "witnesses missing: velodrome {}, naive {}",
                    tally.velodrome_strict, tally.naive_strict
                )
            })?;
            Ok(format!(
                "{d}; strict witnesses velodrome {} naive-blame {}",
                tally.velodrome_strict, tally.naive_strict
            ))
        })
    });
    line(
        5,
        "mode coherence",
        property_outcome(
            &tally,
            &tally.incoherent,
            "atomicity-only and trace-only agree with full",
        ),
    );
    line(6, "begin timestamps", guarded(begin_timestamps));
    line(7, "resource bounds", {
        property_outcome(
            &tally,
            &tally.resource_breach,
            "live nodes <= threads, <= 2 comparisons per check",
        )
        .and_then(|d| guarded(stress).map(|s| format!("{d}; stress {s}")))
    });
    line(8, "determinism", guarded(determinism));
    line(9, "refinement", guarded(refinement));

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}

fn property_outcome(tally: &Tally, bad: &[u64], what: &str) -> Outcome {
    ensure(tally.traces == PROPERTY_SEEDS, || {
        format!("ran {} of {PROPERTY_SEEDS} traces", tally.traces)
    })?;
    ensure(bad.is_empty(), || first(bad))?;
    Ok(format!("{} traces, {what}, 0 divergences", tally.traces))
}
