//! `atomcheck`: check execution traces for transactional atomicity violations.
//!
//! Exit codes: 0 serializable (or success), 1 non-serializable, 2 usage, IO,
//! parse or structural error, 3 a documented relation between engines broke.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use atomcheck_core::checker::{Analyzer, Mode};
use atomcheck_core::compare::run_engine;
use atomcheck_core::gen::{generate_random, GenConfig};
use atomcheck_core::oracle;
use atomcheck_core::refine::{refine, DEFAULT_THRESHOLD};
use atomcheck_core::trace::{parse_trace, serialize_trace, unclosed_regions, LabelId, Trace};
use atomcheck_core::{EngineKind, Report};

mod compare;
mod json;

use json::{label_name, OracleJson, RefineJson, ReportJson, StatsJson};

const EXIT_SERIALIZABLE: u8 = 0;
const EXIT_NONSERIALIZABLE: u8 = 1;
const EXIT_ERROR: u8 = 2;
const EXIT_BREACH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "atomcheck",
    version,
    about = "Transactional atomicity checker for execution traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a trace with one engine.
    Check {
        path: PathBuf,
        #[arg(long)]
        engine: EngineArg,
        #[command(flatten)]
        output: Output,
        /// Presizes per-thread clocks for the region-tracking engines.
        #[arg(long, default_value_t = 0)]
        threads_hint: usize,
    },
    /// Decide a trace with the brute-force oracle.
    Oracle {
        path: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Run every engine and the oracle and check the relations between them.
    Compare {
        /// Trace file; omit with --random or --seed.
        path: Option<PathBuf>,
        /// Inclusive seed range `A..B` of generated small traces.
        #[arg(long, conflicts_with_all = ["path", "seed"])]
        random: Option<String>,
        /// A single generated small trace.
        #[arg(long, conflicts_with = "path")]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Write a random trace.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        config: GenArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shrink the atomicity specification until no new labels are violated.
    Refine {
        path: PathBuf,
        #[arg(long, default_value = "regiontrack-full")]
        engine: EngineArg,
        /// Consecutive iterations without a new label before stopping.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: usize,
        /// Labels excluded from the first iteration on.
        #[arg(long = "exclude", value_name = "LABEL")]
        exclude: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Print an engine's runtime counters.
    Stats {
        path: PathBuf,
        #[arg(long)]
        engine: EngineArg,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Human,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    RegiontrackFull,
    RegiontrackAtomicity,
    RegiontrackTrace,
    Velodrome,
    Aerodrome,
    NaiveBlame,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::RegiontrackFull => EngineKind::RegionTrackFull,
            EngineArg::RegiontrackAtomicity => EngineKind::RegionTrackAtomicity,
            EngineArg::RegiontrackTrace => EngineKind::RegionTrackTrace,
            EngineArg::Velodrome => EngineKind::Velodrome,
            EngineArg::Aerodrome => EngineKind::Aerodrome,
            EngineArg::NaiveBlame => EngineKind::NaiveBlame,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Draw the whole configuration from the seed, as `compare --random` does.
    #[arg(long, conflicts_with_all = ["threads", "events", "variables", "locks", "labels", "p_region"])]
    small: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    events: Option<usize>,
    #[arg(long)]
    variables: Option<usize>,
    #[arg(long)]
    locks: Option<usize>,
    #[arg(long)]
    labels: Option<usize>,
    #[arg(long)]
    p_region: Option<f64>,
}

impl GenArgs {
    fn config(&self, seed: u64) -> GenConfig {
        if self.small {
            return GenConfig::small(seed);
        }
        let d = GenConfig::default();
        GenConfig {
            threads: self.threads.unwrap_or(d.threads),
            events: self.events.unwrap_or(d.events),
            variables: self.variables.unwrap_or(d.variables),
            locks: self.locks.unwrap_or(d.locks),
            region_labels: self.labels.unwrap_or(d.region_labels),
            p_region: self.p_region.unwrap_or(d.p_region),
            mix: d.mix,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Check {
            path,
            engine,
            output,
            threads_hint,
        } => cmd_check(&path, engine.into(), &output, threads_hint),
        Command::Oracle { path, output } => cmd_oracle(&path, &output),
        Command::Compare {
            path,
            random,
            seed,
            output,
        } => match (path, random, seed) {
            (Some(path), None, None) => compare::single(&load(&path)?, &output),
            (None, Some(range), None) => compare::random(parse_range(&range)?, &output),
            (None, None, Some(seed)) => compare::random((seed, seed), &output),
            _ => bail!("compare needs a trace path, --random A..B or --seed N"),
        },
        Command::Generate { seed, config, out } => {
            let trace = generate_random(&config.config(seed), seed)?;
            emit(out.as_deref(), &serialize_trace(&trace))?;
            Ok(EXIT_SERIALIZABLE)
        }
        Command::Refine {
            path,
            engine,
            threshold,
            exclude,
            output,
        } => cmd_refine(&path, engine.into(), threshold, &exclude, &output),
        Command::Stats { path, engine, output } => cmd_stats(&path, engine.into(), &output),
    }
}

fn load(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_trace(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn verdict_code(non_serializable: bool) -> u8 {
    if non_serializable {
        EXIT_NONSERIALIZABLE
    } else {
        EXIT_SERIALIZABLE
    }
}

fn mode(kind: EngineKind) -> Option<Mode> {
    match kind {
        EngineKind::RegionTrackFull => Some(Mode::Full),
        EngineKind::RegionTrackAtomicity => Some(Mode::AtomicityOnly),
        EngineKind::RegionTrackTrace => Some(Mode::TraceOnly),
        _ => None,
    }
}

fn analyze(trace: &Trace, kind: EngineKind, threads_hint: usize) -> Result<Report> {
    let Some(mode) = mode(kind) else {
        return Ok(run_engine(trace, kind)?);
    };
    let mut a = Analyzer::new(mode, threads_hint.max(trace.thread_count()));
    for e in trace.events() {
        a.on_event(e)?;
    }
    Ok(a.finish())
}

fn warn_unclosed(trace: &Trace) {
    for issue in unclosed_regions(trace) {
        eprintln!("warning: {issue}");
    }
}

fn cmd_check(path: &Path, kind: EngineKind, output: &Output, threads_hint: usize) -> Result<u8> {
    let trace = load(path)?;
    warn_unclosed(&trace);
    let report = analyze(&trace, kind, threads_hint)?;
    let text = match output.format {
        Format::Json => to_json(&ReportJson::new(&trace, &report))?,
        Format::Human => human_report(&trace, &report),
    };
    emit(output.out.as_deref(), &text)?;
    Ok(verdict_code(report.non_serializable))
}

fn human_report(trace: &Trace, report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# engine {}", report.engine);
    if report.engine == EngineKind::Velodrome {
        s.push_str("# velodrome keeps one edge per transaction pair and blames increasing cycles only; it can miss violations\n");
    }
    match report.first_nonser_event {
        Some(e) => {
            let _ = writeln!(s, "# non-serializable at event {e}");
        }
        None => s.push_str("# serializable\n"),
    }
    if report.engine.reports_violations() {
        let by_label = report.violations_by_label();
        let rollup: Vec<String> = by_label
            .iter()
            .map(|(&l, n)| format!("{}={n}", label_name(trace, l)))
            .collect();
        let _ = writeln!(
            s,
            "# {} dynamic violation(s), {} distinct{}{}",
            report.violations.len(),
            by_label.len(),
            if rollup.is_empty() { "" } else { ": " },
            rollup.join(" ")
        );
    }
    for v in &report.violations {
        let _ = writeln!(
            s,
            "event={} thread={} label={} ordinal={} source={}",
            v.event,
            trace.thread_name(v.thread),
            label_name(trace, v.label),
            v.ordinal,
            trace.thread_name(v.source_thread)
        );
    }
    s
}

fn cmd_oracle(path: &Path, output: &Output) -> Result<u8> {
    let trace = load(path)?;
    let verdict = oracle::check(&trace)?;
    let json = OracleJson::new(&trace, &verdict);
    let text = match output.format {
        Format::Json => to_json(&json)?,
        Format::Human => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "# oracle: {}",
                if json.nonserializable {
                    "non-serializable"
                } else {
                    "serializable"
                }
            );
            for v in &json.violations {
                let _ = writeln!(s, "thread={} label={} ordinal={}", v.thread, v.label, v.ordinal);
            }
            s
        }
    };
    emit(output.out.as_deref(), &text)?;
    Ok(verdict_code(verdict.nonserializable))
}

fn resolve_labels(trace: &Trace, names: &[String]) -> Result<BTreeSet<LabelId>> {
    names
        .iter()
        .map(|n| {
            trace
                .label_id(n)
                .ok_or_else(|| anyhow!("label {n:?} does not occur in the trace"))
        })
        .collect()
}

fn cmd_refine(
    path: &Path,
    kind: EngineKind,
    threshold: usize,
    exclude: &[String],
    output: &Output,
) -> Result<u8> {
    let trace = load(path)?;
    let initial = resolve_labels(&trace, exclude)?;
    let r = refine(&trace, kind, threshold, &initial)?;
    let json = RefineJson::new(&trace, kind.name(), threshold, &r);
    let text = match output.format {
        Format::Json => to_json(&json)?,
        Format::Human => {
            let mut s = String::new();
            let _ = writeln!(s, "# engine {} threshold {}", json.engine, json.threshold);
            for i in &json.iterations {
                let _ = writeln!(
                    s,
                    "iteration={} violations={} cumulative={} excluded=[{}] new=[{}]",
                    i.iteration,
                    i.violations,
                    i.cumulative,
                    i.excluded.join(","),
                    i.new_labels.join(",")
                );
            }
            let _ = writeln!(s, "excluded=[{}]", json.excluded.join(","));
            s
        }
    };
    emit(output.out.as_deref(), &text)?;
    Ok(EXIT_SERIALIZABLE)
}

#[derive(Serialize)]
struct StatsOut {
    engine: &'static str,
    #[serde(flatten)]
    stats: StatsJson,
}

fn cmd_stats(path: &Path, kind: EngineKind, output: &Output) -> Result<u8> {
    let trace = load(path)?;
    let report = analyze(&trace, kind, 0)?;
    let out = StatsOut {
        engine: kind.name(),
        stats: report.stats.into(),
    };
    let text = match output.format {
        Format::Json => to_json(&out)?,
        Format::Human => {
            let mut s = format!("engine={}\n", out.engine);
            for (k, v) in out.stats.fields() {
                let _ = writeln!(s, "{k}={v}");
            }
            s
        }
    };
    emit(output.out.as_deref(), &text)?;
    Ok(EXIT_SERIALIZABLE)
}

fn parse_range(s: &str) -> Result<(u64, u64)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| anyhow!("expected a seed range `A..B`, got {s:?}"))?;
    let a: u64 = a
        .trim()
        .parse()
        .with_context(|| format!("bad range start in {s:?}"))?;
    let b: u64 = b
        .trim_start_matches('=')
        .trim()
        .parse()
        .with_context(|| format!("bad range end in {s:?}"))?;
    if a > b {
        bail!("empty seed range {s:?}");
    }
    Ok((a, b))
}
