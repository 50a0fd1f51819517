//! The `compare` command: every engine against the oracle.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use atomcheck_core::compare::{differential, Differential, Relations};
use atomcheck_core::gen::{generate_random, GenConfig};
use atomcheck_core::trace::Trace;
use atomcheck_core::Report;

use crate::json::{label_name, OracleJson, TxJson};
use crate::{emit, to_json, Format, Output, EXIT_BREACH, EXIT_SERIALIZABLE};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RelationsJson {
    pub full_matches_oracle: bool,
    pub velodrome_within_full: bool,
    pub full_within_naive: bool,
    pub verdicts_agree: bool,
    pub modes_cohere: bool,
}

impl From<Relations> for RelationsJson {
    fn from(r: Relations) -> Self {
        RelationsJson {
            full_matches_oracle: r.full_matches_oracle,
            velodrome_within_full: r.velodrome_within_full,
            full_within_naive: r.full_within_naive,
            verdicts_agree: r.verdicts_agree,
            modes_cohere: r.modes_cohere,
        }
    }
}

#[derive(Serialize)]
struct EngineVerdict {
    engine: &'static str,
    non_serializable: bool,
    violations: Vec<TxJson>,
}

fn violated(trace: &Trace, report: &Report) -> Vec<TxJson> {
    let txs: BTreeMap<_, _> = report
        .violations
        .iter()
        .map(|v| ((v.thread, v.ordinal), v.label))
        .collect();
    txs.into_iter()
        .map(|((t, ordinal), label)| TxJson {
            thread: trace.thread_name(t).to_string(),
            ordinal,
            label: label_name(trace, label),
        })
        .collect()
}

#[derive(Serialize)]
struct SingleJson {
    oracle: OracleJson,
    engines: Vec<EngineVerdict>,
    relations: RelationsJson,
    velodrome_strict: bool,
    naive_strict: bool,
}

fn tx_set(txs: &[TxJson]) -> String {
    let items: Vec<String> = txs
        .iter()
        .map(|t| format!("{}#{} {}", t.thread, t.ordinal, t.label))
        .collect();
    format!("{{{}}}", items.join(", "))
}

fn verdict_word(non_serializable: bool) -> &'static str {
    if non_serializable {
        "non-serializable"
    } else {
        "serializable"
    }
}

fn relation_lines(s: &mut String, r: RelationsJson) {
    let ok = |b: bool| if b { "ok" } else { "BROKEN" };
    let _ = writeln!(s, "full = oracle        {}", ok(r.full_matches_oracle));
    let _ = writeln!(s, "velodrome <= full    {}", ok(r.velodrome_within_full));
    let _ = writeln!(s, "full <= naive-blame  {}", ok(r.full_within_naive));
    let _ = writeln!(s, "verdicts agree       {}", ok(r.verdicts_agree));
    let _ = writeln!(s, "modes cohere         {}", ok(r.modes_cohere));
}

pub fn single(trace: &Trace, output: &Output) -> Result<u8> {
    let d: Differential = differential(trace)?;
    let json = SingleJson {
        oracle: OracleJson::new(trace, &d.oracle),
        engines: d
            .reports
            .iter()
            .map(|r| EngineVerdict {
                engine: r.engine.name(),
                non_serializable: r.non_serializable,
                violations: violated(trace, r),
            })
            .collect(),
        relations: d.relations.into(),
        velodrome_strict: d.velodrome_strict,
        naive_strict: d.naive_strict,
    };
    let text = match output.format {
        Format::Json => to_json(&json)?,
        Format::Human => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<22}{:<18}{}",
                "oracle",
                verdict_word(json.oracle.nonserializable),
                tx_set(&json.oracle.violations)
            );
            for (e, r) in json.engines.iter().zip(&d.reports) {
                let set = if r.engine.reports_violations() {
                    tx_set(&e.violations)
                } else {
                    "-".to_string()
                };
                let _ = writeln!(
                    s,
                    "{:<22}{:<18}{}",
                    e.engine,
                    verdict_word(e.non_serializable),
                    set
                );
            }
            relation_lines(&mut s, json.relations);
            s
        }
    };
    emit(output.out.as_deref(), &text)?;
    Ok(if d.relations.all_hold() {
        EXIT_SERIALIZABLE
    } else {
        EXIT_BREACH
    })
}

#[derive(Serialize)]
struct Breach {
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    relations: Option<RelationsJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct RandomJson {
    first_seed: u64,
    last_seed: u64,
    traces: u64,
    non_serializable: u64,
    velodrome_strict: u64,
    naive_strict: u64,
    breaches: Vec<Breach>,
}

enum SeedOutcome {
    Done(Differential),
    Failed(String),
}

fn run_seed(seed: u64) -> SeedOutcome {
    let outcome = generate_random(&GenConfig::small(seed), seed)
        .map_err(anyhow::Error::from)
        .and_then(|t| Ok(differential(&t)?));
    match outcome {
        Ok(d) => SeedOutcome::Done(d),
        Err(e) => SeedOutcome::Failed(format!("{e:#}")),
    }
}

pub fn random((first, last): (u64, u64), output: &Output) -> Result<u8> {
    let outcomes: Vec<(u64, SeedOutcome)> =
        (first..=last).into_par_iter().map(|s| (s, run_seed(s))).collect();
    let mut json = RandomJson {
        first_seed: first,
        last_seed: last,
        traces: 0,
        non_serializable: 0,
        velodrome_strict: 0,
        naive_strict: 0,
        breaches: Vec::new(),
    };
    for (seed, outcome) in outcomes {
        json.traces += 1;
        match outcome {
            SeedOutcome::Done(d) => {
                json.non_serializable += d.oracle.nonserializable as u64;
                json.velodrome_strict += d.velodrome_strict as u64;
                json.naive_strict += d.naive_strict as u64;
                if !d.relations.all_hold() {
                    json.breaches.push(Breach {
                        seed,
                        relations: Some(d.relations.into()),
                        error: None,
                    });
                }
            }
            SeedOutcome::Failed(e) => json.breaches.push(Breach {
                seed,
                relations: None,
                error: Some(e),
            }),
        }
    }
    let text = match output.format {
        Format::Json => to_json(&json)?,
        Format::Human => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "# seeds {}..{}: {} traces, {} non-serializable",
                json.first_seed, json.last_seed, json.traces, json.non_serializable
            );
            let _ = writeln!(
                s,
                "# witnesses: velodrome < full on {}, full < naive-blame on {}",
                json.velodrome_strict, json.naive_strict
            );
            let _ = writeln!(s, "# breaches: {}", json.breaches.len());
            for b in &json.breaches {
                let _ = writeln!(s, "seed={}", b.seed);
                if let Some(r) = b.relations {
                    relation_lines(&mut s, r);
                }
                if let Some(e) = &b.error {
                    let _ = writeln!(s, "error: {e}");
                }
            }
            s
        }
    };
    emit(output.out.as_deref(), &text)?;
    Ok(if json.breaches.is_empty() {
        EXIT_SERIALIZABLE
    } else {
        EXIT_BREACH
    })
}
