//! Files written by experiment runs.
//!
//! | file | columns |
//! |------|---------|
//! | `transcripts.jsonl` | one transcript record per line |
//! | `runs.csv` | `index,seed,decision,rejected_at,stage,max_round_margin,final_margin` |
//! | `decay.csv` | `seed,round,abs_delta` |
//! | `fits.csv` | `index,seed,slope,ratio,accepted,monotone` |
//! | `shrinkage.csv` | `bin_lo,bin_hi,count` |
//! | `env.csv` | `input,seed,mean,std_err,samples` |
//! | `claim1.csv` | `distribution,trials,samples,max_phase_defect,max_residual,violation` |
//! | `collapse.csv` | `seed,full_accepted,two_round_accepted,final_margin_delta` |
//! | `probe.csv` | `distribution,gap,alpha,probability,std_err,samples` |
//! | `band.csv` | `n,closed_form,measured,abs_error,accepted_tight,accepted_loose` |
//! | `record.json` | config hash, canonical config, tool version, wall time, summaries |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::analysis::{
    BandReport, Claim1Report, CollapseReport, DecayRun, EnvEstimate, ProbeEstimate,
    ShrinkageSummary,
};
use crate::error::Result;
use crate::protocol::Transcript;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn write_transcripts(path: &Path, transcripts: &[&Transcript]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in transcripts {
        writeln!(w, "{}", t.to_json_line())?;
    }
    w.flush()?;
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunRow<'a> {
    index: usize,
    seed: u64,
    decision: &'a str,
    rejected_at: Option<usize>,
    stage: Option<&'a str>,
    max_round_margin: f64,
    final_margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub index: usize,
    pub seed: u64,
    pub decision: String,
    pub rejected_at: Option<usize>,
    pub stage: Option<String>,
}

pub fn run_summaries(transcripts: &[&Transcript]) -> Vec<RunSummary> {
    transcripts
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let rec = t.to_record();
            RunSummary {
                index,
                seed: t.seed,
                decision: rec.decision,
                rejected_at: rec.rejected_at,
                stage: rec.stage,
            }
        })
        .collect()
}

pub fn write_runs(path: &Path, transcripts: &[&Transcript]) -> Result<()> {
    let summaries = run_summaries(transcripts);
    write_rows(
        path,
        summaries.iter().zip(transcripts).map(|(s, t)| RunRow {
            index: s.index,
            seed: s.seed,
            decision: &s.decision,
            rejected_at: s.rejected_at,
            stage: s.stage.as_deref(),
            max_round_margin: t.max_round_margin(),
            final_margin: t.final_check.map(|c| c.margin),
        }),
    )
}

#[derive(Serialize)]
struct DecayRow {
    seed: u64,
    round: usize,
    abs_delta: f64,
}

pub fn write_decay(path: &Path, runs: &[DecayRun]) -> Result<()> {
    write_rows(
        path,
        runs.iter().flat_map(|r| {
            r.abs_deltas.iter().enumerate().map(move |(round, &abs_delta)| DecayRow {
                seed: r.seed,
                round,
                abs_delta,
            })
        }),
    )
}

#[derive(Serialize)]
struct FitRow {
    index: usize,
    seed: u64,
    slope: Option<f64>,
    ratio: f64,
    accepted: bool,
    monotone: bool,
}

pub fn write_fits(path: &Path, runs: &[DecayRun]) -> Result<()> {
    write_rows(
        path,
        runs.iter().map(|r| FitRow {
            index: r.index,
            seed: r.seed,
            slope: r.slope,
            ratio: r.ratio(),
            accepted: r.transcript.accepted(),
            monotone: r.monotone,
        }),
    )
}

#[derive(Serialize)]
struct BinRow {
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

pub fn write_shrinkage(path: &Path, s: &ShrinkageSummary) -> Result<()> {
    write_rows(
        path,
        s.histogram.iter().map(|b| BinRow {
            bin_lo: b.lo,
            bin_hi: b.hi,
            count: b.count,
        }),
    )
}

#[derive(Serialize)]
struct EnvRow {
    input: usize,
    seed: u64,
    mean: f64,
    std_err: f64,
    samples: usize,
}

/// `seeds[i]` is the run seed input `i` was generated from.
pub fn write_env(path: &Path, e: &EnvEstimate, seeds: &[u64]) -> Result<()> {
    write_rows(
        path,
        e.per_input.iter().map(|p| EnvRow {
            input: p.input,
            seed: seeds[p.input],
            mean: p.mean,
            std_err: p.std_err,
            samples: p.samples,
        }),
    )
}

#[derive(Serialize)]
struct Claim1Row<'a> {
    distribution: &'a str,
    trials: usize,
    samples: usize,
    max_phase_defect: f64,
    max_residual: f64,
    violation: Option<&'a str>,
}

pub fn write_claim1(path: &Path, distribution: &str, r: &Claim1Report) -> Result<()> {
    write_rows(
        path,
        [Claim1Row {
            distribution,
            trials: r.trials,
            samples: r.samples,
            max_phase_defect: r.max_phase_defect,
            max_residual: r.max_residual,
            violation: r.violation.as_deref(),
        }],
    )
}

#[derive(Serialize)]
struct CollapseRow {
    seed: u64,
    full_accepted: bool,
    two_round_accepted: bool,
    final_margin_delta: Option<f64>,
}

pub fn write_collapse(path: &Path, r: &CollapseReport) -> Result<()> {
    write_rows(
        path,
        r.runs.iter().map(|c| CollapseRow {
            seed: c.seed,
            full_accepted: c.full_accepted,
            two_round_accepted: c.two_round_accepted,
            final_margin_delta: c.final_margin_delta,
        }),
    )
}

#[derive(Serialize)]
struct ProbeRow<'a> {
    distribution: &'a str,
    gap: f64,
    alpha: f64,
    probability: f64,
    std_err: f64,
    samples: usize,
}

pub fn write_probe(path: &Path, distribution: &str, probes: &[ProbeEstimate]) -> Result<()> {
    write_rows(
        path,
        probes.iter().map(|p| ProbeRow {
            distribution,
            gap: p.gap,
            alpha: p.alpha,
            probability: p.probability,
            std_err: p.std_err,
            samples: p.samples,
        }),
    )
}

#[derive(Serialize)]
struct BandRow {
    n: usize,
    closed_form: f64,
    measured: f64,
    abs_error: f64,
    accepted_tight: bool,
    accepted_loose: bool,
}

pub fn write_band(path: &Path, b: &BandReport) -> Result<()> {
    write_rows(
        path,
        [BandRow {
            n: b.n,
            closed_form: b.closed_form,
            measured: b.measured,
            abs_error: (b.measured - b.closed_form).abs(),
            accepted_tight: b.accepted_tight,
            accepted_loose: b.accepted_loose,
        }],
    )
}

/// Metadata for one CLI invocation. Wall time makes this file the one
/// output that differs between identical runs.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    pub summary: String,
    pub files: Vec<String>,
    pub aggregates: BTreeMap<String, serde_json::Value>,
    pub runs: Vec<RunSummary>,
}

pub fn write_record(path: &Path, record: &RunRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, record)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
