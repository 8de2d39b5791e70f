//! Configuration, batch execution and persistence for experiments.
//!
//! Every run derives its seed from the master seed and its run index (see
//! [`crate::seeding`]), so identical configs give byte-identical transcript
//! and CSV files.

pub mod cli;
pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use crate::analysis::{
    ag_cheat_experiment, band_experiment, claim1_check, collapse_test, decay_experiment,
    estimate_env, honest_batch, random_unit_matrix, shrinkage_stats, stability_probe, DecayReport,
};
use crate::circuit::random_circuit;
use crate::error::Result;
use crate::numerics::C64;
use crate::protocol::{
    ag_spec, synthetic_spec, AgFamily, BlockStabilizerDistribution, Functional,
    IdentityDistribution, PhaseDistribution, ProtocolSpec, ScaleDistribution, SyntheticFamily,
    SyntheticInput, Transcript, TransformationDistribution,
};
use crate::seeding::{derive_seed, rng_from_seed, substream, Rng};

use config::{Command, Distribution, ExperimentConfig};
use output::RunRecord;

/// Overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "LSCC_OUT_DIR";

/// Sub-streams of the master seed for draws that belong to no single run.
const BASIS_STREAM: u64 = 0x0b10c;
const EXPERIMENT_STREAM: u64 = 0xe4;

pub fn resolve_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.out_dir.clone())
}

/// What an experiment produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub record: RunRecord,
}

fn distribution_for(
    d: Distribution,
    functional: &Functional,
    master_seed: u64,
) -> Result<Box<dyn TransformationDistribution>> {
    Ok(match d {
        Distribution::Identity => Box::new(IdentityDistribution),
        Distribution::Phase => Box::new(PhaseDistribution),
        Distribution::Block(c) => Box::new(BlockStabilizerDistribution::new(
            functional,
            c,
            &mut rng_from_seed(substream(master_seed, BASIS_STREAM)),
        )?),
        Distribution::Scale(c) => Box::new(ScaleDistribution::new(C64::new(c, 0.0))?),
        Distribution::Ag => unreachable!("AG has no standalone distribution"),
    })
}

/// Synthetic spec on 8x8 matrices under the trace functional, with the
/// verifier folding phases for stability-preserving distributions.
pub fn synthetic_for(cfg: &ExperimentConfig) -> Result<ProtocolSpec<SyntheticFamily>> {
    let f = Functional::trace(8);
    let dist = cfg.distribution();
    let spec = synthetic_spec(
        f.clone(),
        distribution_for(dist, &f, cfg.master_seed)?,
        cfg.t,
        1.0,
        cfg.mu.precision(),
    )?;
    Ok(spec
        .with_phase_folding(dist.stability_preserving())
        .with_quantization(cfg.bit_quantization))
}

pub fn ag_for(cfg: &ExperimentConfig) -> Result<ProtocolSpec<AgFamily>> {
    Ok(ag_spec(cfg.n, cfg.t, 1.0)?
        .with_precision(cfg.mu.precision())
        .with_quantization(cfg.bit_quantization))
}

/// Random synthetic input: unit-norm Gaussian `M_0`.
pub fn synthetic_input(n: usize, rng: &mut Rng) -> Result<SyntheticInput> {
    Ok(SyntheticInput {
        n,
        m0: random_unit_matrix(8, rng),
    })
}

/// Evaluates `$body` with `$spec` bound to the configured spec and `$input`
/// to its input generator.
macro_rules! with_instance {
    ($cfg:expr, |$spec:ident, $input:ident| $body:expr) => {{
        let cfg: &ExperimentConfig = $cfg;
        if cfg.distribution() == Distribution::Ag {
            let $spec = ag_for(cfg)?;
            let gate_set = cfg.gate_set.0.clone();
            let (n, t) = (cfg.n, cfg.t);
            let $input = move |rng: &mut Rng| random_circuit(n, t, &gate_set, rng);
            $body
        } else {
            let $spec = synthetic_for(cfg)?;
            let n = cfg.n;
            let $input = move |rng: &mut Rng| synthetic_input(n, rng);
            $body
        }
    }};
}

struct Collected {
    summary: String,
    files: Vec<PathBuf>,
    aggregates: BTreeMap<String, serde_json::Value>,
    runs: Vec<output::RunSummary>,
}

fn accept_line(transcripts: &[&Transcript]) -> String {
    let a = transcripts.iter().filter(|t| t.accepted()).count();
    format!("accept={a}/{}", transcripts.len())
}

fn cheat_outputs(
    out: &Path,
    report: &DecayReport,
    epsilon: f64,
    fits: bool,
) -> Result<Collected> {
    let transcripts: Vec<&Transcript> = report.runs.iter().map(|r| &r.transcript).collect();
    let mut files = vec![out.join("transcripts.jsonl"), out.join("runs.csv"), out.join("decay.csv")];
    output::write_transcripts(&files[0], &transcripts)?;
    output::write_runs(&files[1], &transcripts)?;
    output::write_decay(&files[2], &report.runs)?;
    if fits {
        files.push(out.join("fits.csv"));
        output::write_fits(&files[3], &report.runs)?;
    }
    let ledgers = report.ledgers();
    let shrink = shrinkage_stats(&ledgers, epsilon, 20).ok();
    if let Some(s) = &shrink {
        let path = out.join("shrinkage.csv");
        output::write_shrinkage(&path, s)?;
        files.push(path);
    }
    let median_product = shrink.as_ref().map(|s| {
        let mut p = s.products.clone();
        p.sort_by(f64::total_cmp);
        crate::analysis::median(&p)
    });
    let slopes: Vec<f64> = report.runs.iter().filter_map(|r| r.slope).collect();
    let mean_slope = slopes.iter().sum::<f64>() / slopes.len().max(1) as f64;
    let mut aggregates = BTreeMap::new();
    aggregates.insert("acceptance_fraction".into(), json!(report.acceptance_fraction()));
    aggregates.insert("tolerance".into(), json!(report.tolerance));
    aggregates.insert("median_ratio".into(), json!(report.median_ratio()));
    aggregates.insert("fraction_ratio_below_1e-3".into(), json!(report.fraction_ratio_below(1e-3)));
    aggregates.insert("all_monotone".into(), json!(report.all_monotone()));
    aggregates.insert("mean_slope".into(), json!(mean_slope));
    if let Some(s) = &shrink {
        aggregates.insert("shrinkage_mean".into(), json!(s.mean));
        aggregates.insert("shrinkage_median".into(), json!(s.median));
        aggregates.insert("fraction_shrinking".into(), json!(s.fraction_shrinking));
        aggregates.insert("max_product_rel_error".into(), json!(s.max_product_rel_error));
    }
    let mut summary = format!(
        "{} median_ratio={:.3e} mean_slope={mean_slope:.4}",
        accept_line(&transcripts),
        report.median_ratio()
    );
    if let Some(m) = median_product {
        summary.push_str(&format!(" median_prod_S={m:.3e}"));
    }
    Ok(Collected {
        summary,
        files,
        aggregates,
        runs: output::run_summaries(&transcripts),
    })
}

fn run_command(cfg: &ExperimentConfig, out: &Path) -> Result<Collected> {
    let master = cfg.master_seed;
    let mut aggregates = BTreeMap::new();
    match cfg.command {
        Command::Honest => {
            let transcripts = with_instance!(cfg, |spec, input| {
                honest_batch(&spec, input, cfg.seeds, master)?
            });
            let refs: Vec<&Transcript> = transcripts.iter().collect();
            let files = vec![out.join("transcripts.jsonl"), out.join("runs.csv")];
            output::write_transcripts(&files[0], &refs)?;
            output::write_runs(&files[1], &refs)?;
            let max_margin = refs.iter().map(|t| t.max_round_margin()).fold(0.0, f64::max);
            let max_final = refs
                .iter()
                .filter_map(|t| t.final_check.map(|c| c.margin))
                .fold(0.0, f64::max);
            let accepted = refs.iter().filter(|t| t.accepted()).count();
            aggregates.insert("acceptance_fraction".into(), json!(accepted as f64 / refs.len() as f64));
            aggregates.insert("max_round_margin".into(), json!(max_margin));
            aggregates.insert("max_final_margin".into(), json!(max_final));
            Ok(Collected {
                summary: format!(
                    "{} max_round_margin={max_margin:.3e} max_final_margin={max_final:.3e}",
                    accept_line(&refs)
                ),
                files,
                aggregates,
                runs: output::run_summaries(&refs),
            })
        }
        Command::Cheat => {
            let report = if cfg.distribution() == Distribution::Ag {
                ag_cheat_experiment(&ag_for(cfg)?, &cfg.gate_set.0, cfg.offset(), cfg.seeds, master)?
            } else {
                let spec = synthetic_for(cfg)?;
                let n = cfg.n;
                decay_experiment(&spec, |rng| synthetic_input(n, rng), cfg.offset(), cfg.seeds, master, spec.precision)?
            };
            cheat_outputs(out, &report, cfg.epsilon, false)
        }
        Command::Decay => {
            let report = with_instance!(cfg, |spec, input| {
                decay_experiment(&spec, input, cfg.offset(), cfg.seeds, master, spec.precision)?
            });
            cheat_outputs(out, &report, cfg.epsilon, true)
        }
        Command::Env => {
            let seeds: Vec<u64> = (0..cfg.seeds).map(|i| derive_seed(master, i as u64)).collect();
            let est = with_instance!(cfg, |spec, input| {
                let inputs = seeds
                    .iter()
                    .map(|&s| input(&mut rng_from_seed(substream(s, crate::analysis::INPUT_STREAM))))
                    .collect::<Result<Vec<_>>>()?;
                let mut rng = rng_from_seed(substream(master, EXPERIMENT_STREAM));
                estimate_env(&spec, &inputs, cfg.samples, &mut rng)?
            });
            let path = out.join("env.csv");
            output::write_env(&path, &est, &seeds)?;
            aggregates.insert("minimum".into(), json!(est.minimum));
            aggregates.insert("q_star".into(), json!(est.q_star));
            aggregates.insert("surrogate".into(), json!("minimum over the generated inputs only"));
            Ok(Collected {
                summary: format!(
                    "env_min={:.6} q_star={:.6} inputs={} (surrogate: min over generated inputs)",
                    est.minimum,
                    est.q_star,
                    est.per_input.len()
                ),
                files: vec![path],
                aggregates,
                runs: Vec::new(),
            })
        }
        Command::Claim1 => {
            let spec = synthetic_for(cfg)?;
            let mut rng = rng_from_seed(substream(master, EXPERIMENT_STREAM));
            let report = claim1_check(
                &spec.functional,
                spec.family.distribution(),
                cfg.samples,
                cfg.seeds,
                &mut rng,
            )?;
            let path = out.join("claim1.csv");
            let dist = cfg.distribution().to_string();
            output::write_claim1(&path, &dist, &report)?;
            let passed = report.passed(1e-9);
            aggregates.insert("passed".into(), json!(passed));
            aggregates.insert("max_residual".into(), json!(report.max_residual));
            aggregates.insert("max_phase_defect".into(), json!(report.max_phase_defect));
            let mut summary = format!(
                "claim1={} max_residual={:.3e} max_phase_defect={:.3e}",
                if passed { "pass" } else { "fail" },
                report.max_residual,
                report.max_phase_defect
            );
            if let Some(v) = &report.violation {
                summary.push_str(&format!(" violation: {v}"));
            }
            Ok(Collected {
                summary,
                files: vec![path],
                aggregates,
                runs: Vec::new(),
            })
        }
        Command::Collapse => {
            let spec = synthetic_for(cfg)?;
            let n = cfg.n;
            let report = collapse_test(&spec, |rng| synthetic_input(n, rng), cfg.offset(), cfg.seeds, master)?;
            let path = out.join("collapse.csv");
            output::write_collapse(&path, &report)?;
            let total = report.runs.len();
            let agree = (report.agreement_rate() * total as f64).round() as usize;
            aggregates.insert("agreement_rate".into(), json!(report.agreement_rate()));
            aggregates.insert("max_margin_delta".into(), json!(report.max_margin_delta()));
            Ok(Collected {
                summary: format!(
                    "agreement={agree}/{total} full_accept={} two_round_accept={} max_margin_delta={:.3e}",
                    report.full_accepts(),
                    report.two_round_accepts(),
                    report.max_margin_delta()
                ),
                files: vec![path],
                aggregates,
                runs: Vec::new(),
            })
        }
        Command::Probe => {
            let spec = synthetic_for(cfg)?;
            let probes = cfg
                .alphas
                .iter()
                .enumerate()
                .map(|(i, &alpha)| {
                    let mut rng = rng_from_seed(substream(derive_seed(master, i as u64), EXPERIMENT_STREAM));
                    stability_probe(&spec.functional, spec.family.distribution(), alpha, cfg.samples, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let path = out.join("probe.csv");
            output::write_probe(&path, &cfg.distribution().to_string(), &probes)?;
            aggregates.insert(
                "probabilities".into(),
                json!(probes.iter().map(|p| p.probability).collect::<Vec<_>>()),
            );
            let summary = probes
                .iter()
                .map(|p| {
                    format!(
                        "alpha={:e} probability={:.4}±{:.4} gap={:.3e}",
                        p.alpha, p.probability, p.std_err, p.gap
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            Ok(Collected {
                summary,
                files: vec![path],
                aggregates,
                runs: Vec::new(),
            })
        }
        Command::Band => {
            let report = band_experiment(cfg.n, cfg.offset())?;
            let files = vec![out.join("band.csv"), out.join("transcripts.jsonl")];
            output::write_band(&files[0], &report)?;
            output::write_transcripts(&files[1], &[&report.transcript])?;
            aggregates.insert("closed_form".into(), json!(report.closed_form));
            aggregates.insert("measured".into(), json!(report.measured));
            let verdict = |a: bool| if a { "accept" } else { "reject" };
            Ok(Collected {
                summary: format!(
                    "closed_form={:.12} measured={:.12} abs_error={:.3e} tight(0.1)={} loose(0.5)={}",
                    report.closed_form,
                    report.measured,
                    (report.measured - report.closed_form).abs(),
                    verdict(report.accepted_tight),
                    verdict(report.accepted_loose)
                ),
                files,
                aggregates,
                runs: Vec::new(),
            })
        }
    }
}

/// Run the configured experiment, writing its files into `out_dir`.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let c = run_command(cfg, out_dir)?;
    let mut files = c.files;
    let record_path = out_dir.join("record.json");
    let record = RunRecord {
        tool_version: output::TOOL_VERSION.into(),
        config_hash: cfg.hash(),
        config: serde_json::from_str(&cfg.canonical_text())?,
        wall_time_s: start.elapsed().as_secs_f64(),
        summary: c.summary.clone(),
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        aggregates: c.aggregates,
        runs: c.runs,
    };
    output::write_record(&record_path, &record)?;
    files.push(record_path);
    Ok(RunOutput {
        summary: c.summary,
        files,
        record,
    })
}
