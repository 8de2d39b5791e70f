//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use lscc::adversaries::ReplayProver;
use lscc::analysis::{
    ag_cheat_experiment, band_experiment, claim1_check, collapse_test, honest_batch,
    random_unit_matrix, stability_probe,
};
use lscc::circuit::{random_circuit, GateSet, ProverState, RoundUnitary};
use lscc::harness::config::{Command, Distribution, ExperimentConfig, Mu};
use lscc::harness::{execute, synthetic_for, synthetic_input};
use lscc::protocol::{ag_spec, run_protocol, Decision, Functional, ScaleDistribution, Transcript};
use lscc::seeding::{derive_seed, rng_from_seed, substream};
use lscc::C64;
use rand::Rng as _;

const MASTER: u64 = 1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn report(id: usize, name: &str, v: &Verdict) {
    println!(
        "criterion {id:>2} [{}] {name}: {}",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail
    );
}

/// Criteria 1 and 2 share the same honest runs.
fn completeness_and_identities() -> (Verdict, Verdict) {
    let start = Instant::now();
    let mut total = 0;
    let mut accepted = 0;
    let mut max_round: f64 = 0.0;
    let mut max_final: f64 = 0.0;
    let mut identity_fail = 0;
    for n in [3, 4, 5, 6] {
        for t in [10, 30, 60] {
            let spec = ag_spec(n, t, 1e-6).unwrap();
            let runs = honest_batch(&spec, |rng| random_circuit(n, t, &GateSet::Haar3, rng), 1000, MASTER).unwrap();
            for r in &runs {
                total += 1;
                accepted += r.accepted() as usize;
                max_round = max_round.max(r.max_round_margin());
                let fin = r.final_check.map_or(f64::INFINITY, |c| c.margin);
                max_final = max_final.max(fin);
                if r.rounds.len() != t + 1 || r.max_round_margin() > 1e-9 || fin > 1e-9 {
                    identity_fail += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let c1 = verdict(
        accepted == total && max_round <= 1e-9 && secs < 30.0,
        format!(
            "accept {accepted}/{total} (need 100%), max round margin {max_round:.2e} (need ≤ 1e-9), {secs:.1} s (target < 30 s)"
        ),
    );
    let c2 = verdict(
        identity_fail == 0,
        format!(
            "runs with a broken identity {identity_fail}/{total}; max round margin {max_round:.2e}, max |tr(M_T) − final value| {max_final:.2e} (need ≤ 1e-9)"
        ),
    );
    (c1, c2)
}

fn oracle_equivalence() -> Verdict {
    let mut rng = rng_from_seed(substream(MASTER, 3));
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(3..=5);
        let t = rng.random_range(1..=8);
        let round = rng.random_range(0..=t);
        let c = random_circuit(n, t, &GateSet::Haar3, &mut rng).unwrap();
        let us: Vec<RoundUnitary> = (1..=t)
            .map(|i| RoundUnitary::sample(c.gate(i).support().clone(), &mut rng))
            .collect();
        let mut state = ProverState::new(&c);
        for u in &us[..round] {
            state.advance(u).unwrap();
        }
        let want = common::dense_honest_message(&c, &us, round);
        worst = worst.max(state.message().max_abs_diff(&want).unwrap());
    }
    verdict(worst <= 1e-10, format!("50 (circuit, round) pairs, max entry error {worst:.2e} (need ≤ 1e-10)"))
}

fn cheat_at_inverse_poly() -> Verdict {
    let spec = ag_spec(4, 60, 1.0 / 16.0).unwrap();
    let r = ag_cheat_experiment(&spec, &GateSet::Haar3, 2.0 / 3.0, 500, MASTER).unwrap();
    let acc = r.acceptance_fraction();
    let small = r.fraction_ratio_below(1e-3);
    verdict(
        acc >= 0.9 && small >= 0.95,
        format!(
            "n=4 T=60 μ=1/16 offset 2/3, 500 seeds: acceptance {acc:.3} (need ≥ 0.9), |δ_T| < 1e-3·|δ_0| in {small:.3} (need ≥ 0.95), median |δ_T/δ_0| {:.2e}",
            r.median_ratio()
        ),
    )
}

fn cheat_at_tight_tolerance() -> Verdict {
    let spec = ag_spec(4, 10, 1e-12).unwrap();
    let r = ag_cheat_experiment(&spec, &GateSet::Haar3, 2.0 / 3.0, 500, MASTER).unwrap();
    let acc = r.acceptance_fraction();
    let transcripts: Vec<&Transcript> = r.runs.iter().map(|d| &d.transcript).collect();
    let max_margin = transcripts.iter().map(|t| t.max_round_margin()).fold(0.0, f64::max);
    let only_final = transcripts
        .iter()
        .all(|t| matches!(t.decision, Decision::Accept | Decision::RejectFinal));
    let (lo, hi) = wilson_95(acc, r.runs.len());
    verdict(
        acc <= 0.05 && max_margin <= 1e-9 && only_final,
        format!(
            "n=4 T=10 μ̂=1e-12, 500 seeds: acceptance {acc:.3} [95% CI {lo:.3}, {hi:.3}] (need ≤ 0.05), max intermediate margin {max_margin:.2e} (need ≤ 1e-9), rejections only at final check: {only_final}"
        ),
    )
}

fn wilson_95(p: f64, n: usize) -> (f64, f64) {
    let z = 1.96;
    let n = n as f64;
    let centre = (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / (1.0 + z * z / n);
    (centre - half, centre + half)
}

fn extremality() -> Verdict {
    let f = Functional::trace(8);
    let q = f.q_star();
    let mut rng = rng_from_seed(substream(MASTER, 6));
    let worst = (0..10_000)
        .map(|_| f.apply(&random_unit_matrix(8, &mut rng)).unwrap().norm())
        .fold(0.0, f64::max);
    let q_err = (q - 8f64.sqrt()).abs();
    verdict(
        q_err <= 1e-12 && worst <= q + 1e-10,
        format!("|q* − √8| = {q_err:.1e} (need ≤ 1e-12); max |F(Q)| over 10⁴ unit Q = {worst:.6} ≤ q* + 1e-10 = {:.6}", q + 1e-10),
    )
}

fn collapse() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for dist in [Distribution::Identity, Distribution::Phase, Distribution::Block(0.5)] {
        let mut cfg = ExperimentConfig::new(Command::Collapse);
        cfg.distribution = Some(dist);
        cfg.t = 20;
        cfg.mu = Mu::Absolute(1e-9);
        cfg.master_seed = MASTER;
        let spec = synthetic_for(&cfg).unwrap();
        let mut rng = rng_from_seed(substream(MASTER, 7));
        let c1 = claim1_check(&spec.functional, spec.family.distribution(), 1000, 10, &mut rng).unwrap();
        let mut replay_accepts = 0;
        for i in 0..100 {
            let seed = derive_seed(MASTER, i);
            let x = synthetic_input(cfg.n, &mut rng_from_seed(substream(seed, 0))).unwrap();
            let claimed = spec.functional.apply(&x.m0).unwrap();
            let mut prover = ReplayProver::new(&spec, &x);
            let tr = run_protocol(&spec, &x, claimed, &mut prover, &mut rng_from_seed(substream(seed, 1)), seed);
            replay_accepts += tr.accepted() as usize;
        }
        let n = cfg.n;
        let honest = collapse_test(&spec, |rng| synthetic_input(n, rng), 0.0, 100, MASTER).unwrap();
        let off = collapse_test(&spec, |rng| synthetic_input(n, rng), 0.5, 100, MASTER).unwrap();
        let ok = c1.passed(1e-9)
            && replay_accepts == 100
            && honest.agreement_rate() == 1.0
            && off.agreement_rate() == 1.0
            && off.full_accepts() == 0;
        pass &= ok;
        parts.push(format!(
            "{dist}: claim1 residual {:.1e} replay {replay_accepts}/100 agreement {:.0}%/{:.0}% (honest/offset 0.5)",
            c1.max_residual,
            100.0 * honest.agreement_rate(),
            100.0 * off.agreement_rate()
        ));
    }
    verdict(pass, format!("{} (need residual ≤ 1e-9, 100/100, 100%)", parts.join("; ")))
}

fn band() -> Verdict {
    let r = band_experiment(20, 2.0 / 3.0).unwrap();
    let err = (r.measured - r.closed_form).abs();
    verdict(
        err <= 1e-9 && !r.accepted_tight && r.accepted_loose,
        format!(
            "|δ_T/δ_0| = {:.12} vs (1−1/20)^20 = {:.12}, error {err:.1e} (need ≤ 1e-9); μ̂ = 0.1|δ_0| {}, μ̂ = 0.5|δ_0| {} (need reject, accept)",
            r.measured,
            r.closed_form,
            if r.accepted_tight { "accepts" } else { "rejects" },
            if r.accepted_loose { "accepts" } else { "rejects" }
        ),
    )
}

fn stability_probe_criterion() -> Verdict {
    let f = Functional::trace(8);
    let probs: Vec<f64> = [1e-2, 1e-4, 1e-6]
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let d = ScaleDistribution::new(C64::new(1.0 - g, 0.0)).unwrap();
            let mut rng = rng_from_seed(substream(MASTER, 90 + i as u64));
            stability_probe(&f, &d, 1e-3, 10_000, &mut rng).unwrap().probability
        })
        .collect();
    let monotone = probs.windows(2).all(|w| w[1] >= w[0]);
    verdict(
        monotone && probs[2] == 1.0,
        format!(
            "α = 1e-3, 10⁴ samples: g = 1e-2 → {:.4}, 1e-4 → {:.4}, 1e-6 → {:.4} (need nondecreasing, last = 1)",
            probs[0], probs[1], probs[2]
        ),
    )
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|f| f != "record.json")
        .collect();
    names.sort();
    for f in &names {
        if fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).map_err(|e| e.to_string())? {
            return Err(format!("{} differs", f.to_string_lossy()));
        }
    }
    Ok(names.len())
}

fn determinism() -> Verdict {
    let mut configs = Vec::new();
    let mut honest = ExperimentConfig::new(Command::Honest);
    honest.t = 30;
    honest.seeds = 1000;
    configs.push(honest);
    for (t, mu) in [(60, 1.0 / 16.0), (10, 1e-12)] {
        let mut c = ExperimentConfig::new(Command::Cheat);
        c.t = t;
        c.mu = Mu::Absolute(mu);
        c.seeds = 500;
        configs.push(c);
    }
    for d in [Distribution::Identity, Distribution::Phase, Distribution::Block(0.5)] {
        let mut c = ExperimentConfig::new(Command::Collapse);
        c.distribution = Some(d);
        configs.push(c.clone());
        c.command = Command::Claim1;
        c.seeds = 10;
        configs.push(c);
    }
    let mut band = ExperimentConfig::new(Command::Band);
    band.n = 20;
    configs.push(band);
    let mut probe = ExperimentConfig::new(Command::Probe);
    probe.distribution = Some(Distribution::Scale(1.0 - 1e-2));
    probe.samples = 10_000;
    configs.push(probe);

    let mut files = 0;
    for mut cfg in configs {
        cfg.master_seed = MASTER;
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let sa = execute(&cfg, a.path()).unwrap().summary;
        let sb = execute(&cfg, b.path()).unwrap().summary;
        if sa != sb {
            return verdict(false, format!("{} summaries differ", cfg.command.name()));
        }
        match compare_dirs(a.path(), b.path()) {
            Ok(n) => files += n,
            Err(e) => return verdict(false, format!("{}: {e}", cfg.command.name())),
        }
    }
    verdict(true, format!("{files} transcript/CSV files byte-identical across repeated runs"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let (c1, c2) = completeness_and_identities();
    let results = [
        (1, "completeness", c1),
        (2, "consistency identities", c2),
        (3, "oracle equivalence", oracle_equivalence()),
        (4, "cheat succeeds at inverse-poly tolerance", cheat_at_inverse_poly()),
        (5, "cheat fails at tight tolerance", cheat_at_tight_tolerance()),
        (6, "extremality", extremality()),
        (7, "stability identity and two-round collapse", collapse()),
        (8, "constant-factor band", band()),
        (9, "stability probe", stability_probe_criterion()),
        (10, "determinism", determinism()),
    ];
    for (id, name, v) in &results {
        report(*id, name, v);
    }
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
