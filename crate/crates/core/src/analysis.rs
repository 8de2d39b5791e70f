//! Experiments on ILSCC instances: expected-next-value estimates, error decay
//! under the generic cheat, shrinkage statistics, stability checks, the
//! two-round collapse and the constant-factor band example.
//!
//! Batch experiments fan out over run indices with rayon. Run `i` uses
//! `derive_seed(master, i)`; its input comes from sub-stream 0 of that seed
//! and the verifier's coins from sub-stream 1. Results are collected in run
//! order, so aggregates do not depend on thread scheduling.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adversaries::{AgCheatProver, ErrorLedger, GenericCheatProver, ReplayProver};
use crate::circuit::{random_circuit, Circuit, GateSet};
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};
use crate::protocol::{
    run_protocol, run_two_round, synthetic_spec, AgChallenge, AgFamily, Family, Functional,
    Precision, Prover, ProtocolSpec,
    ScaleDistribution, SyntheticInput, Transcript, TransformationDistribution,
};
use crate::seeding::{derive_seed, rng_from_seed, substream, Rng};

pub const INPUT_STREAM: u64 = 0;
pub const VERIFIER_STREAM: u64 = 1;

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Gaussian `k x k` matrix scaled to unit Frobenius norm.
pub fn random_unit_matrix(k: usize, rng: &mut Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(k, k, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = g.frobenius_norm();
    g.scale(C64::new(1.0 / norm, 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputEstimate {
    pub input: usize,
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Estimate of the expected next value over a benchmark set of inputs.
///
/// `minimum` is taken over the supplied inputs only, so it is an upper-bound
/// surrogate for the minimum over all inputs of size `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvEstimate {
    pub spec: String,
    pub q_star: f64,
    pub per_input: Vec<InputEstimate>,
    pub minimum: f64,
}

/// Mean of `|F(T_i(Q*))|` over rounds `1..=T` and `samples_per_round` draws
/// per round, for each input.
pub fn estimate_env<F: Family>(
    spec: &ProtocolSpec<F>,
    inputs: &[F::Input],
    samples_per_round: usize,
    rng: &mut Rng,
) -> Result<EnvEstimate> {
    if inputs.is_empty() {
        return Err(Error::Parameter("need at least one input".into()));
    }
    if samples_per_round == 0 {
        return Err(Error::Parameter("need at least one sample per round".into()));
    }
    let f = &spec.functional;
    let mut per_input = Vec::with_capacity(inputs.len());
    for (idx, x) in inputs.iter().enumerate() {
        let rounds = spec.family.rounds(x);
        let mut values = Vec::with_capacity(rounds * samples_per_round);
        for i in 1..=rounds {
            for _ in 0..samples_per_round {
                let ch = spec.family.sample_challenge(x, i, rng);
                let t = crate::protocol::Challenge::transformation(&ch);
                values.push(f.apply(&t.apply(f.maximizer())?)?.norm());
            }
        }
        let (mean, std_err) = mean_and_stderr(&values);
        per_input.push(InputEstimate {
            input: idx,
            mean,
            std_err,
            samples: values.len(),
        });
    }
    let minimum = per_input.iter().map(|e| e.mean).fold(f64::INFINITY, f64::min);
    Ok(EnvEstimate {
        spec: spec.family.name(),
        q_star: f.q_star(),
        per_input,
        minimum,
    })
}

/// Honest runs: for run `i`, the input from sub-stream 0 of
/// `derive_seed(master, i)` and the claim `C(x)`.
pub fn honest_batch<F, G>(
    spec: &ProtocolSpec<F>,
    make_input: G,
    seeds: usize,
    master_seed: u64,
) -> Result<Vec<Transcript>>
where
    F: Family,
    F::Input: Send,
    G: Fn(&mut Rng) -> Result<F::Input> + Sync,
{
    (0..seeds)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(master_seed, index as u64);
            let x = make_input(&mut rng_from_seed(substream(seed, INPUT_STREAM)))?;
            let claimed = spec
                .family
                .evaluate(&x)
                .ok_or_else(|| Error::Unsupported("honest runs need C(x)".into()))?;
            let mut prover = spec.honest_prover(&x);
            let mut rng = rng_from_seed(substream(seed, VERIFIER_STREAM));
            Ok(run_protocol(spec, &x, claimed, &mut prover, &mut rng, seed))
        })
        .collect()
}

/// One cheat run of a decay experiment.
#[derive(Clone, Debug)]
pub struct DecayRun {
    pub index: usize,
    pub seed: u64,
    pub transcript: Transcript,
    /// `|δ_i|` for `i = 0..=T`.
    pub abs_deltas: Vec<f64>,
    /// Least-squares slope of `ln|δ_i|` against `i`, over nonzero entries.
    pub slope: Option<f64>,
    /// `|δ_i| ≤ |δ_{i−1}|·(1 + 1e-9)` throughout.
    pub monotone: bool,
}

impl DecayRun {
    pub fn ratio(&self) -> f64 {
        match (self.abs_deltas.first(), self.abs_deltas.last()) {
            (Some(&d0), Some(&dt)) if d0 > 0.0 => dt / d0,
            _ => f64::NAN,
        }
    }

    pub fn ledger(&self) -> &ErrorLedger {
        self.transcript
            .ledger
            .as_ref()
            .expect("cheat transcripts carry a ledger")
    }
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    pub tolerance: f64,
    pub runs: Vec<DecayRun>,
}

impl DecayReport {
    pub fn acceptance_fraction(&self) -> f64 {
        self.runs.iter().filter(|r| r.transcript.accepted()).count() as f64 / self.runs.len() as f64
    }

    /// Fraction of runs with `|δ_T| < threshold·|δ_0|`.
    pub fn fraction_ratio_below(&self, threshold: f64) -> f64 {
        self.runs.iter().filter(|r| r.ratio() < threshold).count() as f64 / self.runs.len() as f64
    }

    pub fn median_ratio(&self) -> f64 {
        median(&sorted(self.runs.iter().map(DecayRun::ratio).collect()))
    }

    pub fn all_monotone(&self) -> bool {
        self.runs.iter().all(|r| r.monotone)
    }

    pub fn ledgers(&self) -> Vec<ErrorLedger> {
        self.runs.iter().map(|r| r.ledger().clone()).collect()
    }
}

fn log_slope(series: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0.0)
        .map(|(i, &d)| (i as f64, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

type CheatFactory<F> = for<'a> fn(
    &'a ProtocolSpec<F>,
    &'a <F as Family>::Input,
    C64,
) -> Result<Box<dyn Prover<<F as Family>::Challenge> + 'a>>;

fn cheat_runs<F, G>(
    spec: &ProtocolSpec<F>,
    make_input: G,
    offset: f64,
    seeds: usize,
    master_seed: u64,
    make_prover: CheatFactory<F>,
) -> Result<DecayReport>
where
    F: Family,
    F::Input: Send,
    G: Fn(&mut Rng) -> Result<F::Input> + Sync,
{
    if offset == 0.0 {
        return Err(Error::Parameter("cheat offset must be nonzero".into()));
    }
    if seeds == 0 {
        return Err(Error::Parameter("need at least one seed".into()));
    }
    let runs = (0..seeds)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(master_seed, index as u64);
            let x = make_input(&mut rng_from_seed(substream(seed, INPUT_STREAM)))?;
            let value = spec
                .family
                .evaluate(&x)
                .ok_or_else(|| Error::Unsupported("cheat runs need C(x)".into()))?;
            let claimed = value + C64::new(offset, 0.0);
            let mut prover = make_prover(spec, &x, claimed)?;
            let mut rng = rng_from_seed(substream(seed, VERIFIER_STREAM));
            let transcript = run_protocol(spec, &x, claimed, &mut prover, &mut rng, seed);
            let abs_deltas: Vec<f64> = transcript
                .ledger
                .as_ref()
                .map(|l| l.deltas().map(|d| d.norm()).collect())
                .unwrap_or_default();
            let monotone = abs_deltas.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
            Ok(DecayRun {
                index,
                seed,
                slope: log_slope(&abs_deltas),
                abs_deltas,
                monotone,
                transcript,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayReport {
        tolerance: spec.mu_hat(runs[0].transcript.n)?,
        runs,
    })
}

/// Run the generic cheat against `(x, C(x) + offset)` for `seeds` runs, with
/// final tolerance `μ̂ = μ(n)·C_max` from `precision`.
pub fn decay_experiment<F, G>(
    spec: &ProtocolSpec<F>,
    make_input: G,
    offset: f64,
    seeds: usize,
    master_seed: u64,
    precision: Precision,
) -> Result<DecayReport>
where
    F: Family,
    F::Input: Send,
    G: Fn(&mut Rng) -> Result<F::Input> + Sync,
{
    fn generic<'a, F: Family>(
        spec: &'a ProtocolSpec<F>,
        x: &'a F::Input,
        claimed: C64,
    ) -> Result<Box<dyn Prover<F::Challenge> + 'a>> {
        Ok(Box::new(GenericCheatProver::new(spec, x, claimed)?))
    }
    let spec = spec.with_precision(precision);
    cheat_runs(&spec, make_input, offset, seeds, master_seed, generic::<F>)
}

/// The AG-specific cheat (`Δ_i = (δ_i/8)·I`) on random circuits from
/// `gate_set`, at the spec's own precision.
pub fn ag_cheat_experiment(
    spec: &ProtocolSpec<AgFamily>,
    gate_set: &GateSet,
    offset: f64,
    seeds: usize,
    master_seed: u64,
) -> Result<DecayReport> {
    fn ag<'a>(
        _spec: &'a ProtocolSpec<AgFamily>,
        x: &'a Circuit,
        claimed: C64,
    ) -> Result<Box<dyn Prover<AgChallenge> + 'a>> {
        Ok(Box::new(AgCheatProver::new(x, claimed)))
    }
    let (n, t) = spec.family.expected_shape();
    cheat_runs(
        spec,
        |rng| random_circuit(n, t, gate_set, rng),
        offset,
        seeds,
        master_seed,
        ag,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkageSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub epsilon: f64,
    /// Fraction of rounds with `S_i ≤ 1 − ε/4`.
    pub fraction_shrinking: f64,
    /// Bins over `[0, 1]`; values above 1 land in the last bin.
    pub histogram: Vec<HistogramBin>,
    /// Per-run `Π S_i`.
    pub products: Vec<f64>,
    /// Largest `|Π S_i − |δ_T/δ_0|| / |δ_T/δ_0|` over runs with a full shrinkage series.
    pub max_product_rel_error: f64,
}

pub fn shrinkage_stats(ledgers: &[ErrorLedger], epsilon: f64, bins: usize) -> Result<ShrinkageSummary> {
    if bins == 0 {
        return Err(Error::Parameter("need at least one histogram bin".into()));
    }
    let all: Vec<f64> = ledgers.iter().flat_map(|l| l.shrinkages()).collect();
    if all.is_empty() {
        return Err(Error::Parameter("no shrinkage values in the ledgers".into()));
    }
    let (mean, _) = mean_and_stderr(&all);
    let cut = 1.0 - epsilon / 4.0;
    let fraction_shrinking = all.iter().filter(|&&s| s <= cut).count() as f64 / all.len() as f64;
    let width = 1.0 / bins as f64;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: b as f64 * width,
            hi: (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &s in &all {
        let b = ((s / width) as usize).min(bins - 1);
        histogram[b].count += 1;
    }
    let mut products = Vec::new();
    let mut max_product_rel_error: f64 = 0.0;
    for l in ledgers {
        let rows = l.rows();
        if rows.len() < 2 || rows[1..].iter().any(|r| r.shrinkage.is_none()) {
            continue;
        }
        let product: f64 = l.shrinkages().product();
        let ratio = l.last_delta().unwrap().norm() / l.first_delta().unwrap().norm();
        products.push(product);
        if ratio > 0.0 {
            max_product_rel_error = max_product_rel_error.max((product - ratio).abs() / ratio);
        }
    }
    Ok(ShrinkageSummary {
        count: all.len(),
        mean,
        median: median(&sorted(all)),
        epsilon,
        fraction_shrinking,
        histogram,
        products,
        max_product_rel_error,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Claim1Report {
    pub trials: usize,
    pub samples: usize,
    /// Largest `||λ| − 1|`.
    pub max_phase_defect: f64,
    /// Largest `|F(A) − conj(λ)·F(T(A))|` over sampled `T` and `A`.
    pub max_residual: f64,
    /// Set when a sampled `T` shrinks `Q*`, i.e. the distribution is not
    /// stability-preserving.
    pub violation: Option<String>,
}

impl Claim1Report {
    pub fn passed(&self, tol: f64) -> bool {
        self.violation.is_none() && self.max_phase_defect <= 1e-10 && self.max_residual <= tol
    }
}

/// For each sampled `T`: `λ = F(T(Q*))/q*` must have modulus one and
/// `F(A) = conj(λ)·F(T(A))` must hold for `samples` random `A`.
///
/// `conj(λ)` is the phase written `λ(T)` in the stability identity
/// `F(A) = λ(T)·F(T(A))`; the eigenvalue of `T` on `Q*` is its conjugate.
pub fn claim1_check(
    functional: &Functional,
    distribution: &dyn TransformationDistribution,
    samples: usize,
    trials: usize,
    rng: &mut Rng,
) -> Result<Claim1Report> {
    let k = functional.dimension();
    let q = functional.q_star();
    let mut report = Claim1Report {
        trials,
        samples,
        max_phase_defect: 0.0,
        max_residual: 0.0,
        violation: None,
    };
    for trial in 0..trials {
        let t = distribution.sample(trial + 1, rng);
        let image = functional.apply(&t.apply(functional.maximizer())?)?;
        if image.norm() < q * (1.0 - 1e-9) {
            report.violation = Some(format!(
                "trial {trial}: |F(T(Q*))| = {} < q* = {q}",
                image.norm()
            ));
            return Ok(report);
        }
        let lambda = image / q;
        report.max_phase_defect = report.max_phase_defect.max((lambda.norm() - 1.0).abs());
        for _ in 0..samples {
            let a = ComplexMatrix::from_fn(k, k, |_, _| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let lhs = functional.apply(&a)?;
            let rhs = lambda.conj() * functional.apply(&t.apply(&a)?)?;
            report.max_residual = report.max_residual.max((lhs - rhs).norm());
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseRun {
    pub seed: u64,
    pub full_accepted: bool,
    pub two_round_accepted: bool,
    /// `|margin_full − margin_two|` on the final check when both reached it.
    pub final_margin_delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseReport {
    pub runs: Vec<CollapseRun>,
}

impl CollapseReport {
    pub fn agreement_rate(&self) -> f64 {
        self.runs
            .iter()
            .filter(|r| r.full_accepted == r.two_round_accepted)
            .count() as f64
            / self.runs.len() as f64
    }

    pub fn full_accepts(&self) -> usize {
        self.runs.iter().filter(|r| r.full_accepted).count()
    }

    pub fn two_round_accepts(&self) -> usize {
        self.runs.iter().filter(|r| r.two_round_accepted).count()
    }

    pub fn max_margin_delta(&self) -> f64 {
        self.runs
            .iter()
            .filter_map(|r| r.final_margin_delta)
            .fold(0.0, f64::max)
    }
}

/// Replay prover against the full `T`-round verifier and against the
/// two-round protocol, on matched verifier seeds, with claim `C(x) + offset`.
pub fn collapse_test<F, G>(
    spec: &ProtocolSpec<F>,
    make_input: G,
    offset: f64,
    seeds: usize,
    master_seed: u64,
) -> Result<CollapseReport>
where
    F: Family,
    F::Input: Send,
    G: Fn(&mut Rng) -> Result<F::Input> + Sync,
{
    let runs = (0..seeds)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(master_seed, index as u64);
            let x = make_input(&mut rng_from_seed(substream(seed, INPUT_STREAM)))?;
            let value = spec
                .family
                .evaluate(&x)
                .ok_or_else(|| Error::Unsupported("collapse test needs C(x)".into()))?;
            let claimed = value + C64::new(offset, 0.0);
            let verifier_seed = substream(seed, VERIFIER_STREAM);

            let mut replay = ReplayProver::new(spec, &x);
            let full = run_protocol(
                spec,
                &x,
                claimed,
                &mut replay,
                &mut rng_from_seed(verifier_seed),
                seed,
            );
            let mut replay = ReplayProver::new(spec, &x);
            let two = run_two_round(spec, &x, claimed, &mut replay, &mut rng_from_seed(verifier_seed))?;
            let final_margin_delta = match (&full.final_check, &two.final_check) {
                (Some(a), Some(b)) => Some((a.margin - b.margin).abs()),
                _ => None,
            };
            Ok(CollapseRun {
                seed,
                full_accepted: full.accepted(),
                two_round_accepted: two.decision.accepted(),
                final_margin_delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CollapseReport { runs })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeEstimate {
    pub alpha: f64,
    pub samples: usize,
    /// Empirical `Pr[|F(A) − F(T(A))| ≤ alpha]`.
    pub probability: f64,
    pub std_err: f64,
    /// Empirical `1 − E|F(T(Q*))| / q*`.
    pub gap: f64,
}

/// Stability probability over sampled `T` and random unit-norm `A`.
pub fn stability_probe(
    functional: &Functional,
    distribution: &dyn TransformationDistribution,
    alpha: f64,
    samples: usize,
    rng: &mut Rng,
) -> Result<ProbeEstimate> {
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let k = functional.dimension();
    let mut hits = 0usize;
    let mut next_values = 0.0;
    for s in 0..samples {
        let t = distribution.sample(s + 1, rng);
        let a = random_unit_matrix(k, rng);
        let diff = functional.apply(&a)? - functional.apply(&t.apply(&a)?)?;
        if diff.norm() <= alpha {
            hits += 1;
        }
        next_values += functional.stability_factor(&t)?.norm();
    }
    let p = hits as f64 / samples as f64;
    Ok(ProbeEstimate {
        alpha,
        samples,
        probability: p,
        std_err: (p * (1.0 - p) / samples as f64).sqrt(),
        gap: 1.0 - next_values / samples as f64,
    })
}

#[derive(Clone, Debug)]
pub struct BandReport {
    pub n: usize,
    /// `(1 − 1/n)^n`.
    pub closed_form: f64,
    /// `|δ_T / δ_0|` from the cheat run.
    pub measured: f64,
    pub delta0: f64,
    /// Decision at final tolerance `0.1·|δ_0|`.
    pub accepted_tight: bool,
    /// Decision at final tolerance `0.5·|δ_0|`.
    pub accepted_loose: bool,
    pub transcript: Transcript,
}

/// The constant-factor band example: `T(Q*) = (1 − 1/n)·Q*` deterministically
/// with `T = n` rounds, attacked by the generic cheat with claim offset
/// `offset`.
pub fn band_experiment(n: usize, offset: f64) -> Result<BandReport> {
    if n < 2 {
        return Err(Error::Parameter(format!("band example needs n >= 2, got {n}")));
    }
    if offset == 0.0 {
        return Err(Error::Parameter("cheat offset must be nonzero".into()));
    }
    let factor = 1.0 - 1.0 / n as f64;
    let functional = Functional::trace(8);
    let base = synthetic_spec(
        functional,
        Box::new(ScaleDistribution::new(C64::new(factor, 0.0))?),
        n,
        1.0,
        Precision::Absolute(1.0),
    )?;
    let x = SyntheticInput {
        n,
        m0: ComplexMatrix::identity(8).scale(C64::new(1.0 / 8.0, 0.0)),
    };
    let claimed = base.family.evaluate(&x).expect("synthetic inputs evaluate") + C64::new(offset, 0.0);
    let delta0 = offset.abs();
    let run = |mu: f64| -> Result<Transcript> {
        let spec = base.with_precision(Precision::Absolute(mu));
        let mut prover = GenericCheatProver::new(&spec, &x, claimed)?;
        Ok(run_protocol(&spec, &x, claimed, &mut prover, &mut rng_from_seed(0), 0))
    };
    let tight = run(0.1 * delta0)?;
    let loose = run(0.5 * delta0)?;
    let ledger = tight.ledger.as_ref().expect("cheat ledger");
    let measured = ledger.last_delta().unwrap().norm() / ledger.first_delta().unwrap().norm();
    Ok(BandReport {
        n,
        closed_form: factor.powi(n as i32),
        measured,
        delta0,
        accepted_tight: tight.accepted(),
        accepted_loose: loose.accepted(),
        transcript: tight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{IdentityDistribution, PhaseDistribution, Transformation};

    #[test]
    fn slope_of_geometric_series() {
        let series: Vec<f64> = (0..10).map(|i| 0.5f64.powi(i)).collect();
        assert!((log_slope(&series).unwrap() - 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(log_slope(&[1.0]), None);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }

    #[test]
    fn probe_rejects_bad_alpha() {
        let f = Functional::trace(8);
        let r = stability_probe(&f, &IdentityDistribution, 0.0, 10, &mut rng_from_seed(1));
        assert!(r.is_err());
    }

    #[test]
    fn identity_probe_is_certain() {
        let f = Functional::trace(8);
        let p = stability_probe(&f, &IdentityDistribution, 1e-9, 500, &mut rng_from_seed(1)).unwrap();
        assert_eq!(p.probability, 1.0);
        assert!(p.gap.abs() < 1e-15);
    }

    #[test]
    fn claim1_flags_shrinking_distribution() {
        let f = Functional::trace(8);
        let d = ScaleDistribution::new(C64::new(0.5, 0.0)).unwrap();
        let r = claim1_check(&f, &d, 10, 3, &mut rng_from_seed(2)).unwrap();
        assert!(r.violation.is_some());
        assert!(!r.passed(1e-9));
    }

    #[test]
    fn claim1_phase_convention() {
        let f = Functional::trace(8);
        let lambda = C64::from_polar(1.0, std::f64::consts::PI / 3.0);
        let d = ScaleDistribution::new(lambda).unwrap();
        let r = claim1_check(&f, &d, 50, 2, &mut rng_from_seed(3)).unwrap();
        assert!(r.passed(1e-9));
        let r = claim1_check(&f, &PhaseDistribution, 50, 20, &mut rng_from_seed(3)).unwrap();
        assert!(r.passed(1e-9));
        assert!((f.stability_factor(&Transformation::Scale(lambda)).unwrap() - lambda).norm() < 1e-15);
    }

    #[test]
    fn env_needs_inputs() {
        let spec = crate::protocol::ag_spec(4, 2, 0.1).unwrap();
        assert!(estimate_env(&spec, &[], 1, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn band_closed_form_small() {
        let r = band_experiment(4, 0.5).unwrap();
        assert!((r.measured - 0.75f64.powi(4)).abs() < 1e-12);
    }
}
