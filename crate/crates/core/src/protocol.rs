//! Inexact linear-scalar consistency checking (ILSCC).
//!
//! A protocol instance is a [`Family`] (inputs, per-round challenge
//! distribution, the verifier's final value and the honest prover) wrapped in
//! a [`ProtocolSpec`] that fixes the functional, the tolerance and the
//! optional prover-side quantization. [`run_protocol`] plays the verifier
//! against any [`Prover`] and records a [`Transcript`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adversaries::{AgHonestProver, ErrorLedger, SyntheticHonestProver};
use crate::circuit::{self, Circuit, RoundUnitary};
use crate::error::{Error, Result};
use crate::numerics::{approx_eq, ComplexMatrix, C64, ONE};
use crate::seeding::Rng;

/// Slack allowed on norm bounds of constructed transformations.
pub const NORM_TOL: f64 = 1e-9;

/// A linear scalar map `F(A) = <R, A>` given by its Riesz matrix `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct Functional {
    riesz: ComplexMatrix,
    q_star: f64,
    maximizer: ComplexMatrix,
}

impl Functional {
    /// Fails with [`Error::DegenerateFunctional`] for a zero Riesz matrix.
    pub fn new(riesz: ComplexMatrix) -> Result<Self> {
        if !riesz.is_square() {
            return Err(Error::Shape("Riesz matrix must be square".into()));
        }
        let q_star = riesz.frobenius_norm();
        if q_star == 0.0 || !q_star.is_finite() {
            return Err(Error::DegenerateFunctional);
        }
        let maximizer = riesz.scale(C64::new(1.0 / q_star, 0.0));
        Ok(Self {
            riesz,
            q_star,
            maximizer,
        })
    }

    /// The trace on `k x k` matrices (Riesz matrix `I_k`).
    pub fn trace(k: usize) -> Self {
        Self::new(ComplexMatrix::identity(k)).expect("identity is nonzero")
    }

    pub fn dimension(&self) -> usize {
        self.riesz.rows()
    }

    pub fn riesz(&self) -> &ComplexMatrix {
        &self.riesz
    }

    /// `q* = max |F(Q)|` over unit Frobenius norm, which is `‖R‖_F`.
    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    /// `Q* = R / ‖R‖_F`; the phase is the one making `F(Q*) = q*` real positive.
    pub fn maximizer(&self) -> &ComplexMatrix {
        &self.maximizer
    }

    pub fn apply(&self, a: &ComplexMatrix) -> Result<C64> {
        self.riesz.inner(a)
    }

    /// `λ(T) = F(T(Q*)) / q*`.
    pub fn stability_factor(&self, t: &Transformation) -> Result<C64> {
        Ok(self.apply(&t.apply(&self.maximizer)?)? / self.q_star)
    }
}

/// Linear map on `k x k` matrices with operator norm at most one.
#[derive(Clone, Debug, PartialEq)]
pub enum Transformation {
    /// `A ↦ A·u` for unitary `u`.
    RightMultiply(ComplexMatrix),
    /// `A ↦ c·A`, `|c| ≤ 1`.
    Scale(C64),
    /// `A ↦ v·A·v†` for unitary `v`.
    Conjugate(ComplexMatrix),
    /// `vec(A) ↦ D·vec(A)` with column-major `vec` and a `k² x k²` matrix `D`.
    Dense(ComplexMatrix),
}

impl Transformation {
    pub fn identity() -> Self {
        Transformation::Scale(ONE)
    }

    pub fn right_multiply(u: ComplexMatrix) -> Result<Self> {
        if !u.is_unitary(NORM_TOL) {
            return Err(Error::Parameter("right multiplier is not unitary".into()));
        }
        Ok(Transformation::RightMultiply(u))
    }

    pub fn scale(c: C64) -> Result<Self> {
        if !(c.norm() <= 1.0 + NORM_TOL) {
            return Err(Error::Parameter(format!("scale factor |{c}| exceeds 1")));
        }
        Ok(Transformation::Scale(c))
    }

    pub fn conjugate(v: ComplexMatrix) -> Result<Self> {
        if !v.is_unitary(NORM_TOL) {
            return Err(Error::Parameter("conjugating matrix is not unitary".into()));
        }
        Ok(Transformation::Conjugate(v))
    }

    pub fn dense(d: ComplexMatrix) -> Result<Self> {
        let k = d.rows().isqrt();
        if !d.is_square() || k * k != d.rows() {
            return Err(Error::Shape(format!(
                "dense transformation must be k²xk², got {}x{}",
                d.rows(),
                d.cols()
            )));
        }
        let t = Transformation::Dense(d);
        let norm = t.operator_norm();
        if norm > 1.0 + NORM_TOL {
            return Err(Error::Parameter(format!("operator norm {norm} exceeds 1")));
        }
        Ok(t)
    }

    pub fn apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        match self {
            Transformation::RightMultiply(u) => a.matmul(u),
            Transformation::Scale(c) => Ok(a.scale(*c)),
            Transformation::Conjugate(v) => v.matmul(a)?.matmul(&v.dagger()),
            Transformation::Dense(d) => {
                if d.cols() != a.rows() * a.cols() {
                    return Err(Error::Shape(format!(
                        "dense map of size {} applied to {}x{} matrix",
                        d.cols(),
                        a.rows(),
                        a.cols()
                    )));
                }
                ComplexMatrix::unvectorize(a.rows(), a.cols(), &d.mul_vec(&a.vectorize())?)
            }
        }
    }

    /// Largest singular value of the induced `k² x k²` map.
    pub fn operator_norm(&self) -> f64 {
        match self {
            Transformation::RightMultiply(_) | Transformation::Conjugate(_) => 1.0,
            Transformation::Scale(c) => c.norm(),
            Transformation::Dense(d) => d.spectral_norm(),
        }
    }
}

/// Sampler for the verifier's per-round transformation.
pub trait TransformationDistribution: Send + Sync {
    fn sample(&self, round: usize, rng: &mut Rng) -> Transformation;
    fn tag(&self) -> String;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityDistribution;

impl TransformationDistribution for IdentityDistribution {
    fn sample(&self, _round: usize, _rng: &mut Rng) -> Transformation {
        Transformation::identity()
    }

    fn tag(&self) -> String {
        "identity".into()
    }
}

/// Deterministic `A ↦ c·A` every round.
#[derive(Clone, Copy, Debug)]
pub struct ScaleDistribution {
    factor: C64,
}

impl ScaleDistribution {
    pub fn new(factor: C64) -> Result<Self> {
        Transformation::scale(factor)?;
        Ok(Self { factor })
    }
}

impl TransformationDistribution for ScaleDistribution {
    fn sample(&self, _round: usize, _rng: &mut Rng) -> Transformation {
        Transformation::Scale(self.factor)
    }

    fn tag(&self) -> String {
        format!("scale({},{})", self.factor.re, self.factor.im)
    }
}

/// `A ↦ e^{iθ}·A` with `θ` uniform on `[0, 2π)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PhaseDistribution;

impl TransformationDistribution for PhaseDistribution {
    fn sample(&self, _round: usize, rng: &mut Rng) -> Transformation {
        Transformation::Scale(C64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI))
    }

    fn tag(&self) -> String {
        "phase".into()
    }
}

/// Dense maps that fix the `Q*` direction up to a random phase and act on its
/// orthogonal complement by a random contraction.
///
/// In an orthonormal basis whose first vector is `vec(Q*)`, each sample is
/// `diag(e^{iθ}, L)` with `‖L‖ = contraction`.
pub struct BlockStabilizerDistribution {
    basis: ComplexMatrix,
    contraction: f64,
}

impl BlockStabilizerDistribution {
    pub fn new(functional: &Functional, contraction: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&contraction) {
            return Err(Error::Parameter(format!(
                "contraction must lie in [0, 1], got {contraction}"
            )));
        }
        let e = functional.maximizer().vectorize();
        let dim = e.len();
        let seed = DMatrix::<C64>::from_fn(dim, dim, |r, c| {
            if c == 0 {
                e[r]
            } else {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            }
        });
        // Q's first column is e up to a phase; the rest is orthogonal to e either way.
        let mut basis = ComplexMatrix::from_nalgebra(&seed.qr().q());
        for (r, &v) in e.iter().enumerate() {
            basis[(r, 0)] = v;
        }
        Ok(Self { basis, contraction })
    }
}

impl TransformationDistribution for BlockStabilizerDistribution {
    fn sample(&self, _round: usize, rng: &mut Rng) -> Transformation {
        let dim = self.basis.rows();
        let lambda = C64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
        let g = ComplexMatrix::from_fn(dim - 1, dim - 1, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let lower = g.scale(C64::new(self.contraction / g.spectral_norm(), 0.0));
        let block = ComplexMatrix::from_fn(dim, dim, |r, c| match (r, c) {
            (0, 0) => lambda,
            (0, _) | (_, 0) => C64::new(0.0, 0.0),
            _ => lower[(r - 1, c - 1)],
        });
        let d = self
            .basis
            .matmul(&block)
            .and_then(|m| m.matmul(&self.basis.dagger()))
            .expect("square factors");
        Transformation::Dense(d)
    }

    fn tag(&self) -> String {
        format!("block(contraction={})", self.contraction)
    }
}

/// What the verifier privately samples in a round; exposes the transformation
/// sent to the prover.
pub trait Challenge: Clone + Send + Sync {
    fn transformation(&self) -> &Transformation;
}

impl Challenge for Transformation {
    fn transformation(&self) -> &Transformation {
        self
    }
}

/// The prover's side of a run: one message per round, in round order.
pub trait Prover<C> {
    /// Message `m_round`; `challenge` is `None` exactly at round 0.
    fn respond(&mut self, round: usize, challenge: Option<&C>) -> Result<ComplexMatrix>;

    fn ledger(&self) -> Option<&ErrorLedger> {
        None
    }
}

impl<C, P: Prover<C> + ?Sized> Prover<C> for Box<P> {
    fn respond(&mut self, round: usize, challenge: Option<&C>) -> Result<ComplexMatrix> {
        (**self).respond(round, challenge)
    }

    fn ledger(&self) -> Option<&ErrorLedger> {
        (**self).ledger()
    }
}

/// Prover for the collapsed protocol: `m_0`, then `m_T` after seeing every
/// transformation at once.
pub trait TwoRoundProver<C> {
    fn first(&mut self) -> Result<ComplexMatrix>;
    fn second(&mut self, challenges: &[C]) -> Result<ComplexMatrix>;
}

/// Everything about a protocol instance that depends on the input family.
pub trait Family: Send + Sync {
    type Input: Sync;
    type Challenge: Challenge;

    fn name(&self) -> String;
    /// Matrix dimension `k`.
    fn dimension(&self) -> usize;
    /// Input size `n`.
    fn input_size(&self, x: &Self::Input) -> usize;
    /// Number of consistency rounds `T`.
    fn rounds(&self, x: &Self::Input) -> usize;
    fn sample_challenge(&self, x: &Self::Input, round: usize, rng: &mut Rng) -> Self::Challenge;
    /// The verifier's own value `f(x, T_1..T_T)`.
    fn final_value(&self, x: &Self::Input, challenges: &[Self::Challenge]) -> C64;
    /// `C(x)`, when the family can evaluate it.
    fn evaluate(&self, x: &Self::Input) -> Option<C64>;
    fn honest_prover<'a>(&'a self, x: &'a Self::Input) -> Box<dyn Prover<Self::Challenge> + 'a>;
}

/// Precision `μ(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Absolute(f64),
    /// `1 / n^degree`.
    InversePoly(u32),
}

impl Precision {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            Precision::Absolute(mu) => mu,
            Precision::InversePoly(d) => (n as f64).powi(d as i32).recip(),
        }
    }
}

pub struct ProtocolSpec<F: Family> {
    pub family: Arc<F>,
    pub functional: Functional,
    /// `max_y |C(y)|` over the input family.
    pub c_max: f64,
    pub precision: Precision,
    /// Round every entry of every prover message to this many fractional bits.
    pub bit_quantization: Option<u32>,
    /// Verifier divides out `λ(T_i)` in every round check.
    pub phase_folding: bool,
}

impl<F: Family> Clone for ProtocolSpec<F> {
    fn clone(&self) -> Self {
        Self {
            family: Arc::clone(&self.family),
            functional: self.functional.clone(),
            c_max: self.c_max,
            precision: self.precision,
            bit_quantization: self.bit_quantization,
            phase_folding: self.phase_folding,
        }
    }
}

impl<F: Family> fmt::Debug for ProtocolSpec<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolSpec")
            .field("family", &self.family.name())
            .field("k", &self.functional.dimension())
            .field("c_max", &self.c_max)
            .field("precision", &self.precision)
            .field("bit_quantization", &self.bit_quantization)
            .field("phase_folding", &self.phase_folding)
            .finish()
    }
}

/// Outcome of a single scalar comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check {
    pub lhs: C64,
    pub rhs: C64,
    pub margin: f64,
    pub pass: bool,
}

impl Check {
    fn new(lhs: C64, rhs: C64, tol: f64) -> Self {
        let margin = (lhs - rhs).norm();
        let pass = approx_eq(lhs, rhs, tol).unwrap_or(false);
        Self {
            lhs,
            rhs,
            margin,
            pass,
        }
    }
}

impl<F: Family> ProtocolSpec<F> {
    pub fn new(family: F, functional: Functional, c_max: f64, precision: Precision) -> Result<Self> {
        if functional.dimension() != family.dimension() {
            return Err(Error::Shape(format!(
                "functional acts on {}x{} but family uses k={}",
                functional.dimension(),
                functional.dimension(),
                family.dimension()
            )));
        }
        if !(c_max > 0.0) {
            return Err(Error::Parameter(format!("C_max must be positive, got {c_max}")));
        }
        Ok(Self {
            family: Arc::new(family),
            functional,
            c_max,
            precision,
            bit_quantization: None,
            phase_folding: false,
        })
    }

    pub fn with_precision(&self, precision: Precision) -> Self {
        Self {
            precision,
            ..self.clone()
        }
    }

    pub fn with_quantization(&self, bits: Option<u32>) -> Self {
        Self {
            bit_quantization: bits,
            ..self.clone()
        }
    }

    pub fn with_phase_folding(&self, on: bool) -> Self {
        Self {
            phase_folding: on,
            ..self.clone()
        }
    }

    pub fn k(&self) -> usize {
        self.functional.dimension()
    }

    /// `μ̂ = μ(n)·C_max`.
    pub fn mu_hat(&self, n: usize) -> Result<f64> {
        let mu_hat = self.precision.at(n) * self.c_max;
        if !(mu_hat > 0.0) || !mu_hat.is_finite() {
            return Err(Error::Parameter(format!(
                "tolerance μ̂ = {mu_hat} must be positive and finite"
            )));
        }
        Ok(mu_hat)
    }

    /// A note when `T(n)` falls outside the `n ≤ T(n)` range expected of
    /// viable protocols. Runs are allowed regardless.
    pub fn round_count_note(&self, x: &F::Input) -> Option<String> {
        let n = self.family.input_size(x);
        let t = self.family.rounds(x);
        (t < n).then(|| format!("T = {t} is below n = {n}"))
    }

    /// Factor the verifier multiplies `F(T_i(m_{i-1}))` by before comparing.
    pub fn fold_factor(&self, t: &Transformation) -> Result<C64> {
        if self.phase_folding {
            Ok(self.functional.stability_factor(t)?.conj())
        } else {
            Ok(ONE)
        }
    }

    /// Honest prover for this spec, in the verifier's folded frame when
    /// phase folding is on.
    pub fn honest_prover<'a>(&'a self, x: &'a F::Input) -> Box<dyn Prover<F::Challenge> + 'a> {
        let inner = self.family.honest_prover(x);
        if self.phase_folding {
            Box::new(FoldedProver {
                inner,
                functional: self.functional.clone(),
                phase: ONE,
            })
        } else {
            inner
        }
    }

    fn check_shape(&self, m: &ComplexMatrix) -> Result<()> {
        let k = self.k();
        if m.shape() != (k, k) {
            return Err(Error::Shape(format!(
                "expected {k}x{k} message, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }
}

/// Round to `bits` fractional bits.
pub fn quantize(x: f64, bits: u32) -> f64 {
    let s = (bits as f64).exp2();
    (x * s).round() / s
}

pub fn quantize_matrix(m: &ComplexMatrix, bits: u32) -> ComplexMatrix {
    m.map(|z| C64::new(quantize(z.re, bits), quantize(z.im, bits)))
}

/// Round-0 check `C ≈_μ̂ F(m_0)`.
pub fn verify_round0<F: Family>(
    spec: &ProtocolSpec<F>,
    n: usize,
    claimed: C64,
    m0: &ComplexMatrix,
) -> Result<Check> {
    spec.check_shape(m0)?;
    Ok(Check::new(claimed, spec.functional.apply(m0)?, spec.mu_hat(n)?))
}

/// Round-`i` check `F(T_i(m_{i-1})) ≈_μ̂ F(m_i)`, with the fold factor
/// applied to the left side when phase folding is on.
pub fn verify_round<F: Family>(
    spec: &ProtocolSpec<F>,
    n: usize,
    t: &Transformation,
    prev: &ComplexMatrix,
    cur: &ComplexMatrix,
) -> Result<Check> {
    spec.check_shape(prev)?;
    spec.check_shape(cur)?;
    let lhs = spec.fold_factor(t)? * spec.functional.apply(&t.apply(prev)?)?;
    Ok(Check::new(lhs, spec.functional.apply(cur)?, spec.mu_hat(n)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// `None` at round 0.
    pub transformation: Option<Transformation>,
    pub message: ComplexMatrix,
    pub check: Check,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decision {
    Accept,
    /// A consistency check failed; round 0 is the claim check.
    RejectRound(usize),
    RejectFinal,
    /// The prover produced no usable message.
    Fault { round: usize, reason: String },
}

impl Decision {
    pub fn accepted(&self) -> bool {
        matches!(self, Decision::Accept)
    }

    pub fn is_fault(&self) -> bool {
        matches!(self, Decision::Fault { .. })
    }
}

#[derive(Clone, Debug)]
pub struct Transcript {
    pub spec: String,
    pub seed: u64,
    pub n: usize,
    pub total_rounds: usize,
    pub claimed: C64,
    pub rounds: Vec<RoundRecord>,
    pub final_check: Option<Check>,
    pub decision: Decision,
    pub ledger: Option<ErrorLedger>,
}

impl Transcript {
    pub fn accepted(&self) -> bool {
        self.decision.accepted()
    }

    /// Largest margin over the consistency rounds `0..=T` (final check excluded).
    pub fn max_round_margin(&self) -> f64 {
        self.rounds.iter().map(|r| r.check.margin).fold(0.0, f64::max)
    }

    pub fn to_record(&self) -> TranscriptRecord {
        let (decision, rejected_at, stage, fault) = match &self.decision {
            Decision::Accept => ("accept", None, None, None),
            Decision::RejectRound(r) => ("reject", Some(*r), Some("round"), None),
            Decision::RejectFinal => ("reject", Some(self.total_rounds), Some("final"), None),
            Decision::Fault { round, reason } => {
                ("reject", Some(*round), Some("fault"), Some(reason.clone()))
            }
        };
        TranscriptRecord {
            spec: self.spec.clone(),
            seed: self.seed,
            n: self.n,
            total_rounds: self.total_rounds,
            claimed: [self.claimed.re, self.claimed.im],
            rounds: self
                .rounds
                .iter()
                .map(|r| RoundEntry {
                    round: r.round,
                    lhs: [r.check.lhs.re, r.check.lhs.im],
                    rhs: [r.check.rhs.re, r.check.rhs.im],
                    margin: r.check.margin,
                    pass: r.check.pass,
                })
                .collect(),
            final_check: self.final_check.map(|c| FinalEntry {
                value: [c.lhs.re, c.lhs.im],
                expected: [c.rhs.re, c.rhs.im],
                margin: c.margin,
                pass: c.pass,
            }),
            decision: decision.into(),
            rejected_at,
            stage: stage.map(Into::into),
            fault,
            ledger: self
                .ledger
                .as_ref()
                .map(|l| l.rows().to_vec())
                .unwrap_or_default(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("record serializes")
    }
}

/// Serialized form of a [`Transcript`]; one JSON object per line in batch files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub spec: String,
    pub seed: u64,
    pub n: usize,
    pub total_rounds: usize,
    pub claimed: [f64; 2],
    pub rounds: Vec<RoundEntry>,
    #[serde(rename = "final")]
    pub final_check: Option<FinalEntry>,
    pub decision: String,
    pub rejected_at: Option<usize>,
    pub stage: Option<String>,
    pub fault: Option<String>,
    pub ledger: Vec<crate::adversaries::LedgerRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub round: usize,
    pub lhs: [f64; 2],
    pub rhs: [f64; 2],
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalEntry {
    pub value: [f64; 2],
    pub expected: [f64; 2],
    pub margin: f64,
    pub pass: bool,
}

/// Play the verifier against `prover` on input `(x, claimed)`.
///
/// Stops at the first failed check. All verifier randomness comes from `rng`;
/// `seed` is only recorded.
pub fn run_protocol<F: Family>(
    spec: &ProtocolSpec<F>,
    x: &F::Input,
    claimed: C64,
    prover: &mut dyn Prover<F::Challenge>,
    rng: &mut Rng,
    seed: u64,
) -> Transcript {
    let n = spec.family.input_size(x);
    let total_rounds = spec.family.rounds(x);
    let mut transcript = Transcript {
        spec: spec.family.name(),
        seed,
        n,
        total_rounds,
        claimed,
        rounds: Vec::with_capacity(total_rounds + 1),
        final_check: None,
        decision: Decision::Accept,
        ledger: None,
    };
    transcript.decision = drive(spec, x, claimed, prover, rng, &mut transcript);
    transcript.ledger = prover.ledger().cloned();
    transcript
}

fn drive<F: Family>(
    spec: &ProtocolSpec<F>,
    x: &F::Input,
    claimed: C64,
    prover: &mut dyn Prover<F::Challenge>,
    rng: &mut Rng,
    transcript: &mut Transcript,
) -> Decision {
    let n = transcript.n;
    let fault = |round: usize, e: Error| Decision::Fault {
        round,
        reason: e.to_string(),
    };
    let receive = |round: usize, m: Result<ComplexMatrix>| -> std::result::Result<ComplexMatrix, Decision> {
        let m = m.map_err(|e| fault(round, e))?;
        spec.check_shape(&m).map_err(|e| fault(round, e))?;
        Ok(match spec.bit_quantization {
            Some(b) => quantize_matrix(&m, b),
            None => m,
        })
    };

    let m0 = match receive(0, prover.respond(0, None)) {
        Ok(m) => m,
        Err(d) => return d,
    };
    let check = match verify_round0(spec, n, claimed, &m0) {
        Ok(c) => c,
        Err(e) => return fault(0, e),
    };
    transcript.rounds.push(RoundRecord {
        round: 0,
        transformation: None,
        message: m0,
        check,
    });
    if !check.pass {
        return Decision::RejectRound(0);
    }

    let mut challenges = Vec::with_capacity(transcript.total_rounds);
    let mut phase = ONE;
    for i in 1..=transcript.total_rounds {
        let ch = spec.family.sample_challenge(x, i, rng);
        let mi = match receive(i, prover.respond(i, Some(&ch))) {
            Ok(m) => m,
            Err(d) => return d,
        };
        let t = ch.transformation();
        let prev = &transcript.rounds[i - 1].message;
        let check = match verify_round(spec, n, t, prev, &mi) {
            Ok(c) => c,
            Err(e) => return fault(i, e),
        };
        if spec.phase_folding {
            match spec.functional.stability_factor(t) {
                Ok(l) => phase *= l,
                Err(e) => return fault(i, e),
            }
        }
        transcript.rounds.push(RoundRecord {
            round: i,
            transformation: Some(t.clone()),
            message: mi,
            check,
        });
        challenges.push(ch);
        if !check.pass {
            return Decision::RejectRound(i);
        }
    }

    let last = &transcript.rounds[transcript.total_rounds].message;
    let value = match spec.functional.apply(last) {
        Ok(v) => phase * v,
        Err(e) => return fault(transcript.total_rounds, e),
    };
    let expected = spec.family.final_value(x, &challenges);
    let tol = match spec.mu_hat(n) {
        Ok(t) => t,
        Err(e) => return fault(transcript.total_rounds, e),
    };
    let check = Check::new(value, expected, tol);
    transcript.final_check = Some(check);
    if check.pass {
        Decision::Accept
    } else {
        Decision::RejectFinal
    }
}

/// Result of the collapsed two-message protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoRoundOutcome {
    pub claim: Check,
    /// `F(m_T)` against the chain `F(T_T ∘ … ∘ T_1 (m_0))`, phase folded.
    pub link: Option<Check>,
    pub final_check: Option<Check>,
    pub decision: Decision,
}

/// The collapsed protocol: `m_0`, then every transformation at once and `m_T`.
///
/// Draws the transformations from `rng` in the same order as
/// [`run_protocol`], so matched seeds see matched challenges.
pub fn run_two_round<F: Family>(
    spec: &ProtocolSpec<F>,
    x: &F::Input,
    claimed: C64,
    prover: &mut dyn TwoRoundProver<F::Challenge>,
    rng: &mut Rng,
) -> Result<TwoRoundOutcome> {
    let n = spec.family.input_size(x);
    let total = spec.family.rounds(x);
    let tol = spec.mu_hat(n)?;
    let m0 = prover.first()?;
    let claim = verify_round0(spec, n, claimed, &m0)?;
    if !claim.pass {
        return Ok(TwoRoundOutcome {
            claim,
            link: None,
            final_check: None,
            decision: Decision::RejectRound(0),
        });
    }
    let challenges: Vec<F::Challenge> = (1..=total)
        .map(|i| spec.family.sample_challenge(x, i, rng))
        .collect();
    let mt = prover.second(&challenges)?;
    spec.check_shape(&mt)?;
    let mut chained = m0;
    let mut fold = ONE;
    let mut phase = ONE;
    for ch in &challenges {
        let t = ch.transformation();
        chained = t.apply(&chained)?;
        fold *= spec.fold_factor(t)?;
        if spec.phase_folding {
            phase *= spec.functional.stability_factor(t)?;
        }
    }
    let f_mt = spec.functional.apply(&mt)?;
    let link = Check::new(fold * spec.functional.apply(&chained)?, f_mt, tol);
    if !link.pass {
        return Ok(TwoRoundOutcome {
            claim,
            link: Some(link),
            final_check: None,
            decision: Decision::RejectRound(total),
        });
    }
    let final_check = Check::new(phase * f_mt, spec.family.final_value(x, &challenges), tol);
    Ok(TwoRoundOutcome {
        claim,
        link: Some(link),
        final_check: Some(final_check),
        decision: if final_check.pass {
            Decision::Accept
        } else {
            Decision::RejectFinal
        },
    })
}

/// Membership of `(x, C)` in the scalar function language:
/// `|C(x) − C| ≤ C_max / 6`.
pub fn sf_member<F: Family>(spec: &ProtocolSpec<F>, x: &F::Input, c: C64) -> Result<bool> {
    let value = spec
        .family
        .evaluate(x)
        .ok_or_else(|| Error::Unsupported("family cannot evaluate C(x)".into()))?;
    Ok((value - c).norm() <= spec.c_max / 6.0)
}

/// Wraps an honest prover so its messages live in the verifier's
/// phase-folded frame: `m_i = M_i · conj(λ_1 ⋯ λ_i)`.
struct FoldedProver<'a, C> {
    inner: Box<dyn Prover<C> + 'a>,
    functional: Functional,
    phase: C64,
}

impl<C: Challenge> Prover<C> for FoldedProver<'_, C> {
    fn respond(&mut self, round: usize, challenge: Option<&C>) -> Result<ComplexMatrix> {
        let m = self.inner.respond(round, challenge)?;
        if let Some(ch) = challenge {
            self.phase *= self.functional.stability_factor(ch.transformation())?;
        }
        Ok(m.scale(self.phase.conj()))
    }

    fn ledger(&self) -> Option<&ErrorLedger> {
        self.inner.ledger()
    }
}

/// The AG protocol on circuits of three-qubit gates.
#[derive(Clone, Debug)]
pub struct AgFamily {
    n: usize,
    t: usize,
}

/// The AG verifier's private sample: `u_i`, and `T_i = A ↦ A·g_i^{-1}·u_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AgChallenge {
    pub round_unitary: RoundUnitary,
    pub transformation: Transformation,
}

impl Challenge for AgChallenge {
    fn transformation(&self) -> &Transformation {
        &self.transformation
    }
}

impl AgFamily {
    pub fn new(n: usize, t: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!("AG protocol needs n >= 3, got {n}")));
        }
        if t < 1 {
            return Err(Error::Parameter("AG protocol needs T >= 1".into()));
        }
        Ok(Self { n, t })
    }

    pub fn expected_shape(&self) -> (usize, usize) {
        (self.n, self.t)
    }
}

impl Family for AgFamily {
    type Input = Circuit;
    type Challenge = AgChallenge;

    fn name(&self) -> String {
        format!("ag(n={},T={})", self.n, self.t)
    }

    fn dimension(&self) -> usize {
        8
    }

    fn input_size(&self, x: &Circuit) -> usize {
        x.num_qubits()
    }

    fn rounds(&self, x: &Circuit) -> usize {
        x.num_gates()
    }

    fn sample_challenge(&self, x: &Circuit, round: usize, rng: &mut Rng) -> AgChallenge {
        let gate = x.gate(round);
        let round_unitary = RoundUnitary::sample(gate.support().clone(), rng);
        let product = gate
            .inverse()
            .matmul(&round_unitary.local())
            .expect("8x8 product");
        AgChallenge {
            round_unitary,
            transformation: Transformation::RightMultiply(product),
        }
    }

    fn final_value(&self, x: &Circuit, challenges: &[AgChallenge]) -> C64 {
        let rounds: Vec<RoundUnitary> = challenges.iter().map(|c| c.round_unitary.clone()).collect();
        circuit::final_value(&rounds, x.num_qubits())
    }

    fn evaluate(&self, x: &Circuit) -> Option<C64> {
        Some(circuit::top_row_value(x))
    }

    fn honest_prover<'a>(&'a self, x: &'a Circuit) -> Box<dyn Prover<AgChallenge> + 'a> {
        Box::new(AgHonestProver::new(x))
    }
}

/// The AG protocol for `n`-qubit circuits with `t` gates: trace functional on
/// 8x8 matrices, `C_max = 1`, absolute precision `mu`.
pub fn ag_spec(n: usize, t: usize, mu: f64) -> Result<ProtocolSpec<AgFamily>> {
    ProtocolSpec::new(
        AgFamily::new(n, t)?,
        Functional::trace(8),
        1.0,
        Precision::Absolute(mu),
    )
}

/// Input of a [`SyntheticFamily`]: a size parameter and the honest `M_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticInput {
    pub n: usize,
    pub m0: ComplexMatrix,
}

/// Toy ILSCC instance with a fixed round count and an arbitrary
/// transformation distribution. `C(x) = F(M_0)` and the honest messages are
/// `M_i = T_i(M_{i-1})`.
pub struct SyntheticFamily {
    functional: Functional,
    distribution: Box<dyn TransformationDistribution>,
    rounds: usize,
}

impl SyntheticFamily {
    pub fn new(
        functional: Functional,
        distribution: Box<dyn TransformationDistribution>,
        rounds: usize,
    ) -> Result<Self> {
        if rounds < 1 {
            return Err(Error::Parameter("need at least one round".into()));
        }
        Ok(Self {
            functional,
            distribution,
            rounds,
        })
    }

    pub fn distribution(&self) -> &dyn TransformationDistribution {
        self.distribution.as_ref()
    }
}

impl Family for SyntheticFamily {
    type Input = SyntheticInput;
    type Challenge = Transformation;

    fn name(&self) -> String {
        format!("synthetic({},T={})", self.distribution.tag(), self.rounds)
    }

    fn dimension(&self) -> usize {
        self.functional.dimension()
    }

    fn input_size(&self, x: &SyntheticInput) -> usize {
        x.n
    }

    fn rounds(&self, _x: &SyntheticInput) -> usize {
        self.rounds
    }

    fn sample_challenge(&self, _x: &SyntheticInput, round: usize, rng: &mut Rng) -> Transformation {
        self.distribution.sample(round, rng)
    }

    fn final_value(&self, x: &SyntheticInput, challenges: &[Transformation]) -> C64 {
        let m = challenges.iter().fold(x.m0.clone(), |m, t| {
            t.apply(&m).expect("transformation sized to input")
        });
        self.functional.apply(&m).expect("functional sized to input")
    }

    fn evaluate(&self, x: &SyntheticInput) -> Option<C64> {
        self.functional.apply(&x.m0).ok()
    }

    fn honest_prover<'a>(&'a self, x: &'a SyntheticInput) -> Box<dyn Prover<Transformation> + 'a> {
        Box::new(SyntheticHonestProver::new(x.m0.clone()))
    }
}

pub fn synthetic_spec(
    functional: Functional,
    distribution: Box<dyn TransformationDistribution>,
    rounds: usize,
    c_max: f64,
    precision: Precision,
) -> Result<ProtocolSpec<SyntheticFamily>> {
    let family = SyntheticFamily::new(functional.clone(), distribution, rounds)?;
    ProtocolSpec::new(family, functional, c_max, precision)
}
