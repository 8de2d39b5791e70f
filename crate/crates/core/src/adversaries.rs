//! Prover strategies.
//!
//! Cheating provers run an honest simulation internally and send
//! `m_i = M_i − Δ_i` for an error matrix `Δ_i` chosen so that every
//! intermediate consistency check passes exactly. Only the scalar
//! `δ_i = F(Δ_i)` evolves, and it is what the final check sees.

use serde::{Deserialize, Serialize};

use crate::circuit::{top_row_value, Circuit, ProverState};
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64, ONE};
use crate::protocol::{
    AgChallenge, Challenge, Family, Functional, Prover, ProtocolSpec, TwoRoundProver,
};

/// One row of an error ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub round: usize,
    pub delta_re: f64,
    pub delta_im: f64,
    /// `‖Δ_i‖_F`.
    pub delta_norm: f64,
    /// `|δ_i / δ_{i−1}|`; absent at round 0 and whenever `δ_{i−1} = 0`.
    pub shrinkage: Option<f64>,
}

impl LedgerRow {
    pub fn delta(&self) -> C64 {
        C64::new(self.delta_re, self.delta_im)
    }
}

/// Per-round record of a cheat's error scalar.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorLedger {
    rows: Vec<LedgerRow>,
}

impl ErrorLedger {
    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn deltas(&self) -> impl Iterator<Item = C64> + '_ {
        self.rows.iter().map(LedgerRow::delta)
    }

    pub fn shrinkages(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().filter_map(|r| r.shrinkage)
    }

    pub fn first_delta(&self) -> Option<C64> {
        self.rows.first().map(LedgerRow::delta)
    }

    pub fn last_delta(&self) -> Option<C64> {
        self.rows.last().map(LedgerRow::delta)
    }

    fn record(&mut self, round: usize, delta: C64, delta_matrix: &ComplexMatrix) {
        let shrinkage = self.last_delta().and_then(|prev| {
            (prev.norm() > 0.0).then(|| delta.norm() / prev.norm())
        });
        self.rows.push(LedgerRow {
            round,
            delta_re: delta.re,
            delta_im: delta.im,
            delta_norm: delta_matrix.frobenius_norm(),
            shrinkage,
        });
    }
}

fn expect_round(next: usize, round: usize, has_challenge: bool) -> Result<()> {
    if round != next {
        return Err(Error::ProtocolOrder(format!(
            "expected request for round {next}, got round {round}"
        )));
    }
    if has_challenge != (round > 0) {
        return Err(Error::ProtocolOrder(format!(
            "round {round} {} a challenge",
            if round > 0 { "requires" } else { "takes no" }
        )));
    }
    Ok(())
}

/// Honest AG prover: the true `M_i` from a rank-one statevector simulation.
pub struct AgHonestProver<'a> {
    state: ProverState<'a>,
    next: usize,
}

impl<'a> AgHonestProver<'a> {
    pub fn new(circuit: &'a Circuit) -> Self {
        Self {
            state: ProverState::new(circuit),
            next: 0,
        }
    }

    pub fn state(&self) -> &ProverState<'a> {
        &self.state
    }
}

impl Prover<AgChallenge> for AgHonestProver<'_> {
    fn respond(&mut self, round: usize, challenge: Option<&AgChallenge>) -> Result<ComplexMatrix> {
        expect_round(self.next, round, challenge.is_some())?;
        if let Some(ch) = challenge {
            self.state.advance(&ch.round_unitary)?;
        }
        self.next += 1;
        Ok(self.state.message())
    }
}

/// Honest prover for synthetic families: `M_i = T_i(M_{i−1})`.
pub struct SyntheticHonestProver {
    current: ComplexMatrix,
    next: usize,
}

impl SyntheticHonestProver {
    pub fn new(m0: ComplexMatrix) -> Self {
        Self {
            current: m0,
            next: 0,
        }
    }
}

impl<C: Challenge> Prover<C> for SyntheticHonestProver {
    fn respond(&mut self, round: usize, challenge: Option<&C>) -> Result<ComplexMatrix> {
        expect_round(self.next, round, challenge.is_some())?;
        if let Some(ch) = challenge {
            self.current = ch.transformation().apply(&self.current)?;
        }
        self.next += 1;
        Ok(self.current.clone())
    }
}

/// The AG cheat: `Δ_i = (δ_i / tr I)·I` with
/// `δ_0 = tr(A) − C` and `δ_i = tr(Δ_{i−1}·g_i^{-1}·u_i)`.
pub struct AgCheatProver<'a> {
    honest: AgHonestProver<'a>,
    delta0: C64,
    error: ComplexMatrix,
    ledger: ErrorLedger,
}

impl<'a> AgCheatProver<'a> {
    pub fn new(circuit: &'a Circuit, claimed: C64) -> Self {
        Self {
            honest: AgHonestProver::new(circuit),
            delta0: top_row_value(circuit) - claimed,
            error: ComplexMatrix::zeros(8, 8),
            ledger: ErrorLedger::default(),
        }
    }
}

impl Prover<AgChallenge> for AgCheatProver<'_> {
    fn respond(&mut self, round: usize, challenge: Option<&AgChallenge>) -> Result<ComplexMatrix> {
        let honest = self.honest.respond(round, challenge)?;
        let delta = match challenge {
            None => self.delta0,
            Some(ch) => ch.transformation.apply(&self.error)?.trace()?,
        };
        self.error = ComplexMatrix::identity(8).scale(delta / 8.0);
        self.ledger.record(round, delta, &self.error);
        honest.sub(&self.error)
    }

    fn ledger(&self) -> Option<&ErrorLedger> {
        Some(&self.ledger)
    }
}

/// The generic cheat for any ILSCC instance: `Δ_i = (δ_i / q*)·Q*` with
/// `δ_0 = C(x) − C` and `δ_i = F(T_i(Δ_{i−1}))`.
///
/// Round 0 uses `δ_0` as the coefficient of `Q*`, which is what makes the
/// claim check pass. Under phase folding `δ_i` carries the verifier's fold
/// factor so the folded checks pass as well.
pub struct GenericCheatProver<'a, C> {
    inner: Box<dyn Prover<C> + 'a>,
    functional: Functional,
    phase_folding: bool,
    delta0: C64,
    error: Option<ComplexMatrix>,
    ledger: ErrorLedger,
}

impl<'a, C: Challenge> GenericCheatProver<'a, C> {
    pub fn new<F>(spec: &'a ProtocolSpec<F>, x: &'a F::Input, claimed: C64) -> Result<Self>
    where
        F: Family<Challenge = C>,
    {
        let value = spec
            .family
            .evaluate(x)
            .ok_or_else(|| Error::Unsupported("cheat needs C(x)".into()))?;
        if !(spec.functional.q_star() > 0.0) {
            return Err(Error::DegenerateFunctional);
        }
        Ok(Self {
            inner: spec.honest_prover(x),
            functional: spec.functional.clone(),
            phase_folding: spec.phase_folding,
            delta0: value - claimed,
            error: None,
            ledger: ErrorLedger::default(),
        })
    }
}

impl<C: Challenge> Prover<C> for GenericCheatProver<'_, C> {
    fn respond(&mut self, round: usize, challenge: Option<&C>) -> Result<ComplexMatrix> {
        let honest = self.inner.respond(round, challenge)?;
        let delta = match (challenge, &self.error) {
            (None, _) => self.delta0,
            (Some(ch), Some(prev)) => {
                let t = ch.transformation();
                let fold = if self.phase_folding {
                    self.functional.stability_factor(t)?.conj()
                } else {
                    ONE
                };
                fold * self.functional.apply(&t.apply(prev)?)?
            }
            (Some(_), None) => {
                return Err(Error::ProtocolOrder("round 0 was never served".into()))
            }
        };
        let error = self
            .functional
            .maximizer()
            .scale(delta / self.functional.q_star());
        self.ledger.record(round, delta, &error);
        let m = honest.sub(&error)?;
        self.error = Some(error);
        Ok(m)
    }

    fn ledger(&self) -> Option<&ErrorLedger> {
        Some(&self.ledger)
    }
}

/// Sends `m_0` in every round before the last and the honest source's `m_T`
/// at round `T`.
pub struct ReplayProver<'a, C> {
    inner: Box<dyn Prover<C> + 'a>,
    total: usize,
    m0: Option<ComplexMatrix>,
}

impl<'a, C: Challenge> ReplayProver<'a, C> {
    /// Replays the spec's honest prover (phase-folded when the spec folds).
    pub fn new<F>(spec: &'a ProtocolSpec<F>, x: &'a F::Input) -> Self
    where
        F: Family<Challenge = C>,
    {
        Self {
            inner: spec.honest_prover(x),
            total: spec.family.rounds(x),
            m0: None,
        }
    }
}

impl<C: Challenge> Prover<C> for ReplayProver<'_, C> {
    fn respond(&mut self, round: usize, challenge: Option<&C>) -> Result<ComplexMatrix> {
        let source = self.inner.respond(round, challenge)?;
        if round == 0 {
            self.m0 = Some(source.clone());
            return Ok(source);
        }
        if round == self.total {
            return Ok(source);
        }
        self.m0
            .clone()
            .ok_or_else(|| Error::ProtocolOrder("round 0 was never served".into()))
    }
}

impl<C: Challenge> TwoRoundProver<C> for ReplayProver<'_, C> {
    fn first(&mut self) -> Result<ComplexMatrix> {
        self.respond(0, None)
    }

    fn second(&mut self, challenges: &[C]) -> Result<ComplexMatrix> {
        if challenges.len() != self.total {
            return Err(Error::ProtocolOrder(format!(
                "expected {} transformations, got {}",
                self.total,
                challenges.len()
            )));
        }
        let mut last = None;
        for (i, ch) in challenges.iter().enumerate() {
            last = Some(self.inner.respond(i + 1, Some(ch))?);
        }
        last.ok_or_else(|| Error::ProtocolOrder("no rounds".into()))
    }
}
