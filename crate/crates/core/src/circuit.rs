//! Circuits of three-qubit gates and the quantum side of the AG protocol:
//! the top-row value, the honest prover's reduced messages and the
//! verifier's locally computable final value.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{
    embed_local, partial_trace_rank_one, ComplexMatrix, LocalOperator, QubitSupport, StateVector,
    C64, ONE, ZERO,
};

pub const GATE_UNITARITY_TOL: f64 = 1e-10;

/// Unitary on three named qubits of the register.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalGate {
    unitary: ComplexMatrix,
    support: QubitSupport,
}

impl LocalGate {
    pub fn new(unitary: ComplexMatrix, support: QubitSupport) -> Result<Self> {
        if unitary.shape() != (8, 8) {
            return Err(Error::Shape(format!(
                "gate must be 8x8, got {}x{}",
                unitary.rows(),
                unitary.cols()
            )));
        }
        if support.len() != 3 {
            return Err(Error::InvalidSupport(format!(
                "gate support must have 3 qubits, got {}",
                support.len()
            )));
        }
        if !unitary.is_unitary(GATE_UNITARITY_TOL) {
            return Err(Error::Parameter("gate matrix is not unitary".into()));
        }
        Ok(Self { unitary, support })
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    /// `g^{-1}`, taken as the conjugate transpose.
    pub fn inverse(&self) -> ComplexMatrix {
        self.unitary.dagger()
    }

    pub fn support(&self) -> &QubitSupport {
        &self.support
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<LocalGate>,
}

impl Circuit {
    pub fn new(n: usize, gates: Vec<LocalGate>) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!("circuit needs n >= 3, got {n}")));
        }
        if gates.is_empty() {
            return Err(Error::Parameter("circuit needs at least one gate".into()));
        }
        if let Some(g) = gates.iter().find(|g| g.support.max_index() >= n) {
            return Err(Error::InvalidSupport(format!(
                "gate support {:?} out of range for {n} qubits",
                g.support.indices()
            )));
        }
        Ok(Self { n, gates })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn gates(&self) -> &[LocalGate] {
        &self.gates
    }

    /// Gate `g_i` with 1-based round numbering.
    pub fn gate(&self, i: usize) -> &LocalGate {
        &self.gates[i - 1]
    }

    fn embedded(&self, gate: &LocalGate) -> LocalOperator {
        embed_local(&gate.unitary, &gate.support, self.n).expect("validated gate placement")
    }

    /// Serialize to the line-oriented text format.
    ///
    /// Floats are written with the shortest representation that parses back
    /// to the same bits, so `from_text(to_text(c)) == c` exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("n={} T={}\n", self.n, self.gates.len());
        for g in &self.gates {
            let idx = g.support.indices();
            write!(out, "{} {} {}", idx[0], idx[1], idx[2]).unwrap();
            for z in g.unitary.as_slice() {
                write!(out, " {},{}", z.re, z.im).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "missing header".into(),
        })?;
        let (n, t) = parse_header(header).map_err(|msg| Error::Parse { line: hline, msg })?;
        let mut gates = Vec::with_capacity(t);
        for (line, body) in lines {
            let gate = parse_gate(body, n).map_err(|e| match e {
                Error::Parse { msg, .. } => Error::Parse { line, msg },
                other => Error::Parse {
                    line,
                    msg: other.to_string(),
                },
            })?;
            gates.push(gate);
        }
        if gates.len() != t {
            return Err(Error::Parse {
                line: hline,
                msg: format!("header declares T={t} but found {} gates", gates.len()),
            });
        }
        Self::new(n, gates)
    }
}

fn parse_header(header: &str) -> std::result::Result<(usize, usize), String> {
    let mut n = None;
    let mut t = None;
    for tok in header.split_whitespace() {
        match tok.split_once('=') {
            Some(("n", v)) => n = Some(v.parse::<usize>().map_err(|e| format!("bad n: {e}"))?),
            Some(("T", v)) => t = Some(v.parse::<usize>().map_err(|e| format!("bad T: {e}"))?),
            _ => return Err(format!("unexpected header token `{tok}`")),
        }
    }
    match (n, t) {
        (Some(n), Some(t)) => Ok((n, t)),
        _ => Err("header must be `n=<int> T=<int>`".into()),
    }
}

fn parse_gate(body: &str, n: usize) -> Result<LocalGate> {
    let bad = |msg: String| Error::Parse { line: 0, msg };
    let toks: Vec<&str> = body.split_whitespace().collect();
    if toks.len() != 3 + 64 {
        return Err(bad(format!(
            "expected 3 support indices and 64 entries, found {} tokens",
            toks.len()
        )));
    }
    let support = toks[..3]
        .iter()
        .map(|t| usize::from_str(t).map_err(|e| bad(format!("bad support index `{t}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let entries = toks[3..]
        .iter()
        .map(|t| {
            let (re, im) = t
                .split_once(',')
                .ok_or_else(|| bad(format!("entry `{t}` is not `re,im`")))?;
            let re = f64::from_str(re).map_err(|e| bad(format!("bad real part `{re}`: {e}")))?;
            let im = f64::from_str(im).map_err(|e| bad(format!("bad imaginary part `{im}`: {e}")))?;
            Ok(C64::new(re, im))
        })
        .collect::<Result<Vec<_>>>()?;
    LocalGate::new(
        ComplexMatrix::new(8, 8, entries)?,
        QubitSupport::new(support, n)?,
    )
}

/// Element of the three-angle single-qubit measure for fixed angles.
pub fn u2_from_angles(theta: f64, phi1: f64, phi2: f64) -> ComplexMatrix {
    let (s, c) = theta.sin_cos();
    let e1 = C64::from_polar(1.0, phi1);
    let e2 = C64::from_polar(1.0, phi2);
    ComplexMatrix::new(2, 2, vec![e1 * c, e2 * s, -e2.conj() * s, e1.conj() * c])
        .expect("2x2 literal")
}

/// Draw from the three-angle U(2) measure with angles uniform on `[0, 2π)`.
pub fn sample_u2<R: Rng + ?Sized>(rng: &mut R) -> ComplexMatrix {
    let mut angle = || rng.random::<f64>() * 2.0 * PI;
    let theta = angle();
    let phi1 = angle();
    let phi2 = angle();
    u2_from_angles(theta, phi1, phi2)
}

/// The verifier's round unitary `u^1 ⊗ u^2 ⊗ u^3` on a gate's support.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundUnitary {
    factors: [ComplexMatrix; 3],
    support: QubitSupport,
}

impl RoundUnitary {
    pub fn new(factors: [ComplexMatrix; 3], support: QubitSupport) -> Result<Self> {
        if support.len() != 3 {
            return Err(Error::InvalidSupport("round unitary needs 3 qubits".into()));
        }
        for f in &factors {
            if f.shape() != (2, 2) || !f.is_unitary(GATE_UNITARITY_TOL) {
                return Err(Error::Parameter("round factor is not a 2x2 unitary".into()));
            }
        }
        Ok(Self { factors, support })
    }

    pub fn identity(support: QubitSupport) -> Self {
        let id = ComplexMatrix::identity(2);
        Self {
            factors: [id.clone(), id.clone(), id],
            support,
        }
    }

    pub fn sample<R: Rng + ?Sized>(support: QubitSupport, rng: &mut R) -> Self {
        let factors = [sample_u2(rng), sample_u2(rng), sample_u2(rng)];
        Self { factors, support }
    }

    pub fn factors(&self) -> &[ComplexMatrix; 3] {
        &self.factors
    }

    pub fn support(&self) -> &QubitSupport {
        &self.support
    }

    /// The 8x8 local matrix, factors in support order.
    pub fn local(&self) -> ComplexMatrix {
        let [a, b, c] = &self.factors;
        a.kron(&b.kron(c))
    }
}

/// `<0^n| G_T ... G_1 |0^n>`, the trace of the circuit's top-row matrix.
pub fn top_row_value(circuit: &Circuit) -> C64 {
    let mut state = StateVector::zero_state(circuit.n);
    for g in &circuit.gates {
        state
            .apply(&circuit.embedded(g))
            .expect("validated gate placement");
    }
    state.amplitudes()[0]
}

/// `<0^n| U_T ... U_1 |0^n>` from the per-qubit 2x2 factors alone.
pub fn final_value(rounds: &[RoundUnitary], n: usize) -> C64 {
    let mut per_qubit = vec![ComplexMatrix::identity(2); n];
    for ru in rounds {
        for (f, &q) in ru.factors.iter().zip(ru.support.indices()) {
            per_qubit[q] = f.matmul(&per_qubit[q]).expect("2x2 product");
        }
    }
    per_qubit.iter().map(|p| p[(0, 0)]).product()
}

/// Reduced honest message from the rank-one factors: `(|psi><phi|)|_support`.
pub fn honest_message(state: &ProverState<'_>, next_support: &QubitSupport) -> Result<ComplexMatrix> {
    partial_trace_rank_one(&state.psi, &state.phi, next_support)
}

/// The honest prover's matrix `A_i = U_i···U_1|0^n><0^n|G_T···G_{i+1}` in
/// factored form.
///
/// `psi` is the left factor; `phi` is the right factor stored as a column,
/// so that `A_i = |psi><phi|`. Each round applies `U_i` to `psi` and `G_i`
/// to `phi`.
#[derive(Clone, Debug)]
pub struct ProverState<'a> {
    circuit: &'a Circuit,
    psi: StateVector,
    phi: StateVector,
    round: usize,
}

impl<'a> ProverState<'a> {
    pub fn new(circuit: &'a Circuit) -> Self {
        let mut phi = StateVector::zero_state(circuit.n);
        for g in circuit.gates.iter().rev() {
            phi.apply(&circuit.embedded(g).adjoint())
                .expect("validated gate placement");
        }
        Self {
            circuit,
            psi: StateVector::zero_state(circuit.n),
            phi,
            round: 0,
        }
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn psi(&self) -> &StateVector {
        &self.psi
    }

    pub fn phi(&self) -> &StateVector {
        &self.phi
    }

    /// Support that `M_round` is reduced onto: `g_{round+1}`, or `g_T` for the
    /// final round.
    pub fn message_support(&self) -> &QubitSupport {
        let t = self.circuit.num_gates();
        self.circuit.gate((self.round + 1).min(t)).support()
    }

    /// The honest `M_round` for the rounds applied so far.
    pub fn message(&self) -> ComplexMatrix {
        honest_message(self, self.message_support()).expect("state and support sized by circuit")
    }

    /// Move from round `i-1` to round `i` under the verifier's `U_i`.
    pub fn advance(&mut self, u: &RoundUnitary) -> Result<()> {
        let t = self.circuit.num_gates();
        if self.round >= t {
            return Err(Error::ProtocolOrder(format!(
                "circuit has {t} rounds; cannot advance past round {}",
                self.round
            )));
        }
        let gate = self.circuit.gate(self.round + 1);
        if u.support() != gate.support() {
            return Err(Error::ProtocolOrder(format!(
                "round {} unitary on {:?} but gate acts on {:?}",
                self.round + 1,
                u.support().indices(),
                gate.support().indices()
            )));
        }
        let u_op = embed_local(&u.local(), u.support(), self.circuit.n)?;
        self.psi.apply(&u_op)?;
        self.phi.apply(&self.circuit.embedded(gate))?;
        self.round += 1;
        Ok(())
    }
}

/// Standard gates that can be placed into an 8x8 block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedGate {
    H,
    X,
    Y,
    Z,
    S,
    T,
    Cx,
    Cz,
    Swap,
    Ccx,
}

impl NamedGate {
    /// The gate acting on the leading qubits of the 3-qubit block.
    pub fn block(self) -> ComplexMatrix {
        let i = C64::new(0.0, 1.0);
        let r = C64::new(FRAC_1_SQRT_2, 0.0);
        let one_qubit = |m: [C64; 4]| {
            ComplexMatrix::new(2, 2, m.to_vec())
                .expect("2x2 literal")
                .kron(&ComplexMatrix::identity(4))
        };
        let permutation = |map: &dyn Fn(usize) -> usize, dim: usize| {
            ComplexMatrix::from_fn(dim, dim, |row, col| if map(col) == row { ONE } else { ZERO })
        };
        match self {
            NamedGate::H => one_qubit([r, r, r, -r]),
            NamedGate::X => one_qubit([ZERO, ONE, ONE, ZERO]),
            NamedGate::Y => one_qubit([ZERO, -i, i, ZERO]),
            NamedGate::Z => one_qubit([ONE, ZERO, ZERO, -ONE]),
            NamedGate::S => one_qubit([ONE, ZERO, ZERO, i]),
            NamedGate::T => one_qubit([ONE, ZERO, ZERO, C64::from_polar(1.0, PI / 4.0)]),
            NamedGate::Cx => permutation(&|b| if b & 0b100 != 0 { b ^ 0b010 } else { b }, 8),
            NamedGate::Cz => ComplexMatrix::from_fn(8, 8, |r, c| match (r == c, r & 0b110 == 0b110) {
                (true, true) => -ONE,
                (true, false) => ONE,
                _ => ZERO,
            }),
            NamedGate::Swap => permutation(
                &|b| (b & 0b001) | ((b & 0b100) >> 1) | ((b & 0b010) << 1),
                8,
            ),
            NamedGate::Ccx => permutation(&|b| if b & 0b110 == 0b110 { b ^ 0b001 } else { b }, 8),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateSet {
    /// Haar-random 8x8 unitaries.
    Haar3,
    /// Uniform over {H, S, T, CX}.
    CliffordT,
    Named(Vec<NamedGate>),
}

/// Haar-random unitary of size `dim`: QR of a complex Gaussian matrix with
/// the phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let z = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * FRAC_1_SQRT_2
    });
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    ComplexMatrix::from_fn(dim, dim, |row, col| {
        let d = r[(col, col)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        q[(row, col)] * phase
    })
}

/// Random benchmark circuit with `t` gates on uniformly random ordered
/// 3-qubit supports.
pub fn random_circuit<R: Rng + ?Sized>(
    n: usize,
    t: usize,
    gate_set: &GateSet,
    rng: &mut R,
) -> Result<Circuit> {
    if n < 3 {
        return Err(Error::Parameter(format!("random circuit needs n >= 3, got {n}")));
    }
    if t < 1 {
        return Err(Error::Parameter("random circuit needs T >= 1".into()));
    }
    let named: Vec<NamedGate> = match gate_set {
        GateSet::Haar3 => Vec::new(),
        GateSet::CliffordT => vec![NamedGate::H, NamedGate::S, NamedGate::T, NamedGate::Cx],
        GateSet::Named(list) if list.is_empty() => {
            return Err(Error::Parameter("named gate set is empty".into()))
        }
        GateSet::Named(list) => list.clone(),
    };
    let gates = (0..t)
        .map(|_| {
            let support = QubitSupport::new(sample_indices(rng, n, 3).into_vec(), n)?;
            let unitary = match gate_set {
                GateSet::Haar3 => haar_unitary(8, rng),
                _ => named[rng.random_range(0..named.len())].block(),
            };
            LocalGate::new(unitary, support)
        })
        .collect::<Result<Vec<_>>>()?;
    Circuit::new(n, gates)
}
