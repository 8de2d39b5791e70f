//! Dense complex linear algebra used throughout the crate.
//!
//! Basis convention: qubit 0 is the most significant bit of a computational
//! basis index. Reduced matrices on a [`QubitSupport`] are indexed by the
//! support qubits in the order they are listed, so the first listed qubit is
//! the most significant bit of the local index.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// `|ket><bra|` for two column vectors; the bra is conjugated.
    pub fn outer(ket: &[C64], bra: &[C64]) -> Self {
        Self::from_fn(ket.len(), bra.len(), |r, c| ket[r] * bra[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    fn zip_map(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|z| z * c)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn trace(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::Shape(format!(
                "trace of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    /// Frobenius inner product `<self, other> = sum conj(self_ij) * other_ij`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same_shape(other, "inner product")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |r, c| {
            self[(r / other.rows, c / other.cols)] * other[(r % other.rows, c % other.cols)]
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other, "difference")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `U U^dagger = I` entrywise within `tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let prod = self
            .matmul(&self.dagger())
            .expect("square matrix times its adjoint");
        prod.max_abs_diff(&Self::identity(self.rows))
            .is_ok_and(|d| d <= tol)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.to_nalgebra()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<C64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    /// Column-major vectorization `vec(A)`.
    pub fn vectorize(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.push(self[(r, c)]);
            }
        }
        out
    }

    /// Inverse of [`ComplexMatrix::vectorize`] for a `rows x cols` shape.
    pub fn unvectorize(rows: usize, cols: usize, v: &[C64]) -> Result<Self> {
        if v.len() != rows * cols {
            return Err(Error::Shape(format!(
                "vector of length {} cannot be reshaped to {rows}x{cols}",
                v.len()
            )));
        }
        Ok(Self::from_fn(rows, cols, |r, c| v[c * rows + r]))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &mut self.data[r * self.cols + c]
    }
}

/// Ordered list of distinct qubit positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QubitSupport(Vec<usize>);

impl QubitSupport {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSupport("empty support".into()));
        }
        for (pos, &q) in indices.iter().enumerate() {
            if q >= n {
                return Err(Error::InvalidSupport(format!(
                    "qubit {q} out of range for {n} qubits"
                )));
            }
            if indices[..pos].contains(&q) {
                return Err(Error::InvalidSupport(format!("duplicate qubit {q}")));
            }
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_index(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    fn check_fits(&self, n: usize) -> Result<()> {
        match self.0.iter().find(|&&q| q >= n) {
            Some(q) => Err(Error::InvalidSupport(format!(
                "qubit {q} out of range for {n} qubits"
            ))),
            None => Ok(()),
        }
    }

    /// Global-index offset of every local basis state, plus the bit mask of the support.
    fn offsets(&self, n: usize) -> (Vec<usize>, usize) {
        let s = self.0.len();
        let bit = |q: usize| 1usize << (n - 1 - q);
        let mask = self.0.iter().map(|&q| bit(q)).fold(0, |a, b| a | b);
        let offsets = (0..1usize << s)
            .map(|local| {
                (0..s)
                    .filter(|j| local >> (s - 1 - j) & 1 == 1)
                    .map(|j| bit(self.0[j]))
                    .sum()
            })
            .collect();
        (offsets, mask)
    }
}

/// Amplitudes of an `n`-qubit pure state (not necessarily normalized).
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero_state(n: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Self { amps }
    }

    pub fn basis_state(n: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = ONE;
        Self { amps }
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::Shape(format!(
                "state vector length {} is not a power of two",
                amps.len()
            )));
        }
        Ok(Self { amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::Shape(format!(
                "inner product of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn apply(&mut self, op: &LocalOperator) -> Result<()> {
        op.apply_in_place(&mut self.amps)
    }
}

/// An 8x8 gate placed on three qubits of an `n`-qubit register.
///
/// Acts as the permuted `gate ⊗ I` without ever forming the `2^n x 2^n` matrix.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    gate: ComplexMatrix,
    support: QubitSupport,
    n: usize,
    offsets: Vec<usize>,
    mask: usize,
}

/// Lift an 8x8 gate on `support` to an operator on `n` qubits.
pub fn embed_local(gate: &ComplexMatrix, support: &QubitSupport, n: usize) -> Result<LocalOperator> {
    if gate.shape() != (8, 8) {
        return Err(Error::Shape(format!(
            "local gate must be 8x8, got {}x{}",
            gate.rows(),
            gate.cols()
        )));
    }
    if support.len() != 3 {
        return Err(Error::InvalidSupport(format!(
            "local gate needs exactly 3 qubits, got {}",
            support.len()
        )));
    }
    if n < 3 {
        return Err(Error::Parameter(format!("need at least 3 qubits, got {n}")));
    }
    support.check_fits(n)?;
    let (offsets, mask) = support.offsets(n);
    Ok(LocalOperator {
        gate: gate.clone(),
        support: support.clone(),
        n,
        offsets,
        mask,
    })
}

impl LocalOperator {
    pub fn gate(&self) -> &ComplexMatrix {
        &self.gate
    }

    pub fn support(&self) -> &QubitSupport {
        &self.support
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn apply_in_place(&self, amps: &mut [C64]) -> Result<()> {
        if amps.len() != 1 << self.n {
            return Err(Error::Shape(format!(
                "operator on {} qubits applied to vector of length {}",
                self.n,
                amps.len()
            )));
        }
        let g = self.gate.as_slice();
        let mut local = [ZERO; 8];
        for base in (0..amps.len()).filter(|b| b & self.mask == 0) {
            for (slot, off) in local.iter_mut().zip(&self.offsets) {
                *slot = amps[base + off];
            }
            for (r, off) in self.offsets.iter().enumerate() {
                amps[base + off] = g[r * 8..r * 8 + 8]
                    .iter()
                    .zip(&local)
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        Ok(())
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = v.to_vec();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    /// The same placement with the gate replaced by its adjoint.
    pub fn adjoint(&self) -> Self {
        Self {
            gate: self.gate.dagger(),
            ..self.clone()
        }
    }
}

/// Reduction of the rank-one operator `|psi><phi|` to the qubits in `support`.
///
/// Entry `(a, b)` is `sum_c psi[(a, c)] * conj(phi[(b, c)])` over all
/// basis states `c` of the complement.
pub fn partial_trace_rank_one(
    psi: &StateVector,
    phi: &StateVector,
    support: &QubitSupport,
) -> Result<ComplexMatrix> {
    if psi.dim() != phi.dim() {
        return Err(Error::Shape(format!(
            "rank-one factors of dimensions {} and {}",
            psi.dim(),
            phi.dim()
        )));
    }
    let n = psi.num_qubits();
    support.check_fits(n)?;
    let (offsets, mask) = support.offsets(n);
    let d = offsets.len();
    let mut out = ComplexMatrix::zeros(d, d);
    let (ps, ph) = (psi.amplitudes(), phi.amplitudes());
    let mut left = vec![ZERO; d];
    let mut right = vec![ZERO; d];
    for base in (0..ps.len()).filter(|b| b & mask == 0) {
        for (j, off) in offsets.iter().enumerate() {
            left[j] = ps[base + off];
            right[j] = ph[base + off].conj();
        }
        let data = out.as_mut_slice();
        for a in 0..d {
            let l = left[a];
            for b in 0..d {
                data[a * d + b] += l * right[b];
            }
        }
    }
    Ok(out)
}

/// Reduction of a dense `2^n x 2^n` matrix to the qubits in `support`.
pub fn partial_trace_dense(m: &ComplexMatrix, support: &QubitSupport) -> Result<ComplexMatrix> {
    if !m.is_square() || !m.rows().is_power_of_two() {
        return Err(Error::Shape(format!(
            "expected a square 2^n matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows().trailing_zeros() as usize;
    support.check_fits(n)?;
    let (offsets, mask) = support.offsets(n);
    let d = offsets.len();
    let mut out = ComplexMatrix::zeros(d, d);
    for base in (0..m.rows()).filter(|b| b & mask == 0) {
        for a in 0..d {
            for b in 0..d {
                out[(a, b)] += m[(base + offsets[a], base + offsets[b])];
            }
        }
    }
    Ok(out)
}

/// `a ≈_mu b`, i.e. `|a - b| <= mu`.
pub fn approx_eq(a: C64, b: C64, mu: f64) -> Result<bool> {
    if !(mu >= 0.0) {
        return Err(Error::Parameter(format!("tolerance must be nonnegative, got {mu}")));
    }
    Ok((a - b).norm() <= mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn approx_eq_definition() {
        assert!(approx_eq(c(1.0, 0.0), c(1.0, 0.0), 0.0).unwrap());
        assert!(!approx_eq(c(1.0, 0.0), c(1.0, 2e-3), 1e-3).unwrap());
        assert!(approx_eq(c(0.5, 0.0), c(0.5005, 0.0), 1e-3).unwrap());
        assert!(matches!(
            approx_eq(ONE, ONE, -1.0),
            Err(Error::Parameter(_))
        ));
        assert!(approx_eq(ONE, ONE, f64::NAN).is_err());
    }

    #[test]
    fn basic_matrix_identities() {
        assert!((ComplexMatrix::identity(8).frobenius_norm() - 8f64.sqrt()).abs() < 1e-15);
        let ket0 = [ONE, ZERO];
        let ket1 = [ZERO, ONE];
        assert_eq!(ComplexMatrix::outer(&ket0, &ket1).trace().unwrap(), ZERO);
        let m = ComplexMatrix::from_fn(3, 2, |r, c2| c(r as f64, c2 as f64 - 0.5));
        assert_eq!(m.dagger().dagger(), m);
        assert!(m.trace().is_err());
        assert!(m.matmul(&m).is_err());
        assert_eq!(
            ComplexMatrix::unvectorize(3, 2, &m.vectorize()).unwrap(),
            m
        );
    }

    #[test]
    fn shape_errors() {
        assert!(ComplexMatrix::new(2, 2, vec![ONE; 3]).is_err());
        let a = ComplexMatrix::identity(2);
        let b = ComplexMatrix::identity(3);
        assert!(a.add(&b).is_err());
        assert!(a.inner(&b).is_err());
        assert!(embed_local(&a, &QubitSupport::new(vec![0, 1, 2], 3).unwrap(), 3).is_err());
    }

    #[test]
    fn support_validation() {
        assert!(QubitSupport::new(vec![0, 1, 1], 4).is_err());
        assert!(QubitSupport::new(vec![0, 4], 4).is_err());
        let s = QubitSupport::new(vec![0, 1, 5], 6).unwrap();
        let err = embed_local(&ComplexMatrix::identity(8), &s, 4).unwrap_err();
        assert!(matches!(err, Error::InvalidSupport(_)));
    }

    #[test]
    fn identity_gate_is_identity() {
        let s = QubitSupport::new(vec![3, 0, 2], 4).unwrap();
        let op = embed_local(&ComplexMatrix::identity(8), &s, 4).unwrap();
        let v: Vec<C64> = (0..16).map(|i| c(i as f64, -(i as f64) / 3.0)).collect();
        assert_eq!(op.apply(&v).unwrap(), v);
    }

    #[test]
    fn x_on_first_qubit_flips_msb() {
        let x = ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap();
        let gate = x.kron(&ComplexMatrix::identity(4));
        let s = QubitSupport::new(vec![0, 1, 2], 3).unwrap();
        let op = embed_local(&gate, &s, 3).unwrap();
        let mut st = StateVector::zero_state(3);
        st.apply(&op).unwrap();
        assert_eq!(st, StateVector::basis_state(3, 0b100));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let psi = StateVector::zero_state(2);
        let s = QubitSupport::new(vec![0], 2).unwrap();
        let r = partial_trace_rank_one(&psi, &psi, &s).unwrap();
        let expected = ComplexMatrix::outer(&[ONE, ZERO], &[ONE, ZERO]);
        assert_eq!(r, expected);

        let psi3 = StateVector::zero_state(3);
        let full = QubitSupport::new(vec![0, 1, 2], 3).unwrap();
        let r3 = partial_trace_rank_one(&psi3, &psi3, &full).unwrap();
        let mut e3 = ComplexMatrix::zeros(8, 8);
        e3[(0, 0)] = ONE;
        assert_eq!(r3, e3);
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let s = QubitSupport::new(vec![0], 2).unwrap();
        let err = partial_trace_rank_one(&StateVector::zero_state(2), &StateVector::zero_state(3), &s);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn dense_and_rank_one_reductions_agree_on_small_case() {
        let psi = StateVector::from_amplitudes((0..8).map(|i| c(i as f64, 1.0)).collect()).unwrap();
        let phi = StateVector::from_amplitudes((0..8).map(|i| c(1.0, -(i as f64))).collect()).unwrap();
        let s = QubitSupport::new(vec![2, 0], 3).unwrap();
        let dense = ComplexMatrix::outer(psi.amplitudes(), phi.amplitudes());
        let a = partial_trace_rank_one(&psi, &phi, &s).unwrap();
        let b = partial_trace_dense(&dense, &s).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }
}
