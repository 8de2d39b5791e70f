//! Brute-force dense reference implementations for the integration tests.
//! Everything here works on full `2^n x 2^n` matrices and avoids the
//! library's index arithmetic.
#![allow(dead_code)]

use lscc::circuit::{Circuit, RoundUnitary};
use lscc::numerics::ComplexMatrix;
use lscc::seeding::Rng;
use lscc::C64;
use rand::Rng as _;
use rand_distr::StandardNormal;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_vector(dim: usize, rng: &mut Rng) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Bit of qubit `q` in basis index `i` (qubit 0 is the most significant).
fn bit(i: usize, q: usize, n: usize) -> usize {
    (i >> (n - 1 - q)) & 1
}

/// Permutation matrix taking the qubit order `order` (a permutation of
/// `0..n`, most significant first) to the standard order.
fn reorder(order: &[usize], n: usize) -> ComplexMatrix {
    let dim = 1 << n;
    let mut p = ComplexMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut std = 0;
        for (pos, &q) in order.iter().enumerate() {
            std |= bit(j, pos, n) << (n - 1 - q);
        }
        p[(std, j)] = C64::new(1.0, 0.0);
    }
    p
}

/// `gate` on `support`, identity elsewhere, as a dense matrix: the
/// Kronecker product `gate ⊗ I` in the order (support, rest) conjugated by
/// the qubit permutation.
pub fn dense_embed(gate: &ComplexMatrix, support: &[usize], n: usize) -> ComplexMatrix {
    let rest: Vec<usize> = (0..n).filter(|q| !support.contains(q)).collect();
    let order: Vec<usize> = support.iter().chain(&rest).copied().collect();
    let p = reorder(&order, n);
    let local = gate.kron(&ComplexMatrix::identity(1 << rest.len()));
    p.matmul(&local).unwrap().matmul(&p.transpose()).unwrap()
}

/// `Tr_rest(m)` by summing over every complement basis state.
pub fn dense_partial_trace(m: &ComplexMatrix, support: &[usize], n: usize) -> ComplexMatrix {
    let k = support.len();
    let rest: Vec<usize> = (0..n).filter(|q| !support.contains(q)).collect();
    let index = |a: usize, e: usize| {
        let mut i = 0;
        for (pos, &q) in support.iter().enumerate() {
            i |= ((a >> (k - 1 - pos)) & 1) << (n - 1 - q);
        }
        for (pos, &q) in rest.iter().enumerate() {
            i |= ((e >> (rest.len() - 1 - pos)) & 1) << (n - 1 - q);
        }
        i
    };
    ComplexMatrix::from_fn(1 << k, 1 << k, |a, b| {
        (0..1usize << rest.len())
            .map(|e| m[(index(a, e), index(b, e))])
            .sum()
    })
}

pub fn dense_gate(c: &Circuit, i: usize) -> ComplexMatrix {
    let g = c.gate(i);
    dense_embed(g.unitary(), g.support().indices(), c.num_qubits())
}

pub fn dense_round(u: &RoundUnitary, n: usize) -> ComplexMatrix {
    dense_embed(&u.local(), u.support().indices(), n)
}

/// `B = G_T ··· G_1`.
pub fn dense_circuit(c: &Circuit) -> ComplexMatrix {
    let n = c.num_qubits();
    (1..=c.num_gates()).fold(ComplexMatrix::identity(1 << n), |acc, i| {
        dense_gate(c, i).matmul(&acc).unwrap()
    })
}

/// Honest `M_i`: `U_i···U_1 |0><0| G_T···G_{i+1}` reduced onto the support of
/// `g_{i+1}` (of `g_T` when `i = T`).
pub fn dense_honest_message(c: &Circuit, us: &[RoundUnitary], i: usize) -> ComplexMatrix {
    let n = c.num_qubits();
    let t = c.num_gates();
    let dim = 1 << n;
    let mut left = ComplexMatrix::zeros(dim, dim);
    left[(0, 0)] = C64::new(1.0, 0.0);
    for u in &us[..i] {
        left = dense_round(u, n).matmul(&left).unwrap();
    }
    let mut right = ComplexMatrix::identity(dim);
    for j in (i + 1)..=t {
        right = dense_gate(c, j).matmul(&right).unwrap();
    }
    let a = left.matmul(&right).unwrap();
    let support = c.gate((i + 1).min(t)).support().indices().to_vec();
    dense_partial_trace(&a, &support, n)
}
