// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Small dense complex linear algebra on top of `nalgebra`.
//!
//! Every matrix in this crate is at most 8x8, so nothing here tries to be
//! clever about allocation or sparsity.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// max |M - M^dagger|
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.adjoint()))
}

/// max |M^dagger M - 1|
pub fn unitary_deviation(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Eigen-decomposition of a hermitian matrix with a reproducible basis.
///
/// Values are ascending. Each eigenvector has its largest component real and
/// positive (lowest index wins ties). Inside an exactly degenerate cluster the
/// basis is rotated to diagonalize the basis-index operator, so a degenerate
/// eigenspace spanned by product states comes back as those product states.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// Ranges of indices whose eigenvalues agree within `tol`.
    pub fn clusters(&self, tol: f64) -> Vec<Range<usize>> {
        clusters(&self.values, tol)
    }
}

/// Degeneracy tolerance used for a hermitian matrix of the given scale.
pub fn degeneracy_tol(h: &CMatrix) -> f64 {
    1e-10 * max_abs(h).max(1e-300)
}

pub fn clusters(sorted: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=sorted.len() {
        if k == sorted.len() || (sorted[k] - sorted[k - 1]).abs() > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

pub fn eigh(h: &CMatrix) -> Eigh {
    let n = h.nrows();
    let sym = (h + h.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }

    let tol = degeneracy_tol(h);
    for range in clusters(&values, tol) {
        if range.len() < 2 {
            continue;
        }
        let block = vectors.columns(range.start, range.len()).into_owned();
        let index_op = CMatrix::from_diagonal(&CVector::from_iterator(
            n,
            (0..n).map(|k| c(k as f64)),
        ));
        let restricted = block.adjoint() * index_op * &block;
        let inner = SymmetricEigen::new((&restricted + restricted.adjoint()) * c(0.5));
        let mut inner_order: Vec<usize> = (0..range.len()).collect();
        inner_order.sort_by(|&a, &b| inner.eigenvalues[a].total_cmp(&inner.eigenvalues[b]));
        let rotated = &block * &inner.eigenvectors;
        let mean = range.clone().map(|k| values[k]).sum::<f64>() / range.len() as f64;
        for (offset, &src) in inner_order.iter().enumerate() {
            vectors.set_column(range.start + offset, &rotated.column(src));
            values[range.start + offset] = mean;
        }
    }

    for k in 0..n {
        let mut col = vectors.column(k).into_owned();
        canonical_phase(&mut col);
        vectors.set_column(k, &col);
    }
    Eigh { values, vectors }
}

/// Rotate the global phase so the largest component is real and positive.
pub fn canonical_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (k, z) in v.iter().enumerate() {
        if z.norm() > best_norm + 1e-12 {
            best = k;
            best_norm = z.norm();
        }
    }
    if best_norm > 0.0 {
        let phase = v[best] / v[best].norm();
        *v /= phase;
    }
}

/// Spectral norm of a hermitian matrix.
pub fn hermitian_norm(h: &CMatrix) -> f64 {
    if h.nrows() == 0 {
        return 0.0;
    }
    eigh(h).values.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// `f(H)` for hermitian `H` through its eigen-decomposition.
pub fn hermitian_function(h: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let eig = eigh(h);
    let diag = CVector::from_iterator(eig.dim(), eig.values.iter().map(|&v| f(v)));
    &eig.vectors * CMatrix::from_diagonal(&diag) * eig.vectors.adjoint()
}

/// exp(-i H t)
pub fn propagator(h: &CMatrix, t: f64) -> CMatrix {
    hermitian_function(h, |e| C64::from_polar(1.0, -e * t))
}

/// Closest unitary (in Frobenius norm) to a square matrix: U V^dagger from its SVD.
/// Rectangular input gives the closest isometry.
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    u * v_t
}

/// `base^exponent` by repeated squaring.
pub fn matrix_power(base: &CMatrix, mut exponent: u64) -> CMatrix {
    let n = base.nrows();
    let mut result = CMatrix::identity(n, n);
    let mut square = base.clone();
    while exponent > 0 {
        if exponent & 1 == 1 {
            result = &square * &result;
        }
        exponent >>= 1;
        if exponent > 0 {
            square = &square * &square;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (&a + a.adjoint()) * c(0.5)
    }

    #[test]
    fn eigh_reconstructs() {
        let h = random_hermitian(6, 3);
        let e = eigh(&h);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(6, e.values.iter().map(|&v| c(v))));
        let back = &e.vectors * d * e.vectors.adjoint();
        assert!(max_abs(&(back - &h)) < 1e-12);
        assert!(unitary_deviation(&e.vectors) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn degenerate_cluster_resolves_to_basis_states() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(1.0), c(1.0), c(-2.0)]));
        let e = eigh(&h);
        assert_eq!(e.clusters(1e-9), vec![0..1, 1..4]);
        for (col, basis) in [(1, 0), (2, 1), (3, 2)] {
            assert!((e.vectors[(basis, col)] - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn propagator_is_unitary_and_composes() {
        let h = random_hermitian(4, 9);
        let u1 = propagator(&h, 0.3);
        let u2 = propagator(&h, 0.5);
        assert!(unitary_deviation(&u1) < 1e-12);
        assert!(max_abs(&(&u2 * &u1 - propagator(&h, 0.8))) < 1e-12);
    }

    #[test]
    fn matrix_power_matches_repeated_product() {
        let u = propagator(&random_hermitian(3, 1), 0.7);
        let mut expect = CMatrix::identity(3, 3);
        for _ in 0..13 {
            expect = &u * expect;
        }
        assert!(max_abs(&(matrix_power(&u, 13) - expect)) < 1e-12);
    }

    #[test]
    fn polar_of_scaled_unitary_is_the_unitary() {
        let u = propagator(&random_hermitian(4, 5), 1.1);
        let p = polar_unitary(&(&u * c(0.3)));
        assert!(max_abs(&(p - u)) < 1e-12);
    }
}
