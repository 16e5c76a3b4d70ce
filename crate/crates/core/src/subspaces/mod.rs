//! Haar-random rotations and subspaces, the randomized `A_{n,k}(ε)`
//! experiment, and exchangeable-pair diagnostics.

mod ank;
mod pairs;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::batch::Vector;
use crate::error::{domain, Result};
use crate::rng::stream_rng;

pub use ank::{estimate_ank, write_ank_csv, AnkEstimate, AnkParams};
pub use pairs::{
    analyze_pairs, reflection_pair_diagnostics, reflection_pair_diagnostics_stream,
    rotation_limit_slope, rotation_pair_diagnostics, rotation_pair_diagnostics_stream,
    stein_rr_assemble, stein_rr_bound, stein_rr_bound_bounded, PairDiagnostics, RotationRatios,
    STEIN_THIRD_CONSTANT,
};

/// An `n × n` orthogonal matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalMatrix {
    n: usize,
    entries: Vec<f64>,
    seed: u64,
}

impl OrthogonalMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    /// `‖QᵀQ − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let q = self.to_matrix();
        (q.tr_mul(&q) - DMatrix::identity(self.n, self.n)).norm()
    }

    pub fn determinant(&self) -> f64 {
        self.to_matrix().determinant()
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// columns of `Q` flipped so that `diag(R) > 0`.
pub fn haar_orthogonal(n: usize, seed: u64) -> Result<OrthogonalMatrix> {
    if n < 2 {
        return domain(format!("dimension must be >= 2, got {n}"));
    }
    let mut rng = stream_rng(seed, 0);
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        entries.extend(q.row(i).iter());
    }
    Ok(OrthogonalMatrix { n, entries, seed })
}

/// A `k`-dimensional subspace of `ℝⁿ` with an orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    n: usize,
    k: usize,
    /// `k` rows of length `n`.
    basis: Vec<f64>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn basis_vector(&self, i: usize) -> &[f64] {
        &self.basis[i * self.n..(i + 1) * self.n]
    }

    pub fn basis(&self) -> std::slice::ChunksExact<'_, f64> {
        self.basis.chunks_exact(self.n)
    }

    /// `Σ cᵢ bᵢ` for coefficients `c ∈ ℝᵏ`.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (b, &c) in self.basis().zip(coeffs) {
            for (o, x) in out.iter_mut().zip(b) {
                *o += c * x;
            }
        }
        out
    }

    /// Unit vector along `Σ cᵢ bᵢ`.
    pub fn direction(&self, coeffs: &[f64]) -> Result<Vector> {
        Vector::new(self.combine(coeffs))?.normalized()
    }

    /// `max |⟨bᵢ, bⱼ⟩ − δᵢⱼ|`.
    pub fn gram_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.basis().enumerate() {
            for (j, b) in self.basis().enumerate() {
                let g: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// The span of the first `k` rows of a Haar orthogonal matrix.
pub fn random_subspace(n: usize, k: usize, seed: u64) -> Result<Subspace> {
    if k == 0 || k > n {
        return domain(format!("subspace rank must lie in 1..={n}, got {k}"));
    }
    let q = haar_orthogonal(n, seed)?;
    Ok(Subspace {
        n,
        k,
        basis: q.entries[..k * n].to_vec(),
    })
}
