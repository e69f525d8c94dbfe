use nalgebra::{DMatrix, SymmetricEigen};

use super::CovarianceKernel;
use crate::{Error, Result};

/// Discrete Karhunen–Loève expansion `K(s, t) ≈ Σ ℓ_k h_k(s) h_k(t)` on a
/// uniform grid, with `h_k` orthonormal for `Δ Σ_i h(s_i) h'(s_i)`.
#[derive(Debug, Clone)]
pub struct KlDecomposition {
    pub grid: Vec<f64>,
    pub spacing: f64,
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Column `k` holds `h_k` on the grid.
    pub eigenfunctions: DMatrix<f64>,
}

impl KlDecomposition {
    /// `Σ_{k < terms} ℓ_k h_k h_kᵀ`.
    pub fn reconstruct(&self, terms: usize) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..terms.min(self.eigenvalues.len()) {
            let h = self.eigenfunctions.column(k);
            m += self.eigenvalues[k] * h * h.transpose();
        }
        m
    }

    /// Frobenius norm of `K(grid, grid)` minus the `terms`-term partial sum.
    pub fn residual_norm(&self, terms: usize) -> f64 {
        let tail: f64 = self
            .eigenvalues
            .iter()
            .skip(terms)
            .map(|l| (l / self.spacing).powi(2))
            .sum();
        tail.sqrt()
    }

    /// Smallest number of terms whose eigenvalues reach `fraction` of the
    /// total.
    pub fn terms_for(&self, fraction: f64) -> usize {
        let total: f64 = self.eigenvalues.iter().map(|l| l.max(0.0)).sum();
        let mut acc = 0.0;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            acc += l.max(0.0);
            if acc >= fraction * total {
                return k + 1;
            }
        }
        self.eigenvalues.len()
    }
}

/// Eigen-decomposition of the `Δ`-weighted grid kernel `Δ·K(grid, grid)`.
pub fn kl_decompose(kernel: &CovarianceKernel, grid: &[f64]) -> Result<KlDecomposition> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "KL decomposition needs at least two grid points".into(),
        ));
    }
    let spacing = grid[1] - grid[0];
    let uniform = spacing > 0.0
        && grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - spacing).abs() <= 1e-9 * spacing);
    if !uniform {
        return Err(Error::InvalidArgument(
            "KL decomposition needs a uniform increasing grid".into(),
        ));
    }
    let eig = SymmetricEigen::new(kernel.matrix(grid) * spacing);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let norm = 1.0 / spacing.sqrt();
    let mut h = DMatrix::zeros(grid.len(), grid.len());
    for (k, &src) in order.iter().enumerate() {
        h.set_column(k, &(eig.eigenvectors.column(src) * norm));
    }
    Ok(KlDecomposition {
        grid: grid.to_vec(),
        spacing,
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenfunctions: h,
    })
}
