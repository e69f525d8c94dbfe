use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use super::CovarianceKernel;
use crate::{Error, Result};

/// Largest grid accepted by the dense factorization.
pub const MAX_GRID: usize = 4096;

const JITTER_START: f64 = 1e-14;
const JITTER_MAX: f64 = 1e-8;

/// Exact sampler of `(Z(s))_{s ∈ grid}` through a Cholesky factor of
/// `K(grid, grid)`.
#[derive(Debug, Clone)]
pub struct GaussianPathSampler {
    grid: Vec<f64>,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl GaussianPathSampler {
    pub fn new(kernel: &CovarianceKernel, grid: &[f64]) -> Result<Self> {
        if grid.len() > MAX_GRID {
            return Err(Error::InvalidArgument(format!(
                "grid has {} points, at most {MAX_GRID} supported",
                grid.len()
            )));
        }
        let (factor, jitter) = factorize(kernel.matrix(grid))?;
        Ok(GaussianPathSampler {
            grid: grid.to_vec(),
            factor,
            jitter,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Diagonal jitter, relative to `trace / dim`, that made the matrix
    /// factorizable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.grid.len();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..=i).map(|j| self.factor[(i, j)] * z[j]).sum();
        }
    }
}

fn factorize(m: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let dim = m.nrows();
    if dim == 0 {
        return Ok((m, 0.0));
    }
    let trace = m.trace();
    if trace <= 0.0 {
        if m.iter().all(|&v| v == 0.0) {
            return Ok((m, 0.0));
        }
        return Err(Error::NotPsd);
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c.l(), 0.0));
    }
    let scale = trace / dim as f64;
    let mut eps = JITTER_START;
    while eps <= JITTER_MAX * (1.0 + 1e-12) {
        let mut jittered = m.clone();
        for i in 0..dim {
            jittered[(i, i)] += eps * scale;
        }
        if let Some(c) = Cholesky::new(jittered) {
            return Ok((c.l(), eps));
        }
        eps *= 2.0;
    }
    Err(Error::NotPsd)
}

/// `count` independent draws of `Z` on `grid`, one row per draw.
pub fn sample_paths<R: Rng + ?Sized>(
    kernel: &CovarianceKernel,
    grid: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let sampler = GaussianPathSampler::new(kernel, grid)?;
    let mut out = DMatrix::zeros(count, grid.len());
    let mut row = vec![0.0; grid.len()];
    for r in 0..count {
        sampler.sample_into(rng, &mut row);
        for (c, v) in row.iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    Ok(out)
}
