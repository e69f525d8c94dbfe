use std::io::Write;

use rand::RngCore;

use super::config::ExperimentConfig;
use super::model::{QueueModel, Scaled};
use crate::exec::{replication_rng, Execution, CHUNK_LEN};
use crate::gausslim::GaussianPathSampler;
use crate::numerics::{batch_means, wilson_interval, Estimate, MomentMatrix};
use crate::paths::sliding_range;
use crate::stein::{FiniteDimTestFunction, GaussianRule};
use crate::{Error, Result};

// Stream purposes, so that different experiments under one seed never share
// random numbers.
pub(crate) const GAP_STREAM: u64 = 1;
pub(crate) const GAP_Z_STREAM: u64 = 2;
pub(crate) const COV_STREAM: u64 = 3;
pub(crate) const COV_Z_STREAM: u64 = 4;
pub(crate) const TAIL_STREAM: u64 = 5;
pub(crate) const TAIL_Z_STREAM: u64 = 6;
pub(crate) const SIM_STREAM: u64 = 7;
pub(crate) const STEIN_STREAM: u64 = 8;
pub(crate) const PALM_STREAM: u64 = 9;

/// Seed of sub-experiment `(purpose, index)` under `seed`.
pub(crate) fn stream_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    replication_rng(seed, (purpose << 32) | index).next_u64()
}

/// Two-sided 95% normal quantile used for Wilson intervals.
const Z95: f64 = 1.959_963_984_540_054;

/// Tensor Gauss–Hermite nodes per dimension for `E g(Z)`, or `None` when
/// Monte Carlo is used instead.
fn hermite_nodes(k: usize) -> Option<usize> {
    match k {
        1 => Some(48),
        2 => Some(24),
        3 => Some(12),
        4 => Some(8),
        _ => None,
    }
}

fn grid_index(grid: &[f64], t: f64) -> Result<usize> {
    grid.iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or_else(|| Error::InvalidArgument(format!("instant {t} is not a grid point")))
}

/// `Ê g(X̃_n) − Ê g(Z)` at one ladder point.
#[derive(Debug, Clone, PartialEq)]
pub struct GapEstimate {
    pub n: u64,
    pub g_name: String,
    pub k: usize,
    /// `Ê g(X̃_n)` with batch-means SE.
    pub queue: Estimate,
    /// `E g(Z)` by quadrature (SE 0), or by Monte Carlo when `k > 4`.
    pub gaussian: Estimate,
    /// Independent Monte Carlo estimate of `E g(Z)`.
    pub gaussian_mc: Estimate,
    pub gap: Estimate,
}

impl GapEstimate {
    /// Whether the quadrature and Monte Carlo values of `E g(Z)` agree
    /// within `k` standard errors.
    pub fn gaussian_consistent(&self, k: f64) -> bool {
        let se = self.gaussian.se.hypot(self.gaussian_mc.se);
        (self.gaussian.value - self.gaussian_mc.value).abs() <= k * se
    }

    pub fn significant(&self, k: f64) -> bool {
        self.gap.value.abs() > k * self.gap.se
    }
}

/// Expectation gaps of every `g` at every ladder point, sharing one
/// replication set per `n`.
pub fn estimate_expectation_gap(
    config: &ExperimentConfig,
    gs: &[FiniteDimTestFunction],
    exec: Execution,
) -> Result<Vec<GapEstimate>> {
    config.validate()?;
    let seed = config.seed()?;
    let model = QueueModel::from_config(config)?;
    let kernel = model.kernel()?;
    let grid = config.grid.points()?;
    let reps = config.replications;

    let mut indices = Vec::with_capacity(gs.len());
    let mut limits = Vec::with_capacity(gs.len());
    for (j, g) in gs.iter().enumerate() {
        let idx = g
            .instants()
            .iter()
            .map(|&t| grid_index(&grid, t))
            .collect::<Result<Vec<_>>>()?;
        indices.push(idx);
        let sigma = kernel.matrix(g.instants());
        let mut rng = replication_rng(stream_seed(seed, GAP_Z_STREAM, j as u64), 0);
        let mc = GaussianRule::monte_carlo(&sigma, reps as usize, &mut rng)?.expect(|w| g.value(w));
        let quad = match hermite_nodes(g.dim()) {
            Some(nodes) => GaussianRule::hermite(&sigma, nodes)?.expect(|w| g.value(w)),
            None => mc,
        };
        limits.push((quad, mc));
    }

    let mut out = Vec::new();
    for (li, &n) in config.n.iter().enumerate() {
        let scaled = Scaled::new(&model, n, &grid)?;
        let rows = exec.replicate(stream_seed(seed, GAP_STREAM, li as u64), reps, |_, rng| {
            let path = scaled.path(rng)?;
            let x = path.centered();
            let mut w = Vec::new();
            Ok(gs
                .iter()
                .zip(&indices)
                .map(|(g, idx)| {
                    w.clear();
                    w.extend(idx.iter().map(|&i| x[i]));
                    g.value(&w)
                })
                .collect::<Vec<f64>>())
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        for (j, g) in gs.iter().enumerate() {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let queue = batch_means(&column, config.batches);
            let (gaussian, gaussian_mc) = limits[j];
            out.push(GapEstimate {
                n,
                g_name: g.name(),
                k: g.dim(),
                queue,
                gaussian,
                gaussian_mc,
                gap: Estimate {
                    value: queue.value - gaussian.value,
                    se: queue.se.hypot(gaussian.se),
                },
            });
        }
    }
    Ok(out)
}

/// Empirical covariance of `X̃_n` and of sampled `Z` on the covariance grid,
/// against the limit kernel.
#[derive(Debug, Clone)]
pub struct CovarianceCheck {
    pub n: u64,
    pub grid: Vec<f64>,
    /// Row-major `K(s_i, s_j)`.
    pub theory: Vec<f64>,
    pub queue: Vec<Estimate>,
    pub gaussian: Vec<Estimate>,
    pub se_multiplier: f64,
    pub bias_c: f64,
    /// `bias_c · n^{−1/2}`.
    pub allowance: f64,
    pub max_abs_diff: f64,
    /// Smallest `c` for which every queue entry passes.
    pub c_min: f64,
    pub pass: bool,
    /// Whether sampled `Z` matches the kernel within `se_multiplier` SE.
    pub gaussian_pass: bool,
}

impl CovarianceCheck {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "s1",
            "s2",
            "K_theory",
            "K_empirical_queue",
            "K_empirical_Z",
            "se",
        ])?;
        let d = self.grid.len();
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                w.write_record([
                    self.grid[i].to_string(),
                    self.grid[j].to_string(),
                    self.theory[k].to_string(),
                    self.queue[k].value.to_string(),
                    self.gaussian[k].value.to_string(),
                    self.queue[k].se.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn fold_moments<F>(
    exec: Execution,
    seed: u64,
    reps: u64,
    dim: usize,
    draw: F,
) -> Result<MomentMatrix>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, &mut [f64]) -> Result<()> + Sync + Send,
{
    let parts = exec.map_chunks(reps, CHUNK_LEN, |range| {
        let mut mm = MomentMatrix::new(dim);
        let mut buf = vec![0.0; dim];
        for idx in range {
            let mut rng = replication_rng(seed, idx);
            draw(&mut rng, &mut buf)?;
            mm.push(&buf);
        }
        Ok(mm)
    });
    let mut total = MomentMatrix::new(dim);
    for part in parts {
        total.merge(&part?);
    }
    Ok(total)
}

pub fn empirical_covariance(
    config: &ExperimentConfig,
    n: u64,
    exec: Execution,
) -> Result<CovarianceCheck> {
    config.validate()?;
    let seed = config.seed()?;
    let model = QueueModel::from_config(config)?;
    let kernel = model.kernel()?;
    let grid = config.covariance_grid()?;
    let d = grid.len();
    let reps = config.replications;
    let scaled = Scaled::new(&model, n, &grid)?;
    let queue_mm = fold_moments(
        exec,
        stream_seed(seed, COV_STREAM, n),
        reps,
        d,
        |rng, buf| {
            buf.copy_from_slice(scaled.path(rng)?.centered());
            Ok(())
        },
    )?;
    let sampler = GaussianPathSampler::new(&kernel, &grid)?;
    let z_mm = fold_moments(
        exec,
        stream_seed(seed, COV_Z_STREAM, 0),
        reps,
        d,
        |rng, buf| {
            sampler.sample_into(rng, buf);
            Ok(())
        },
    )?;

    let tol = &config.tolerance;
    let sqrt_n = (n as f64).sqrt();
    let mut theory = Vec::with_capacity(d * d);
    let mut queue = Vec::with_capacity(d * d);
    let mut gaussian = Vec::with_capacity(d * d);
    let mut max_abs_diff: f64 = 0.0;
    let mut c_min: f64 = 0.0;
    let mut gaussian_pass = true;
    for i in 0..d {
        for j in 0..d {
            let k = kernel.eval(grid[i], grid[j]);
            let q = queue_mm.covariance(i, j);
            let z = z_mm.covariance(i, j);
            let diff = (q.value - k).abs();
            max_abs_diff = max_abs_diff.max(diff);
            c_min = c_min.max((diff - tol.se_multiplier * q.se).max(0.0) * sqrt_n);
            gaussian_pass &= z.within(k, tol.se_multiplier, 1e-12);
            theory.push(k);
            queue.push(q);
            gaussian.push(z);
        }
    }
    Ok(CovarianceCheck {
        n,
        grid,
        theory,
        queue,
        gaussian,
        se_multiplier: tol.se_multiplier,
        bias_c: tol.bias_c,
        allowance: tol.bias_c / sqrt_n,
        max_abs_diff,
        c_min,
        pass: c_min <= tol.bias_c,
        gaussian_pass,
    })
}

/// One cell of the modulus tail table: `P(ω(ε) ≥ θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusTailRow {
    /// `"queue"` or `"gaussian"`.
    pub source: &'static str,
    /// Ladder point; 0 for the Gaussian limit.
    pub n: u64,
    pub eps: f64,
    pub theta: f64,
    pub hits: u64,
    pub trials: u64,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn write_tail_csv<W: Write>(rows: &[ModulusTailRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "source", "n", "eps", "theta", "hits", "trials", "p", "ci_lo", "ci_hi",
    ])?;
    for r in rows {
        w.write_record([
            r.source.to_string(),
            r.n.to_string(),
            r.eps.to_string(),
            r.theta.to_string(),
            r.hits.to_string(),
            r.trials.to_string(),
            r.p.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Tail probabilities never increase in `θ` and never decrease in `ε`
/// within one source; checked on the hit counts.
pub fn tail_is_monotone(rows: &[ModulusTailRow]) -> bool {
    rows.iter().all(|a| {
        rows.iter()
            .filter(|b| b.source == a.source && b.n == a.n)
            .all(|b| !(b.eps <= a.eps && b.theta >= a.theta) || b.hits <= a.hits)
    })
}

fn tail_counts<F>(
    exec: Execution,
    seed: u64,
    reps: u64,
    eps: &[f64],
    theta: &[f64],
    path: F,
) -> Result<Vec<u64>>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<Vec<(f64, f64)>> + Sync + Send,
{
    let cells = eps.len() * theta.len();
    let parts = exec.map_chunks(reps, CHUNK_LEN, |range| {
        let mut hits = vec![0u64; cells];
        for idx in range {
            let mut rng = replication_rng(seed, idx);
            let points = path(&mut rng)?;
            for (a, &e) in eps.iter().enumerate() {
                let w = sliding_range(&points, e);
                for (b, &t) in theta.iter().enumerate() {
                    hits[a * theta.len() + b] += u64::from(w >= t);
                }
            }
        }
        Ok(hits)
    });
    let mut total = vec![0u64; cells];
    for part in parts {
        for (t, h) in total.iter_mut().zip(part?) {
            *t += h;
        }
    }
    Ok(total)
}

/// Empirical modulus tails of `X̃_n` at every ladder point and of `Z` on
/// the grid.
pub fn modulus_tail(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ModulusTailRow>> {
    config.validate()?;
    let seed = config.seed()?;
    let model = QueueModel::from_config(config)?;
    let grid = config.grid.points()?;
    let spacing = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if let Some(&e) = config
        .eps
        .iter()
        .find(|&&e| e < 4.0 * spacing * (1.0 - 1e-9))
    {
        return Err(Error::InvalidArgument(format!(
            "eps {e} is below four grid spacings ({spacing})"
        )));
    }
    let reps = config.replications;
    let (eps, theta) = (&config.eps, &config.theta);
    let table = |source: &'static str, n: u64, hits: Vec<u64>| {
        let mut rows = Vec::with_capacity(hits.len());
        for (a, &e) in eps.iter().enumerate() {
            for (b, &t) in theta.iter().enumerate() {
                let h = hits[a * theta.len() + b];
                let (lo, hi) = wilson_interval(h, reps, Z95);
                rows.push(ModulusTailRow {
                    source,
                    n,
                    eps: e,
                    theta: t,
                    hits: h,
                    trials: reps,
                    p: h as f64 / reps as f64,
                    lo,
                    hi,
                });
            }
        }
        rows
    };

    let mut out = Vec::new();
    for (li, &n) in config.n.iter().enumerate() {
        let scaled = Scaled::new(&model, n, &grid)?;
        let hits = tail_counts(
            exec,
            stream_seed(seed, TAIL_STREAM, li as u64),
            reps,
            eps,
            theta,
            |rng| Ok(scaled.path(rng)?.resolved()),
        )?;
        out.extend(table("queue", n, hits));
    }
    let sampler = GaussianPathSampler::new(&model.kernel()?, &grid)?;
    let hits = tail_counts(
        exec,
        stream_seed(seed, TAIL_Z_STREAM, 0),
        reps,
        eps,
        theta,
        |rng| {
            let z = sampler.sample(rng);
            Ok(grid.iter().copied().zip(z).collect())
        },
    )?;
    out.extend(table("gaussian", 0, hits));
    Ok(out)
}
