use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::FiniteDimTestFunction;
use crate::numerics::{gauss_hermite, gauss_legendre_unit, Estimate};
use crate::{Error, Result};

/// Square root `S` with `S Sᵀ = Σ`; rejects matrices with eigenvalues below
/// `−1e−10·trace`.
fn psd_root(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "covariance must be a non-empty square matrix".into(),
        ));
    }
    let asym = (sigma - sigma.transpose()).amax();
    let scale = sigma.amax().max(1e-300);
    if asym > 1e-12 * scale {
        return Err(Error::NotPsd);
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let trace = sigma.trace().abs();
    if eig
        .eigenvalues
        .iter()
        .any(|&l| l < -1e-10 * trace.max(1e-300))
    {
        return Err(Error::NotPsd);
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Weighted point set representing `E φ(Z)` for `Z ~ N(0, Σ)`: either a
/// Monte Carlo pool or a tensor Gauss–Hermite rule.
#[derive(Debug, Clone)]
pub struct GaussianRule {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    monte_carlo: bool,
}

impl GaussianRule {
    pub fn monte_carlo<R: Rng + ?Sized>(
        sigma: &DMatrix<f64>,
        draws: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if draws < 2 {
            return Err(Error::BudgetTooSmall(draws as u64));
        }
        let root = psd_root(sigma)?;
        let k = sigma.nrows();
        let mut points = Vec::with_capacity(draws * k);
        let mut xi = vec![0.0; k];
        for _ in 0..draws {
            for x in xi.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            for i in 0..k {
                points.push((0..k).map(|j| root[(i, j)] * xi[j]).sum());
            }
        }
        Ok(GaussianRule {
            dim: k,
            points,
            weights: vec![1.0 / draws as f64; draws],
            monte_carlo: true,
        })
    }

    /// Tensor Gauss–Hermite rule with `nodes` points per dimension.
    pub fn hermite(sigma: &DMatrix<f64>, nodes: usize) -> Result<Self> {
        let root = psd_root(sigma)?;
        let k = sigma.nrows();
        let total = nodes
            .checked_pow(k as u32)
            .filter(|&t| t <= 4_000_000)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("{nodes}^{k} Gauss-Hermite nodes is too many"))
            })?;
        let (x, w) = gauss_hermite(nodes);
        let mut points = Vec::with_capacity(total * k);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; k];
        for _ in 0..total {
            let weight: f64 = idx.iter().map(|&i| w[i]).product();
            for r in 0..k {
                points.push((0..k).map(|c| root[(r, c)] * x[idx[c]]).sum());
            }
            weights.push(weight);
            for d in idx.iter_mut() {
                *d += 1;
                if *d < nodes {
                    break;
                }
                *d = 0;
            }
        }
        Ok(GaussianRule {
            dim: k,
            points,
            weights,
            monte_carlo: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_monte_carlo(&self) -> bool {
        self.monte_carlo
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// `E φ(Z)`; the standard error is zero for deterministic rules.
    pub fn expect(&self, mut phi: impl FnMut(&[f64]) -> f64) -> Estimate {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..self.len() {
            let v = phi(self.point(i));
            sum += self.weights[i] * v;
            sum_sq += self.weights[i] * v * v;
        }
        let se = if self.monte_carlo {
            let n = self.len() as f64;
            ((sum_sq - sum * sum).max(0.0) / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Estimate { value: sum, se }
    }
}

/// `f_g` and its derivatives for `Z ~ N(0, Σ)`, by Gauss–Legendre quadrature
/// over `τ ∈ (0, 1)` and a fixed Gaussian rule reused at every node.
#[derive(Debug, Clone)]
pub struct SteinSolution {
    g: FiniteDimTestFunction,
    sigma: DMatrix<f64>,
    rule: GaussianRule,
    nodes: Vec<(f64, f64)>,
    coarse: Vec<(f64, f64)>,
    linear: Option<Vec<f64>>,
}

/// Both sides of the Stein equation at one point.
#[derive(Debug, Clone, Copy)]
pub struct SteinResidual {
    /// `A f_g(w)`.
    pub lhs: Estimate,
    /// `g(w) − E g(Z)`.
    pub rhs: Estimate,
    /// Per-draw estimate of `A f_g(w) − g(w) + E g(Z)`.
    pub residual: Estimate,
    /// Difference between the full and half Gauss–Legendre rules.
    pub quad_error: f64,
    /// `4·(SE + quadrature error)`.
    pub budget: f64,
    pub pass: bool,
}

fn nodes_of(n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre_unit(n);
    x.into_iter().zip(w).collect()
}

impl SteinSolution {
    pub fn new(
        g: &FiniteDimTestFunction,
        sigma: &DMatrix<f64>,
        rule: GaussianRule,
        quad_nodes: usize,
    ) -> Result<Self> {
        if sigma.nrows() != g.dim() || rule.dim() != g.dim() {
            return Err(Error::InvalidArgument(
                "covariance dimension does not match test function".into(),
            ));
        }
        psd_root(sigma)?;
        if quad_nodes < 2 {
            return Err(Error::InvalidArgument(
                "need at least two quadrature nodes".into(),
            ));
        }
        Ok(SteinSolution {
            g: g.clone(),
            sigma: sigma.clone(),
            rule,
            nodes: nodes_of(quad_nodes),
            coarse: nodes_of(quad_nodes / 2),
            linear: g.linear_coefficients(),
        })
    }

    /// Convenience constructor with a Monte Carlo pool of `mc_draws`.
    pub fn monte_carlo<R: Rng + ?Sized>(
        g: &FiniteDimTestFunction,
        sigma: &DMatrix<f64>,
        quad_nodes: usize,
        mc_draws: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let rule = GaussianRule::monte_carlo(sigma, mc_draws, rng)?;
        Self::new(g, sigma, rule, quad_nodes)
    }

    pub fn test_function(&self) -> &FiniteDimTestFunction {
        &self.g
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn rule(&self) -> &GaussianRule {
        &self.rule
    }

    fn shifted(w: &[f64], z: &[f64], tau: f64, out: &mut [f64]) {
        let c = (1.0 - tau * tau).sqrt();
        for ((o, a), b) in out.iter_mut().zip(w).zip(z) {
            *o = tau * a + c * b;
        }
    }

    /// `E g(Z)` from the rule.
    pub fn expected_g(&self) -> Estimate {
        self.rule.expect(|z| self.g.value(z))
    }

    /// `f_g(w) = −∫₀¹ (E g(τw + √(1−τ²) Z) − E g(Z)) / τ dτ`.
    pub fn value(&self, w: &[f64]) -> Estimate {
        if let Some(c) = &self.linear {
            return Estimate::exact(-c.iter().zip(w).map(|(a, b)| a * b).sum::<f64>());
        }
        let mut x = vec![0.0; w.len()];
        self.rule.expect(|z| {
            let gz = self.g.value(z);
            -self
                .nodes
                .iter()
                .map(|&(tau, wt)| {
                    Self::shifted(w, z, tau, &mut x);
                    wt * (self.g.value(&x) - gz) / tau
                })
                .sum::<f64>()
        })
    }

    /// `∇f_g(w) = −E ∫₀¹ ∇g(τw + √(1−τ²) Z) dτ`.
    pub fn gradient(&self, w: &[f64]) -> Vec<Estimate> {
        let k = w.len();
        if let Some(c) = &self.linear {
            return c.iter().map(|a| Estimate::exact(-a)).collect();
        }
        (0..k)
            .map(|i| {
                let mut x = vec![0.0; k];
                let mut grad = vec![0.0; k];
                self.rule.expect(|z| {
                    -self
                        .nodes
                        .iter()
                        .map(|&(tau, wt)| {
                            Self::shifted(w, z, tau, &mut x);
                            self.g.gradient(&x, &mut grad);
                            wt * grad[i]
                        })
                        .sum::<f64>()
                })
            })
            .collect()
    }

    /// `d₁ᵀ ∇²f_g(w) d₂` with `∇²f_g(w) = −E ∫₀¹ τ ∇²g(τw + √(1−τ²) Z) dτ`.
    pub fn hessian_form(&self, w: &[f64], d1: &[f64], d2: &[f64]) -> Estimate {
        if self.linear.is_some() {
            return Estimate::exact(0.0);
        }
        let nodes = self.nodes.clone();
        self.rule
            .expect(|z| self.hessian_form_at(&nodes, w, z, d1, d2))
    }

    fn hessian_form_at(
        &self,
        nodes: &[(f64, f64)],
        w: &[f64],
        z: &[f64],
        d1: &[f64],
        d2: &[f64],
    ) -> f64 {
        let k = w.len();
        let mut x = vec![0.0; k];
        let mut h = vec![0.0; k * k];
        -nodes
            .iter()
            .map(|&(tau, wt)| {
                Self::shifted(w, z, tau, &mut x);
                self.g.hessian(&x, &mut h);
                let mut form = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        form += d1[i] * h[i * k + j] * d2[j];
                    }
                }
                wt * tau * form
            })
            .sum::<f64>()
    }

    /// Full Hessian, row-major.
    pub fn hessian(&self, w: &[f64]) -> Vec<Estimate> {
        let k = w.len();
        let mut out = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let mut ei = vec![0.0; k];
                let mut ej = vec![0.0; k];
                ei[i] = 1.0;
                ej[j] = 1.0;
                out.push(self.hessian_form(w, &ei, &ej));
            }
        }
        out
    }

    /// `d₁ᵀ (∇²f_g(w₂) − ∇²f_g(w₁)) d₂` from common draws.
    pub fn hessian_increment(&self, w1: &[f64], w2: &[f64], d1: &[f64], d2: &[f64]) -> Estimate {
        if self.linear.is_some() {
            return Estimate::exact(0.0);
        }
        self.rule.expect(|z| {
            self.hessian_form_at(&self.nodes, w2, z, d1, d2)
                - self.hessian_form_at(&self.nodes, w1, z, d1, d2)
        })
    }

    /// `A f(w) = ⟨Σ, ∇²f(w)⟩ − w·∇f(w)` per draw, for the given τ rule.
    fn operator_at(&self, nodes: &[(f64, f64)], w: &[f64], z: &[f64]) -> f64 {
        let k = w.len();
        let mut x = vec![0.0; k];
        let mut grad = vec![0.0; k];
        let mut h = vec![0.0; k * k];
        nodes
            .iter()
            .map(|&(tau, wt)| {
                Self::shifted(w, z, tau, &mut x);
                self.g.gradient(&x, &mut grad);
                self.g.hessian(&x, &mut h);
                let mut trace = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        trace += self.sigma[(i, j)] * h[i * k + j];
                    }
                }
                let drift: f64 = w.iter().zip(&grad).map(|(a, b)| a * b).sum();
                wt * (drift - tau * trace)
            })
            .sum()
    }

    /// Characterizing operator `A f_g(w)` and the Stein-equation residual.
    pub fn operator(&self, w: &[f64]) -> SteinResidual {
        let gw = self.g.value(w);
        if let Some(c) = &self.linear {
            let lhs = c.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            let eg = self.g.value(&vec![0.0; w.len()]);
            return SteinResidual {
                lhs: Estimate::exact(lhs),
                rhs: Estimate::exact(gw - eg),
                residual: Estimate::exact(lhs - (gw - eg)),
                quad_error: 0.0,
                budget: 1e-12 * (1.0 + lhs.abs()),
                pass: (lhs - (gw - eg)).abs() <= 1e-12 * (1.0 + lhs.abs()),
            };
        }
        let lhs = self.rule.expect(|z| self.operator_at(&self.nodes, w, z));
        let eg = self.expected_g();
        let residual = self
            .rule
            .expect(|z| self.operator_at(&self.nodes, w, z) - gw + self.g.value(z));
        let coarse = self
            .rule
            .expect(|z| self.operator_at(&self.coarse, w, z) - gw + self.g.value(z));
        let quad_error = (residual.value - coarse.value).abs();
        let budget = 4.0 * (residual.se + quad_error) + 1e-12;
        SteinResidual {
            lhs,
            rhs: Estimate {
                value: gw - eg.value,
                se: eg.se,
            },
            residual,
            quad_error,
            budget,
            pass: residual.value.abs() <= budget,
        }
    }
}

/// `f_g(w)` with a fresh Monte Carlo pool.
pub fn stein_solution<R: Rng + ?Sized>(
    g: &FiniteDimTestFunction,
    sigma: &DMatrix<f64>,
    w: &[f64],
    quad_nodes: usize,
    mc_draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    Ok(SteinSolution::monte_carlo(g, sigma, quad_nodes, mc_draws, rng)?.value(w))
}

/// `A f_g(w)` with a fresh Monte Carlo pool, together with the residual
/// against `g(w) − E g(Z)`.
pub fn characterizing_operator<R: Rng + ?Sized>(
    g: &FiniteDimTestFunction,
    sigma: &DMatrix<f64>,
    w: &[f64],
    quad_nodes: usize,
    mc_draws: usize,
    rng: &mut R,
) -> Result<SteinResidual> {
    Ok(SteinSolution::monte_carlo(g, sigma, quad_nodes, mc_draws, rng)?.operator(w))
}

#[derive(Debug, Clone)]
pub struct DerivativeBoundReport {
    pub samples: usize,
    /// `1.5‖g‖_{M'}`.
    pub second_bound: f64,
    /// `‖g‖_M`.
    pub lipschitz_bound: f64,
    /// Largest `|d₁ᵀ∇²f(w)d₂| / (1.5‖g‖_{M'})`.
    pub max_second_ratio: f64,
    /// Largest `|d₁ᵀ(∇²f(w+w′) − ∇²f(w))d₂| / (‖g‖_M ‖w′‖)`.
    pub max_lipschitz_ratio: f64,
    /// Largest standard error among the estimates.
    pub max_se: f64,
    pub violations: usize,
    pub pass: bool,
}

fn unit_direction<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let mut d: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let i = rng.random_range(0..k);
    d[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    d
}

/// Probe the second-derivative bound `|D²f(w)[d₁, d₂]| ≤ 1.5‖g‖_{M'}` and the
/// Lipschitz bound `|D²f(w+w′)[d₁,d₂] − D²f(w)[d₁,d₂]| ≤ ‖g‖_M ‖w′‖` at
/// random points and sup-norm unit directions.
pub fn derivative_bound_check<R: Rng + ?Sized>(
    solution: &SteinSolution,
    sample_count: usize,
    rng: &mut R,
) -> DerivativeBoundReport {
    let g = solution.test_function();
    let k = g.dim();
    let second_bound = 1.5 * g.norm_m_prime();
    let lipschitz_bound = g.norm_m();
    let mut report = DerivativeBoundReport {
        samples: sample_count,
        second_bound,
        lipschitz_bound,
        max_second_ratio: 0.0,
        max_lipschitz_ratio: 0.0,
        max_se: 0.0,
        violations: 0,
        pass: true,
    };
    for _ in 0..sample_count {
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let shift: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5..0.5)).collect();
        let w2: Vec<f64> = w.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let d1 = unit_direction(k, rng);
        let d2 = unit_direction(k, rng);
        let h = solution.hessian_form(&w, &d1, &d2);
        let dh = solution.hessian_increment(&w, &w2, &d1, &d2);
        let step = shift.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        report.max_se = report.max_se.max(h.se).max(dh.se);
        if second_bound > 0.0 {
            report.max_second_ratio = report.max_second_ratio.max(h.value.abs() / second_bound);
        }
        if lipschitz_bound > 0.0 && step > 0.0 {
            report.max_lipschitz_ratio = report
                .max_lipschitz_ratio
                .max(dh.value.abs() / (lipschitz_bound * step));
        }
        let ok2 = h.value.abs() <= second_bound + 4.0 * h.se + 1e-12;
        let ok3 = dh.value.abs() <= lipschitz_bound * step + 4.0 * dh.se + 1e-12;
        if !(ok2 && ok3) {
            report.violations += 1;
        }
    }
    report.pass = report.violations == 0;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one(s: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, s)
    }

    #[test]
    fn linear_is_exact() {
        let g = FiniteDimTestFunction::linear(vec![1.0], vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = stein_solution(&g, &one(2.0), &[1.7], 64, 100, &mut rng).unwrap();
        assert_eq!(v.value, -1.7);
        let r = characterizing_operator(&g, &one(2.0), &[1.7], 64, 100, &mut rng).unwrap();
        assert!(r.pass && (r.lhs.value - 1.7).abs() < 1e-15);
    }

    #[test]
    fn constant_has_zero_solution() {
        let g = FiniteDimTestFunction::constant(vec![1.0], 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = stein_solution(&g, &one(1.0), &[0.3], 64, 100, &mut rng).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn square_closed_forms() {
        let g = FiniteDimTestFunction::square(vec![1.0], 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sol = SteinSolution::monte_carlo(&g, &one(1.0), 64, 50_000, &mut rng).unwrap();
        let v = sol.value(&[2.0]);
        assert!(v.within(-1.5, 3.0, 1e-9), "{v:?}");
        let r = sol.operator(&[2.0]);
        assert!(r.lhs.within(3.0, 4.0, 1e-9), "{r:?}");
        assert!(r.pass);
        let h = sol.hessian_form(&[0.4], &[1.0], &[1.0]);
        assert!((h.value + 1.0).abs() < 1e-9);
    }

    #[test]
    fn hermite_rule_moments() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let rule = GaussianRule::hermite(&s, 12).unwrap();
        assert!((rule.expect(|z| z[0] * z[1]).value - 0.3).abs() < 1e-12);
        assert!((rule.expect(|z| z[1] * z[1]).value - 0.5).abs() < 1e-12);
        let e = rule.expect(|z| (z[0] + z[1]).cos()).value;
        assert!((e - (-0.5f64 * 2.1).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_sigma() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            GaussianRule::monte_carlo(&s, 10, &mut rng),
            Err(Error::NotPsd)
        ));
    }
}
