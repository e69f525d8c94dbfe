use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::laws::{ArrivalMeasure, RenewalLaw, ServiceDistribution};
use crate::numerics::integrate_with_breaks;
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Part {
    Full,
    Departed,
    Staying,
    Initial,
}

#[derive(Clone)]
enum Kind {
    Mgi {
        part: Part,
        arrival: ArrivalMeasure,
        service: ServiceDistribution,
        x: f64,
        initial: ServiceDistribution,
    },
    Gigi {
        ratio: f64,
        service: ServiceDistribution,
    },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

/// Covariance function `K(s₁, s₂)` of a centred Gaussian process on `[0, T]`.
#[derive(Clone)]
pub struct CovarianceKernel {
    kind: Kind,
}

impl fmt::Debug for CovarianceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Mgi {
                part, service, x, ..
            } => {
                write!(
                    f,
                    "CovarianceKernel::Mgi({part:?}, {}, x={x})",
                    service.name()
                )
            }
            Kind::Gigi { ratio, service } => {
                write!(
                    f,
                    "CovarianceKernel::Gigi(m²/v²={ratio}, {})",
                    service.name()
                )
            }
            Kind::Custom(_) => f.write_str("CovarianceKernel::Custom"),
        }
    }
}

/// `∫₀^{s₁} (1 − G(s₂ − t)) α(dt)` for `s₁ ≤ s₂`.
fn survival_integral(arrival: &ArrivalMeasure, g: &ServiceDistribution, s1: f64, s2: f64) -> f64 {
    let c = s1.min(arrival.horizon());
    let mut v = 0.0;
    if arrival.rate() > 0.0 && c > 0.0 {
        v += arrival.rate() * (g.integrated_survival(s2) - g.integrated_survival(s2 - c));
    }
    for &(t, w) in arrival.atoms() {
        if t <= c {
            v += w * g.survival(s2 - t);
        }
    }
    v
}

/// `∫_{a}^{b} (1 − G(u))(1 − G(u + d)) du` with `d ≥ 0`.
fn survival_product(g: &ServiceDistribution, a: f64, b: f64, d: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    match *g {
        ServiceDistribution::Exponential { rate } => {
            (-rate * d).exp() * ((-2.0 * rate * a).exp() - (-2.0 * rate * b).exp()) / (2.0 * rate)
        }
        ServiceDistribution::Deterministic { value } => ((value - d).min(b) - a).max(0.0),
        ServiceDistribution::Never => b - a,
        _ => {
            let breaks: Vec<f64> = g.breakpoints().iter().flat_map(|&p| [p, p - d]).collect();
            integrate_with_breaks(
                |u| g.survival(u) * g.survival(u + d),
                a,
                b,
                &breaks,
                QUAD_TOL,
            )
            .value
        }
    }
}

/// `∫₀^{s₁} (1 − G(s₁ − t))(1 − G(s₂ − t)) α(dt)` for `s₁ ≤ s₂`.
fn product_integral(arrival: &ArrivalMeasure, g: &ServiceDistribution, s1: f64, s2: f64) -> f64 {
    let c = s1.min(arrival.horizon());
    let mut v = 0.0;
    if arrival.rate() > 0.0 && c > 0.0 {
        v += arrival.rate() * survival_product(g, s1 - c, s1, s2 - s1);
    }
    for &(t, w) in arrival.atoms() {
        if t <= c {
            v += w * g.survival(s1 - t) * g.survival(s2 - t);
        }
    }
    v
}

fn unit_lebesgue() -> ArrivalMeasure {
    ArrivalMeasure::new(f64::INFINITY, 1.0, Vec::new()).expect("unit density on [0, inf)")
}

impl CovarianceKernel {
    pub fn from_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        CovarianceKernel {
            kind: Kind::Custom(Arc::new(f)),
        }
    }

    /// `K(s₁, s₂) = min(s₁, s₂)`.
    pub fn brownian() -> Self {
        Self::from_fn(f64::min)
    }

    pub fn zero() -> Self {
        Self::from_fn(|_, _| 0.0)
    }

    pub fn eval(&self, s1: f64, s2: f64) -> f64 {
        let (a, b) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        if a < 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Mgi {
                part,
                arrival,
                service,
                x,
                initial,
            } => {
                let k3 = || x * initial.cdf(a) * initial.survival(b);
                match part {
                    Part::Full => survival_integral(arrival, service, a, b) + k3(),
                    Part::Departed => {
                        survival_integral(arrival, service, a, b)
                            - product_integral(arrival, service, a, b)
                    }
                    Part::Staying => product_integral(arrival, service, a, b),
                    Part::Initial => k3(),
                }
            }
            Kind::Gigi { ratio, service } => {
                let leb = unit_lebesgue();
                let surv = survival_integral(&leb, service, a, b);
                let prod = product_integral(&leb, service, a, b);
                ratio * (surv - prod) + prod
            }
            Kind::Custom(f) => f(a, b),
        }
    }

    /// `E|Z(s) − Z(t)|² = K(s,s) + K(t,t) − 2K(s,t)`.
    pub fn increment_variance(&self, s: f64, t: f64) -> f64 {
        self.eval(s, s) + self.eval(t, t) - 2.0 * self.eval(s, t)
    }

    /// `K(grid, grid)`.
    pub fn matrix(&self, grid: &[f64]) -> DMatrix<f64> {
        let n = grid.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval(grid[i], grid[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// `(C, b)` with `E|Z(s) − Z(t)|² ≤ C|s − t|^b` for `|s − t| ≤ 1`, when
    /// the model's Hölder data provide one.
    pub fn continuity_constants(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::Mgi {
                part,
                arrival,
                x,
                initial,
                ..
            } => {
                let a = arrival.lipschitz_constant()?;
                let (beta, c) = if *x > 0.0 && *part != Part::Departed && *part != Part::Staying {
                    initial.holder()?
                } else {
                    (1.0, 0.0)
                };
                let poisson = if *part == Part::Initial { 0.0 } else { 2.0 * a };
                Some((poisson + x * c, beta.min(1.0)))
            }
            Kind::Gigi { ratio, .. } => Some((2.0 * ratio.max(1.0), 1.0)),
            Kind::Custom(_) => None,
        }
    }
}

/// Limit covariance of the M/GI queue:
/// `∫₀^{s₁} (1 − G(s₂ − t)) α(dt) + x G̃(s₁)(1 − G̃(s₂))` for `s₁ ≤ s₂`.
pub fn kernel_mgi(
    arrival: &ArrivalMeasure,
    service: &ServiceDistribution,
    x: f64,
    initial: &ServiceDistribution,
) -> CovarianceKernel {
    mgi_part(Part::Full, arrival, service, x, initial)
}

fn mgi_part(
    part: Part,
    arrival: &ArrivalMeasure,
    service: &ServiceDistribution,
    x: f64,
    initial: &ServiceDistribution,
) -> CovarianceKernel {
    CovarianceKernel {
        kind: Kind::Mgi {
            part,
            arrival: arrival.clone(),
            service: *service,
            x,
            initial: *initial,
        },
    }
}

/// The three independent parts of the M/GI limit:
/// customers that arrived and left by `s₁`, those still present at `s₁`,
/// and the initial customers.
pub fn decompose_mgi(
    arrival: &ArrivalMeasure,
    service: &ServiceDistribution,
    x: f64,
    initial: &ServiceDistribution,
) -> [CovarianceKernel; 3] {
    [
        mgi_part(Part::Departed, arrival, service, x, initial),
        mgi_part(Part::Staying, arrival, service, x, initial),
        mgi_part(Part::Initial, arrival, service, x, initial),
    ]
}

/// Limit covariance of the GI/GI queue:
/// `(m²/v²) ∫₀^{s₁} (1 − G(s₂ − t)) G(s₁ − t) dt + ∫₀^{s₁} (1 − G(s₁ − t))(1 − G(s₂ − t)) dt`.
pub fn kernel_gigi(law: &RenewalLaw, service: &ServiceDistribution) -> Result<CovarianceKernel> {
    if law.is_degenerate() {
        return Err(Error::DegenerateLaw);
    }
    Ok(CovarianceKernel {
        kind: Kind::Gigi {
            ratio: law.mean() * law.mean() / law.variance(),
            service: *service,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> ServiceDistribution {
        ServiceDistribution::exponential(1.0).unwrap()
    }

    #[test]
    fn mgi_examples() {
        let leb = ArrivalMeasure::lebesgue(1.0).unwrap();
        let k = kernel_mgi(&leb, &exp1(), 0.0, &exp1());
        let e1 = (-1.0f64).exp();
        assert!((k.eval(1.0, 1.0) - (1.0 - e1)).abs() < 1e-12);
        assert!((k.eval(0.5, 1.0) - e1 * (0.5f64.exp() - 1.0)).abs() < 1e-12);
        assert!((k.eval(1.0, 0.5) - k.eval(0.5, 1.0)).abs() == 0.0);

        let none = ArrivalMeasure::zero(1.0).unwrap();
        let k = kernel_mgi(&none, &exp1(), 1.0, &exp1());
        assert!((k.eval(1.0, 1.0) - (1.0 - e1) * e1).abs() < 1e-12);
    }

    #[test]
    fn components() {
        let leb = ArrivalMeasure::lebesgue(1.0).unwrap();
        let [k1, _, _] = decompose_mgi(&leb, &exp1(), 0.0, &exp1());
        let e = |x: f64| x.exp();
        let want = (1.0 - e(-1.0)) - (1.0 - e(-2.0)) / 2.0;
        assert!((k1.eval(1.0, 1.0) - want).abs() < 1e-12);

        let unif = ServiceDistribution::uniform(0.0, 1.0).unwrap();
        let [_, _, k3] = decompose_mgi(&leb, &exp1(), 1.0, &unif);
        for t in [0.1, 0.5, 0.9] {
            assert!((k3.eval(t, t) - t * (1.0 - t)).abs() < 1e-15);
        }
    }

    #[test]
    fn gigi_examples() {
        let law = RenewalLaw::uniform_int(1, 2).unwrap();
        let k = kernel_gigi(&law, &exp1()).unwrap();
        let e = |x: f64| x.exp();
        let want = 9.0 * ((1.0 - e(-1.0)) - (1.0 - e(-2.0)) / 2.0) + (1.0 - e(-2.0)) / 2.0;
        assert!((k.eval(1.0, 1.0) - want).abs() < 1e-12);

        let far = ServiceDistribution::deterministic(5.0).unwrap();
        let k = kernel_gigi(&law, &far).unwrap();
        for (a, b) in [(0.2, 0.7), (1.0, 1.0), (0.0, 0.4), (0.9, 0.3)] {
            assert!((k.eval(a, b) - f64::min(a, b)).abs() < 1e-14);
        }
        assert!(matches!(
            kernel_gigi(&RenewalLaw::constant(1).unwrap(), &exp1()),
            Err(Error::DegenerateLaw)
        ));
    }

    #[test]
    fn quadrature_branch_matches_closed_forms() {
        // Erlang(1, λ) is exponential but goes through the quadrature path.
        let leb = ArrivalMeasure::lebesgue(2.0).unwrap();
        let exp = ServiceDistribution::exponential(1.7).unwrap();
        let erl = ServiceDistribution::erlang(1, 1.7).unwrap();
        let ka = kernel_mgi(&leb, &exp, 0.0, &exp);
        let kb = kernel_mgi(&leb, &erl, 0.0, &erl);
        let [_, ka2, _] = decompose_mgi(&leb, &exp, 0.0, &exp);
        let [_, kb2, _] = decompose_mgi(&leb, &erl, 0.0, &erl);
        for (s, t) in [(0.3, 0.4), (1.0, 1.9), (1.5, 1.5), (2.0, 2.0)] {
            assert!((ka.eval(s, t) - kb.eval(s, t)).abs() < 1e-10);
            assert!((ka2.eval(s, t) - kb2.eval(s, t)).abs() < 1e-10);
        }
    }
}
