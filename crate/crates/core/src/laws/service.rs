use rand::Rng;

use crate::numerics::integrate_with_breaks;
use crate::{Error, Result};

/// Service-time law `G` on `[0, ∞]`.
///
/// `Never` is the point mass at `+∞`: the customer never leaves, so
/// `1 − G ≡ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServiceDistribution {
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Deterministic { value: f64 },
    Pareto { alpha: f64, scale: f64 },
    Erlang { shape: u32, rate: f64 },
    Never,
}

impl ServiceDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::Exponential { rate }.validated()
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::Uniform { lo, hi }.validated()
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        Self::Deterministic { value }.validated()
    }

    pub fn pareto(alpha: f64, scale: f64) -> Result<Self> {
        Self::Pareto { alpha, scale }.validated()
    }

    pub fn erlang(shape: u32, rate: f64) -> Result<Self> {
        Self::Erlang { shape, rate }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Self::Uniform { lo, hi } => lo >= 0.0 && hi > lo && hi.is_finite(),
            Self::Deterministic { value } => value >= 0.0 && value.is_finite(),
            Self::Pareto { alpha, scale } => alpha > 0.0 && scale > 0.0 && scale.is_finite(),
            Self::Erlang { shape, rate } => shape >= 1 && rate > 0.0 && rate.is_finite(),
            Self::Never => true,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidDistribution(format!("{self:?}")))
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Self::Exponential { rate } => format!("exp({rate})"),
            Self::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
            Self::Deterministic { value } => format!("deterministic({value})"),
            Self::Pareto { alpha, scale } => format!("pareto({alpha},{scale})"),
            Self::Erlang { shape, rate } => format!("erlang({shape},{rate})"),
            Self::Never => "never".into(),
        }
    }

    /// `G(t) = P(Y ≤ t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * t).exp_m1(),
            Self::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Deterministic { value } => {
                if t >= value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Pareto { alpha, scale } => {
                if t < scale {
                    0.0
                } else {
                    1.0 - (scale / t).powf(alpha)
                }
            }
            Self::Erlang { .. } => 1.0 - self.survival(t),
            Self::Never => 0.0,
        }
    }

    /// `1 − G(t) = P(Y > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * t).exp(),
            Self::Erlang { shape, rate } => {
                let x = rate * t;
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..shape {
                    term *= x / j as f64;
                    sum += term;
                }
                (sum * (-x).exp()).min(1.0)
            }
            Self::Never => 1.0,
            _ => 1.0 - self.cdf(t),
        }
    }

    /// Smallest `t` with `G(t) ≥ u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Deterministic { value } => value,
            Self::Pareto { alpha, scale } => scale * (1.0 - u).powf(-1.0 / alpha),
            Self::Erlang { .. } => self.quantile_bisect(u),
            Self::Never => f64::INFINITY,
        }
    }

    fn quantile_bisect(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        let mut hi = 1.0;
        while self.cdf(hi) < u {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Never => f64::INFINITY,
            _ => self.quantile(rng.random::<f64>()),
        }
    }

    /// Points where `G` is not smooth; used to split quadrature ranges.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Uniform { lo, hi } => vec![lo, hi],
            Self::Deterministic { value } => vec![value],
            Self::Pareto { scale, .. } => vec![scale],
            _ => Vec::new(),
        }
    }

    /// `∫₀^x (1 − G(u)) du`.
    pub fn integrated_survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * x).exp_m1() / rate,
            Self::Uniform { lo, hi } => {
                let a = x.min(lo);
                let b = x.clamp(lo, hi);
                a + (b - lo) - ((b - lo) * (b - lo)) / (2.0 * (hi - lo))
            }
            Self::Deterministic { value } => x.min(value),
            Self::Never => x,
            Self::Pareto { alpha, scale } => {
                if x <= scale {
                    x
                } else if (alpha - 1.0).abs() < 1e-12 {
                    scale + scale * (x / scale).ln()
                } else {
                    scale + scale / (1.0 - alpha) * ((x / scale).powf(1.0 - alpha) - 1.0)
                }
            }
            Self::Erlang { .. } => {
                integrate_with_breaks(|u| self.survival(u), 0.0, x, &[], 1e-13).value
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Deterministic { value } => value,
            Self::Pareto { alpha, scale } => {
                if alpha > 1.0 {
                    alpha * scale / (alpha - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::Erlang { shape, rate } => shape as f64 / rate,
            Self::Never => f64::INFINITY,
        }
    }

    /// Hölder exponent and constant of `G` on `[0, ∞)`, i.e.
    /// `|G(t) − G(s)| ≤ c |t − s|^β`; `None` when `G` has an atom.
    pub fn holder(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Exponential { rate } => Some((1.0, rate)),
            Self::Uniform { lo, hi } => Some((1.0, 1.0 / (hi - lo))),
            Self::Pareto { alpha, scale } => Some((1.0, alpha / scale)),
            Self::Erlang { shape, rate } => {
                let k = shape as f64;
                let density = if shape == 1 {
                    rate
                } else {
                    let mode = (k - 1.0) / rate;
                    rate * (rate * mode).powf(k - 1.0) * (-rate * mode).exp() / gamma_int(shape - 1)
                };
                Some((1.0, density))
            }
            Self::Never => Some((1.0, 0.0)),
            Self::Deterministic { .. } => None,
        }
    }

    /// Envelope `g_G(s)` with `G(t) − G(s) ≤ g_G(s)(t − s)^β` for `t ≥ s`, using
    /// the exponent from [`ServiceDistribution::holder`].
    pub fn envelope(&self, s: f64) -> Option<f64> {
        let s = s.max(0.0);
        match *self {
            Self::Exponential { rate } => Some(rate * (-rate * s).exp()),
            Self::Uniform { lo, hi } => Some(if s < hi { 1.0 / (hi - lo) } else { 0.0 }),
            Self::Pareto { alpha, scale } => {
                let at = s.max(scale);
                Some(alpha * scale.powf(alpha) / at.powf(alpha + 1.0))
            }
            Self::Never => Some(0.0),
            Self::Erlang { shape, rate } => {
                let mode = (shape as f64 - 1.0) / rate;
                if s <= mode {
                    self.holder().map(|h| h.1)
                } else {
                    let k = shape as f64;
                    Some(rate * (rate * s).powf(k - 1.0) * (-rate * s).exp() / gamma_int(shape - 1))
                }
            }
            Self::Deterministic { .. } => None,
        }
    }
}

fn gamma_int(k: u32) -> f64 {
    (1..=k).map(|j| j as f64).product()
}
