use rand::Rng;

use crate::{Error, Result};

/// Tail mass dropped when an infinite-support law is made finite.
pub const TRUNCATION_MASS: f64 = 1e-12;
const MAX_SUPPORT: usize = 1 << 22;

/// Probability mass function on `{1, 2, …, K}`; `probs[k - 1] = P(X = k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidLaw("empty pmf".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidLaw(
                "pmf values must be finite and >= 0".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLaw(format!("pmf sums to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Pmf { probs, cdf })
    }

    /// `P(X = k)`, zero outside the support.
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.probs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest support point.
    pub fn max_value(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn moment(&self, order: i32) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * ((i + 1) as f64).powi(order))
            .sum()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.probs.len() - 1) + 1
    }
}

/// Integer-valued inter-arrival law `R` of the lattice renewal model.
///
/// Zero variance (`R ≡ 1`) is representable, because several lattice
/// identities are checked on it, but every operation that scales by the
/// variance rejects it.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalLaw {
    pmf: Pmf,
    mean: f64,
    variance: f64,
    moment_order: Option<u32>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl RenewalLaw {
    /// Law with `P(R = k) = probs[k - 1]`. `moment_order` is the largest
    /// finite moment order, or `None` when every moment is finite.
    pub fn from_pmf(probs: Vec<f64>, moment_order: Option<u32>) -> Result<Self> {
        let pmf = Pmf::new(probs)?;
        let g = pmf
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .fold(0, |acc, (i, _)| gcd(acc, i + 1));
        if g != 1 {
            return Err(Error::InvalidLaw(format!(
                "support is periodic with gcd {g}"
            )));
        }
        let mean = pmf.mean();
        let variance = (pmf.moment(2) - mean * mean).max(0.0);
        Ok(RenewalLaw {
            pmf,
            mean,
            variance,
            moment_order,
        })
    }

    /// Uniform on `{lo, …, hi}`.
    pub fn uniform_int(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || hi < lo {
            return Err(Error::InvalidLaw(format!(
                "uniform_int needs 1 <= lo <= hi, got {lo}..{hi}"
            )));
        }
        let w = 1.0 / (hi - lo + 1) as f64;
        let probs = (1..=hi).map(|k| if k >= lo { w } else { 0.0 }).collect();
        Self::from_pmf(probs, None)
    }

    /// `R ≡ value`; only `value = 1` is aperiodic.
    pub fn constant(value: usize) -> Result<Self> {
        if value == 0 {
            return Err(Error::InvalidLaw("constant law needs value >= 1".into()));
        }
        let mut probs = vec![0.0; value];
        probs[value - 1] = 1.0;
        Self::from_pmf(probs, None)
    }

    /// Geometric on `{1, 2, …}` with success probability `p`, truncated once
    /// the remaining tail mass drops below [`TRUNCATION_MASS`].
    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidLaw(format!(
                "geometric needs p in (0, 1], got {p}"
            )));
        }
        let mut probs = Vec::new();
        let mut tail = 1.0;
        while tail > TRUNCATION_MASS && probs.len() < MAX_SUPPORT {
            let pk = tail * p;
            probs.push(pk);
            tail -= pk;
        }
        Self::from_pmf(normalise(probs), None)
    }

    /// Zeta-type law `P(R = k) ∝ k^(-s)`, with finite moments of order
    /// `r < s - 1` only; truncated like [`RenewalLaw::geometric`].
    pub fn zeta(s: f64) -> Result<Self> {
        if !(s > 3.0) {
            return Err(Error::InvalidLaw(format!(
                "zeta law needs s > 3 for a finite variance, got {s}"
            )));
        }
        let mut probs: Vec<f64> = Vec::new();
        let mut total = 0.0;
        loop {
            let k = probs.len() + 1;
            let w = (k as f64).powf(-s);
            probs.push(w);
            total += w;
            // integral bound on the tail beyond k
            let tail = (k as f64).powf(1.0 - s) / (s - 1.0);
            if tail < TRUNCATION_MASS * total {
                break;
            }
            if probs.len() >= MAX_SUPPORT {
                return Err(Error::InvalidLaw("zeta tail too heavy to truncate".into()));
            }
        }
        let order = (s - 1.0).ceil() as u32 - 1;
        Self::from_pmf(normalise(probs), Some(order))
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    /// Mean `m`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Variance `v²`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn moment_order(&self) -> Option<u32> {
        self.moment_order
    }

    pub fn is_degenerate(&self) -> bool {
        self.variance <= 1e-14
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.pmf.sample(rng)
    }

    /// Delay law `P(R₀ = k) = P(R ≥ k) / m` that makes the renewal sequence
    /// stationary.
    pub fn delay_law(&self) -> Pmf {
        let probs = self.pmf.probs();
        let mut tail: f64 = 1.0;
        let mut out = Vec::with_capacity(probs.len());
        for p in probs {
            out.push(tail.max(0.0) / self.mean);
            tail -= p;
        }
        Pmf::new(normalise(out)).expect("delay law of a valid law is valid")
    }

    /// Renewal masses `(u_1, …, u_{l_max})`: the probability of a renewal at
    /// lattice time `l` for the zero-delayed sequence, with `u_0 = 1`.
    pub fn renewal_mass(&self, l_max: usize) -> Vec<f64> {
        let probs = self.pmf.probs();
        let mut u = vec![0.0; l_max + 1];
        u[0] = 1.0;
        for l in 1..=l_max {
            u[l] = (1..=l.min(probs.len()))
                .map(|k| probs[k - 1] * u[l - k])
                .sum();
        }
        u.remove(0);
        u
    }

    /// `σ_n² = n v² / m³`.
    pub fn sigma_n_sq(&self, n: u64) -> Result<f64> {
        if self.is_degenerate() {
            return Err(Error::DegenerateLaw);
        }
        Ok(n as f64 * self.variance / self.mean.powi(3))
    }
}

fn normalise(mut probs: Vec<f64>) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}
