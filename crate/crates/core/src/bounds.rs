//! Explicit error bounds and rate exponents for both queue models. Absolute
//! constants the theory leaves unspecified enter as a multiplier `constant`.

use std::io::Write;

use crate::{Error, Result};

/// `Ψ_n = 3(√(π x_n / 2) + |x_n − n x|)/(2n) + (α([0,T]) + x_n/n)/(2√n)`.
pub fn psi_n(x: f64, x_n: u64, alpha_mass: f64, n: u64) -> f64 {
    let n = n as f64;
    let xn = x_n as f64;
    3.0 * ((std::f64::consts::PI * xn / 2.0).sqrt() + (xn - n * x).abs()) / (2.0 * n)
        + (alpha_mass + xn / n) / (2.0 * n.sqrt())
}

/// `2^{3/2} ‖g‖_{M'} Ψ_n`.
pub fn mgi_expectation_bound(norm_g: f64, psi: f64) -> f64 {
    2f64.powf(1.5) * norm_g * psi
}

/// `‖g‖_M α([0,T]) / (2√n)`, the Poisson third-moment bound with
/// `‖J_{t,y}‖ = 1`. Only valid without initial customers.
pub fn poisson_third_moment_bound(n: u64, alpha_mass: f64, x_n: u64, norm_g: f64) -> Result<f64> {
    if x_n > 0 {
        return Err(Error::NotPoisson(x_n));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    Ok(norm_g * alpha_mass / (2.0 * (n as f64).sqrt()))
}

/// Rate shape `constant · n^χ T^{2/5} n^{−1/20}` of the M/GI Lévy–Prokhorov
/// bound.
pub fn mgi_lp_rate(horizon: f64, n: u64, chi: f64, constant: f64) -> f64 {
    let n = n as f64;
    constant * n.powf(chi) * horizon.powf(0.4) * n.powf(-0.05)
}

/// Exponents of the GI/GI rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigiExponents {
    pub beta: f64,
    pub r: u32,
    pub eta: f64,
    /// `min(β, 1/2)`.
    pub beta_bar: f64,
    /// `⌈(r − η(r − 1))/2⌉ − 1`.
    pub l_r: u32,
    /// `β(r − 2)/(r − 1)`.
    pub beta_r: f64,
    /// `l_r β_r − 1`.
    pub numerator: f64,
    /// `6 l_r + 4 l_r β_r − 1`.
    pub denominator: f64,
    /// The rate does not decrease in `n` when `l_r β_r ≤ 1`.
    pub vacuous: bool,
    /// Whether `r(1 − β) ≥ 1`; reported only.
    pub holder_branch: bool,
}

impl GigiExponents {
    /// Exponent of `n` in the rate, ignoring the `√(log n)` factor.
    pub fn n_exponent(&self) -> f64 {
        -self.beta_bar * self.numerator / self.denominator
    }

    /// `constant · √(log n) · {(T⁴ n^{−β̄})^{l_rβ_r − 1} T³}^{1/(6l_r + 4l_rβ_r − 1)}`,
    /// or `None` for vacuous exponents.
    pub fn lp_rate(&self, horizon: f64, n: u64, constant: f64) -> Option<f64> {
        if self.vacuous {
            return None;
        }
        let nf = n as f64;
        let inner =
            (horizon.powi(4) * nf.powf(-self.beta_bar)).powf(self.numerator) * horizon.powi(3);
        Some(constant * nf.ln().max(0.0).sqrt() * inner.powf(1.0 / self.denominator))
    }

    /// `constant · T (S_g n^{−1/2} + ‖g‖_{M'} n^{−β̄})`.
    pub fn expectation_bound(
        &self,
        horizon: f64,
        n: u64,
        smoothness: f64,
        norm_g: f64,
        constant: f64,
    ) -> f64 {
        let nf = n as f64;
        constant * horizon * (smoothness / nf.sqrt() + norm_g * nf.powf(-self.beta_bar))
    }
}

pub fn gigi_rate_exponents(beta: f64, r: u32, eta: f64) -> Result<GigiExponents> {
    if r < 5 {
        return Err(Error::MomentOrderTooSmall(r));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eta must lie in (0, 1), got {eta}"
        )));
    }
    let rf = r as f64;
    let l_r = ((rf - eta * (rf - 1.0)) / 2.0).ceil() as u32 - 1;
    let beta_r = beta * (rf - 2.0) / (rf - 1.0);
    let lb = l_r as f64 * beta_r;
    Ok(GigiExponents {
        beta,
        r,
        eta,
        beta_bar: beta.min(0.5),
        l_r,
        beta_r,
        numerator: lb - 1.0,
        denominator: 6.0 * l_r as f64 + 4.0 * lb - 1.0,
        vacuous: lb <= 1.0,
        holder_branch: rf * (1.0 - beta) >= 1.0,
    })
}

/// Optimized convex-set bound `C(ε^{−3} k³ n^{−1/2} + k^{1/4} ε)` at
/// `ε* = (3 k^{11/4} n^{−1/2})^{1/4}`; returns `(ε*, bound)`.
pub fn convex_set_bound(k: u32, n: u64, constant: f64) -> (f64, f64) {
    let eps = (3.0 * (k as f64).powf(2.75) / (n as f64).sqrt()).powf(0.25);
    (eps, convex_set_objective(k, n, constant, eps))
}

/// `C(ε^{−3} k³ n^{−1/2} + k^{1/4} ε)`.
pub fn convex_set_objective(k: u32, n: u64, constant: f64, eps: f64) -> f64 {
    let kf = k as f64;
    constant * (kf.powi(3) / (eps.powi(3) * (n as f64).sqrt()) + kf.powf(0.25) * eps)
}

/// Inputs of [`bound_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub n: u64,
    pub horizon: f64,
    pub x: f64,
    pub x_n: u64,
    pub alpha_mass: f64,
    pub beta: f64,
    pub r: Option<u32>,
    pub eta: f64,
    pub k: u32,
    /// `‖g‖_{M'}`.
    pub norm_m_prime: f64,
    /// `‖g‖_M`.
    pub norm_m: f64,
    pub smoothness: f64,
    pub chi: f64,
    pub constant: f64,
    /// Renewal mean and variance, when a GI/GI model is in scope.
    pub renewal: Option<(f64, f64)>,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            n: 100,
            horizon: 1.0,
            x: 0.0,
            x_n: 0,
            alpha_mass: 1.0,
            beta: 1.0,
            r: None,
            eta: 0.5,
            k: 1,
            norm_m_prime: 1.0,
            norm_m: 1.0,
            smoothness: 0.0,
            chi: 0.0,
            constant: 1.0,
            renewal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub params: BoundParams,
    pub psi_n: f64,
    pub mgi_expectation_bound: f64,
    pub poisson_bound: Option<f64>,
    pub mgi_lp_rate: f64,
    pub gigi: Option<GigiExponents>,
    pub gigi_lp_rate: Option<f64>,
    pub gigi_expectation_bound: Option<f64>,
    pub sigma_n_sq: Option<f64>,
    pub convex_eps: f64,
    pub convex_bound: f64,
}

pub fn bound_report(params: &BoundParams) -> Result<BoundReport> {
    let p = params;
    if p.n == 0 || p.k == 0 {
        return Err(Error::InvalidArgument("n and k must be positive".into()));
    }
    let psi = psi_n(p.x, p.x_n, p.alpha_mass, p.n);
    let gigi =
        p.r.map(|r| gigi_rate_exponents(p.beta, r, p.eta))
            .transpose()?;
    let (convex_eps, convex_bound) = convex_set_bound(p.k, p.n, p.constant);
    Ok(BoundReport {
        params: p.clone(),
        psi_n: psi,
        mgi_expectation_bound: mgi_expectation_bound(p.norm_m_prime, psi),
        poisson_bound: poisson_third_moment_bound(p.n, p.alpha_mass, p.x_n, p.norm_m).ok(),
        mgi_lp_rate: mgi_lp_rate(p.horizon, p.n, p.chi, p.constant),
        gigi_lp_rate: gigi.and_then(|g| g.lp_rate(p.horizon, p.n, p.constant)),
        gigi_expectation_bound: gigi
            .map(|g| g.expectation_bound(p.horizon, p.n, p.smoothness, p.norm_m_prime, p.constant)),
        gigi,
        sigma_n_sq: p.renewal.map(|(m, v2)| p.n as f64 * v2 / m.powi(3)),
        convex_eps,
        convex_bound,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.10}"))
}

impl BoundReport {
    /// `(quantity, value)` pairs in display order.
    pub fn rows(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut rows = vec![
            ("n".into(), p.n.to_string()),
            ("T".into(), p.horizon.to_string()),
            ("x".into(), p.x.to_string()),
            ("x_n".into(), p.x_n.to_string()),
            ("alpha_mass".into(), p.alpha_mass.to_string()),
            ("norm_m_prime".into(), p.norm_m_prime.to_string()),
            ("norm_m".into(), p.norm_m.to_string()),
            ("psi_n".into(), format!("{:.10}", self.psi_n)),
            (
                "mgi_expectation_bound".into(),
                format!("{:.10}", self.mgi_expectation_bound),
            ),
            ("poisson_third_moment_bound".into(), opt(self.poisson_bound)),
            (
                "mgi_lp_rate_shape".into(),
                format!("{:.10}", self.mgi_lp_rate),
            ),
        ];
        if let Some(g) = &self.gigi {
            rows.extend([
                ("beta".into(), g.beta.to_string()),
                ("r".into(), g.r.to_string()),
                ("eta".into(), g.eta.to_string()),
                ("beta_bar".into(), g.beta_bar.to_string()),
                ("l_r".into(), g.l_r.to_string()),
                ("beta_r".into(), format!("{:.10}", g.beta_r)),
                ("gigi_n_exponent".into(), format!("{:.10}", g.n_exponent())),
                ("gigi_vacuous".into(), g.vacuous.to_string()),
                ("gigi_holder_branch".into(), g.holder_branch.to_string()),
                ("gigi_lp_rate_shape".into(), opt(self.gigi_lp_rate)),
                (
                    "gigi_expectation_bound".into(),
                    opt(self.gigi_expectation_bound),
                ),
            ]);
        }
        rows.push(("sigma_n_sq".into(), opt(self.sigma_n_sq)));
        rows.push(("k".into(), p.k.to_string()));
        rows.push(("convex_eps_star".into(), format!("{:.10}", self.convex_eps)));
        rows.push((
            "convex_set_bound".into(),
            format!("{:.10}", self.convex_bound),
        ));
        rows
    }

    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["quantity", "value"])?;
        for (k, v) in self.rows() {
            w.write_record([k, v])?;
        }
        w.flush()?;
        Ok(())
    }
}
