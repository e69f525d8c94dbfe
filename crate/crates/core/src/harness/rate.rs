use rand::Rng;

use crate::exec::replication_rng;
use crate::numerics::{ols, Estimate};
use crate::{Error, Result};

const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateVerdict {
    /// Every gap is significant and the slope was fitted.
    Fitted,
    /// Some gap is within noise; no slope-based inference is drawn.
    NoiseDominated,
}

/// Log-log fit of `|Δ̂_n|` against `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% residual-bootstrap interval of the slope.
    pub ci: (f64, f64),
    pub verdict: RateVerdict,
    /// Every gap lies within `se_multiplier` SE of zero.
    pub all_within_noise: bool,
    pub pass: bool,
}

/// Fit `log|Δ̂| = a + b log n`.
///
/// A fitted ladder passes iff the upper CI of `b` is at most
/// `−(rate − slack)`; a noise-dominated one passes iff every gap is within
/// `se_multiplier` standard errors of zero.
pub fn fit_rate(
    ns: &[u64],
    gaps: &[Estimate],
    rate: f64,
    slack: f64,
    se_multiplier: f64,
    seed: u64,
) -> Result<RateFit> {
    if ns.len() != gaps.len() {
        return Err(Error::InvalidArgument(
            "one gap per ladder point required".into(),
        ));
    }
    if ns.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 4 ladder points, got {}",
            ns.len()
        )));
    }
    let significant = gaps.iter().all(|g| g.value.abs() > se_multiplier * g.se);
    let all_within_noise = gaps.iter().all(|g| g.value.abs() <= se_multiplier * g.se);
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    // zero gaps would give -inf; they only occur in the noise-dominated case
    let y: Vec<f64> = gaps
        .iter()
        .map(|g| g.value.abs().max(f64::MIN_POSITIVE).ln())
        .collect();
    let (intercept, slope) = ols(&x, &y);
    let fitted: Vec<f64> = x.iter().map(|xi| intercept + slope * xi).collect();
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();

    let mut rng = replication_rng(seed, 0);
    let mut slopes: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let ys: Vec<f64> = fitted
                .iter()
                .map(|f| f + resid[rng.random_range(0..resid.len())])
                .collect();
            ols(&x, &ys).1
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    let pick = |q: f64| {
        slopes
            [((q * (BOOTSTRAP_RESAMPLES - 1) as f64).round() as usize).min(BOOTSTRAP_RESAMPLES - 1)]
    };
    let ci = (pick(0.025).min(slope), pick(0.975).max(slope));

    let (verdict, pass) = if significant {
        (RateVerdict::Fitted, ci.1 <= -(rate - slack))
    } else {
        (RateVerdict::NoiseDominated, all_within_noise)
    };
    Ok(RateFit {
        slope,
        intercept,
        ci,
        verdict,
        all_within_noise,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LADDER: [u64; 6] = [50, 100, 200, 400, 800, 1600];

    #[test]
    fn exact_power_law() {
        let gaps: Vec<Estimate> = LADDER
            .iter()
            .map(|&n| Estimate::exact((n as f64).powf(-0.5)))
            .collect();
        let fit = fit_rate(&LADDER, &gaps, 0.5, 0.1, 4.0, 1).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.ci.0 + 0.5).abs() < 1e-12 && (fit.ci.1 + 0.5).abs() < 1e-12);
        assert_eq!(fit.verdict, RateVerdict::Fitted);
        assert!(fit.pass);
    }

    #[test]
    fn perturbed_power_law() {
        let gaps: Vec<Estimate> = LADDER
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                Estimate::exact(3.0 * (n as f64).powf(-0.5) * (1.0 + 0.05 * sign))
            })
            .collect();
        let fit = fit_rate(&LADDER, &gaps, 0.5, 0.1, 4.0, 2).unwrap();
        assert!((-0.55..=-0.45).contains(&fit.slope), "{}", fit.slope);
        assert!(fit.ci.0 <= fit.slope && fit.slope <= fit.ci.1);
    }

    #[test]
    fn noise_dominated() {
        let gaps: Vec<Estimate> = LADDER
            .iter()
            .map(|_| Estimate {
                value: 1e-3,
                se: 1e-3,
            })
            .collect();
        let fit = fit_rate(&LADDER, &gaps, 0.5, 0.1, 4.0, 3).unwrap();
        assert_eq!(fit.verdict, RateVerdict::NoiseDominated);
        assert!(fit.pass);
        let mut mixed = gaps.clone();
        mixed[0] = Estimate {
            value: 1.0,
            se: 1e-3,
        };
        let fit = fit_rate(&LADDER, &mixed, 0.5, 0.1, 4.0, 3).unwrap();
        assert_eq!(fit.verdict, RateVerdict::NoiseDominated);
        assert!(!fit.pass);
    }

    #[test]
    fn slow_decay_fails() {
        let gaps: Vec<Estimate> = LADDER
            .iter()
            .map(|&n| Estimate::exact((n as f64).powf(-0.2)))
            .collect();
        assert!(!fit_rate(&LADDER, &gaps, 0.5, 0.1, 4.0, 1).unwrap().pass);
    }

    #[test]
    fn short_ladder_rejected() {
        let gaps = vec![Estimate::exact(1.0); 3];
        assert!(fit_rate(&LADDER[..3], &gaps, 0.5, 0.1, 4.0, 1).is_err());
    }
}
