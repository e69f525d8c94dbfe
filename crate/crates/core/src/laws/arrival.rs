use rand::Rng;

use crate::{Error, Result};

/// Arrival intensity `α` on `[0, T]`: a constant density plus finitely many
/// atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalMeasure {
    horizon: f64,
    rate: f64,
    atoms: Vec<(f64, f64)>,
}

impl ArrivalMeasure {
    /// Lebesgue measure on `[0, T]`.
    pub fn lebesgue(horizon: f64) -> Result<Self> {
        Self::new(horizon, 1.0, Vec::new())
    }

    /// The zero measure: no exogenous arrivals.
    pub fn zero(horizon: f64) -> Result<Self> {
        Self::new(horizon, 0.0, Vec::new())
    }

    /// `rate · dt` on `[0, T]` plus atoms `(time, mass)`.
    pub fn new(horizon: f64, rate: f64, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "arrival rate must be >= 0, got {rate}"
            )));
        }
        for &(t, w) in &atoms {
            if !(0.0..=horizon).contains(&t) || !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad atom ({t}, {w})")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(ArrivalMeasure {
            horizon,
            rate,
            atoms,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Density with respect to Lebesgue measure on `[0, T]`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `α([0, T])`.
    pub fn total_mass(&self) -> f64 {
        self.cumulative(self.horizon)
    }

    /// `A(s) = α([0, s])`.
    pub fn cumulative(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let s = s.min(self.horizon);
        self.rate * s
            + self
                .atoms
                .iter()
                .take_while(|a| a.0 <= s)
                .map(|a| a.1)
                .sum::<f64>()
    }

    /// Hölder data `(c_α, 1)` of `A` when `α` has no atoms.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        if self.atoms.iter().any(|a| a.1 > 0.0) {
            None
        } else {
            Some(self.rate)
        }
    }

    /// A draw from `α / α([0, T])`.
    pub fn sample_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = self.total_mass();
        let u = rng.random::<f64>() * total;
        let continuous = self.rate * self.horizon;
        if u < continuous || self.atoms.is_empty() {
            return (u / self.rate.max(f64::MIN_POSITIVE)).min(self.horizon);
        }
        let mut acc = continuous;
        for &(t, w) in &self.atoms {
            acc += w;
            if u < acc {
                return t;
            }
        }
        self.atoms[self.atoms.len() - 1].0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cumulative_properties() {
        let a = ArrivalMeasure::new(2.0, 0.5, vec![(1.5, 0.25), (0.0, 0.1)]).unwrap();
        assert!((a.total_mass() - 1.35).abs() < 1e-15);
        assert!((a.cumulative(0.0) - 0.1).abs() < 1e-15);
        assert!((a.cumulative(1.5) - 1.1).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=200 {
            let c = a.cumulative(i as f64 * 0.01);
            assert!(c >= prev);
            prev = c;
        }
        let leb = ArrivalMeasure::lebesgue(1.0).unwrap();
        assert_eq!(leb.cumulative(0.0), 0.0);
        assert_eq!(leb.total_mass(), 1.0);
    }

    #[test]
    fn sampled_times_follow_measure() {
        let a = ArrivalMeasure::new(1.0, 1.0, vec![(0.25, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40_000;
        let at_atom = (0..n).filter(|_| a.sample_time(&mut rng) == 0.25).count();
        let p = at_atom as f64 / n as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn rejects_atoms_outside_horizon() {
        assert!(ArrivalMeasure::new(1.0, 1.0, vec![(1.5, 1.0)]).is_err());
        assert!(ArrivalMeasure::lebesgue(0.0).is_err());
    }
}
