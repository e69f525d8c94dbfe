//! Queue-length paths `X(s) = #{customers in system at s}` and the centered,
//! scaled `X̃ = (X − E X) / σ`.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use crate::pointproc::{MarkedPointProcess, MeanMeasure};
use crate::{Error, Result};

/// Queue length on a time grid, with the jump data needed to resolve the
/// path exactly between grid points.
#[derive(Debug, Clone)]
pub struct QueuePath {
    grid: Vec<f64>,
    values: Vec<f64>,
    centered: Vec<f64>,
    sigma: f64,
    arrivals: Vec<f64>,
    departures: Vec<f64>,
    mean: MeanMeasure,
}

fn check_grid(grid: &[f64], horizon: f64) -> Result<()> {
    let sorted = grid.windows(2).all(|w| w[0] < w[1]);
    let inside = grid.iter().all(|s| (0.0..=horizon).contains(s));
    if !sorted || !inside {
        return Err(Error::UnsortedGrid { horizon });
    }
    Ok(())
}

/// `#{arrivals ≤ s} − #{departures ≤ s}` on sorted event lists.
fn count_at(arrivals: &[f64], departures: &[f64], s: f64) -> f64 {
    let a = arrivals.partition_point(|&t| t <= s);
    let d = departures.partition_point(|&t| t <= s);
    (a - d) as f64
}

/// Same as [`count_at`] for `s` approached from the left.
fn count_before(arrivals: &[f64], departures: &[f64], s: f64) -> f64 {
    let a = arrivals.partition_point(|&t| t < s);
    let d = departures.partition_point(|&t| t < s);
    (a - d) as f64
}

/// Arrival and departure times of the customers that ever enter the system.
fn events(proc: &MarkedPointProcess) -> (Vec<f64>, Vec<f64>) {
    let mut arrivals = Vec::with_capacity(proc.len());
    let mut departures = Vec::with_capacity(proc.len());
    for p in proc.points() {
        if p.y > 0.0 {
            arrivals.push(p.t);
            departures.push(p.t + p.y);
        }
    }
    departures.sort_by(f64::total_cmp);
    (arrivals, departures)
}

impl QueuePath {
    /// Evaluate `X` and `X̃` on `grid`. The grid must be strictly increasing
    /// inside `[0, T]`.
    pub fn evaluate(
        proc: &MarkedPointProcess,
        grid: &[f64],
        mean: &MeanMeasure,
        sigma: f64,
    ) -> Result<Self> {
        let centers: Vec<f64> = grid.iter().map(|&s| mean.evaluate(s)).collect();
        Self::evaluate_with_centers(proc, grid, &centers, mean, sigma)
    }

    /// [`QueuePath::evaluate`] with `E X` on the grid precomputed, for
    /// repeated evaluation against the same mean.
    pub fn evaluate_with_centers(
        proc: &MarkedPointProcess,
        grid: &[f64],
        centers: &[f64],
        mean: &MeanMeasure,
        sigma: f64,
    ) -> Result<Self> {
        check_grid(grid, proc.horizon())?;
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if centers.len() != grid.len() {
            return Err(Error::InvalidArgument(
                "one center per grid point required".into(),
            ));
        }
        let (arrivals, departures) = events(proc);
        let values: Vec<f64> = grid
            .iter()
            .map(|&s| count_at(&arrivals, &departures, s))
            .collect();
        let centered = values
            .iter()
            .zip(centers)
            .map(|(x, c)| (x - c) / sigma)
            .collect();
        Ok(QueuePath {
            grid: grid.to_vec(),
            values,
            centered,
            sigma,
            arrivals,
            departures,
            mean: mean.clone(),
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `X` on the grid.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `X̃` on the grid.
    pub fn centered(&self) -> &[f64] {
        &self.centered
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `X(s)` at an arbitrary time.
    pub fn value_at(&self, s: f64) -> f64 {
        count_at(&self.arrivals, &self.departures, s)
    }

    /// `X̃` at every grid point and every jump time inside the grid range,
    /// with left limits placed just before their jump, in time order.
    pub fn resolved(&self) -> Vec<(f64, f64)> {
        let (Some(&lo), Some(&hi)) = (self.grid.first(), self.grid.last()) else {
            return Vec::new();
        };
        let mut times: Vec<f64> = self
            .arrivals
            .iter()
            .chain(&self.departures)
            .copied()
            .filter(|&t| t >= lo && t <= hi)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let scale = |x: f64, s: f64| (x - self.mean.evaluate(s)) / self.sigma;
        let mut out = Vec::with_capacity(self.grid.len() + 2 * times.len());
        let mut j = 0;
        for (g, &s) in self.grid.iter().enumerate() {
            while j < times.len() && times[j] <= s {
                let t = times[j];
                if t > lo {
                    out.push((
                        t,
                        scale(count_before(&self.arrivals, &self.departures, t), t),
                    ));
                }
                if t < s {
                    out.push((t, scale(count_at(&self.arrivals, &self.departures, t), t)));
                }
                j += 1;
            }
            out.push((s, self.centered[g]));
        }
        out
    }

    /// `sup |X̃|` over the grid range, including values between grid points.
    pub fn sup_norm(&self) -> f64 {
        self.resolved().iter().fold(0.0, |m, p| m.max(p.1.abs()))
    }

    /// Modulus of continuity `sup_{|s − t| < ε} |X̃(s) − X̃(t)|`.
    pub fn modulus(&self, eps: f64) -> f64 {
        if !(eps > 0.0) {
            return 0.0;
        }
        sliding_range(&self.resolved(), eps)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "X", "Xtilde"])?;
        for ((s, x), xt) in self.grid.iter().zip(&self.values).zip(&self.centered) {
            w.write_record([s.to_string(), x.to_string(), xt.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::csv(path, e))
    }
}

/// Largest `max − min` of values inside any window of time-width `< eps`.
pub(crate) fn sliding_range(points: &[(f64, f64)], eps: f64) -> f64 {
    let mut best: f64 = 0.0;
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut start = 0;
    for (j, &(t, v)) in points.iter().enumerate() {
        while t - points[start].0 >= eps {
            start += 1;
        }
        while maxq.back().is_some_and(|&k| points[k].1 <= v) {
            maxq.pop_back();
        }
        maxq.push_back(j);
        while minq.back().is_some_and(|&k| points[k].1 >= v) {
            minq.pop_back();
        }
        minq.push_back(j);
        while maxq.front().is_some_and(|&k| k < start) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&k| k < start) {
            minq.pop_front();
        }
        best = best.max(points[maxq[0]].1 - points[minq[0]].1);
    }
    best
}
