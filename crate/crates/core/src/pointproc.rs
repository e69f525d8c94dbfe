//! Seeded samplers for the arrival/service point processes of both models.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::exec::substream;
use crate::laws::{ArrivalMeasure, RenewalLaw, ServiceDistribution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Poisson,
    Initial,
    Renewal,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Poisson => "poisson",
            Tag::Initial => "initial",
            Tag::Renewal => "renewal",
        })
    }
}

/// One customer: arrival time `t`, service duration `y` (possibly `∞`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub t: f64,
    pub y: f64,
    pub tag: Tag,
}

impl Point {
    /// `J_{t,y}(s) = 1[t ≤ s < t + y]`.
    pub fn in_system(&self, s: f64) -> bool {
        self.t <= s && s < self.t + self.y
    }
}

/// A finite realization of customers on `[0, T] × [0, ∞]`, sorted by arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointProcess {
    points: Vec<Point>,
    horizon: f64,
}

impl MarkedPointProcess {
    pub fn new(mut points: Vec<Point>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        for p in &points {
            if !(0.0..=horizon).contains(&p.t) || !(p.y >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "point {p:?} outside [0, {horizon}] x [0, inf]"
                )));
            }
            if p.tag == Tag::Initial && p.t != 0.0 {
                return Err(Error::InvalidArgument(
                    "initial customers must arrive at 0".into(),
                ));
            }
        }
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(MarkedPointProcess { points, horizon })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count_tag(&self, tag: Tag) -> usize {
        self.points.iter().filter(|p| p.tag == tag).count()
    }

    /// Number of points with arrival time in `(a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let lo = self.points.partition_point(|p| p.t <= a);
        let hi = self.points.partition_point(|p| p.t <= b);
        hi.saturating_sub(lo)
    }

    /// The same process with the customer at `index` removed.
    pub fn without(&self, index: usize) -> Self {
        let mut points = self.points.clone();
        points.remove(index);
        MarkedPointProcess {
            points,
            horizon: self.horizon,
        }
    }

    /// The same process with one more customer.
    pub fn with_point(&self, point: Point) -> Self {
        let at = self.points.partition_point(|p| p.t <= point.t);
        let mut points = self.points.clone();
        points.insert(at, point);
        MarkedPointProcess {
            points,
            horizon: self.horizon,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "y", "tag"])?;
        for p in &self.points {
            w.write_record([p.t.to_string(), p.y.to_string(), p.tag.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::csv(path, e))
    }
}

/// Mean measure `λ_n` and its queue-length evaluator `s ↦ ∫ J_{t,y}(s) λ_n(dt, dy)`.
#[derive(Clone)]
pub enum MeanMeasure {
    /// `n·α × G + x_n·(δ₀ × G̃)`.
    Mgi {
        n: u64,
        arrival: ArrivalMeasure,
        service: ServiceDistribution,
        x_n: u64,
        initial: ServiceDistribution,
    },
    /// `m⁻¹ Σ_{i ≤ ⌊nT⌋} δ_{i/n} × G`.
    Gigi {
        n: u64,
        mean: f64,
        service: ServiceDistribution,
        horizon: f64,
    },
    Zero,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for MeanMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanMeasure::Mgi { n, x_n, .. } => write!(f, "MeanMeasure::Mgi(n={n}, x_n={x_n})"),
            MeanMeasure::Gigi { n, mean, .. } => write!(f, "MeanMeasure::Gigi(n={n}, m={mean})"),
            MeanMeasure::Zero => f.write_str("MeanMeasure::Zero"),
            MeanMeasure::Custom(_) => f.write_str("MeanMeasure::Custom"),
        }
    }
}

impl MeanMeasure {
    pub fn gigi(n: u64, law: &RenewalLaw, service: ServiceDistribution, horizon: f64) -> Self {
        MeanMeasure::Gigi {
            n,
            mean: law.mean(),
            service,
            horizon,
        }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        MeanMeasure::Custom(Arc::new(f))
    }

    /// `E X(s)` under the mean measure.
    pub fn evaluate(&self, s: f64) -> f64 {
        match self {
            MeanMeasure::Mgi {
                n,
                arrival,
                service,
                x_n,
                initial,
            } => {
                let upto = s.min(arrival.horizon());
                let mut v = 0.0;
                if upto >= 0.0 {
                    let a = arrival.rate();
                    if a > 0.0 {
                        v += a
                            * (service.integrated_survival(s)
                                - service.integrated_survival(s - upto));
                    }
                    for &(t, w) in arrival.atoms() {
                        if t <= upto {
                            v += w * service.survival(s - t);
                        }
                    }
                }
                *n as f64 * v + *x_n as f64 * initial.survival(s)
            }
            MeanMeasure::Gigi {
                n,
                mean,
                service,
                horizon,
            } => {
                let nf = *n as f64;
                let last = lattice_sites(*n, s.min(*horizon));
                (1..=last)
                    .map(|i| service.survival(s - i as f64 / nf))
                    .sum::<f64>()
                    / mean
            }
            MeanMeasure::Zero => 0.0,
            MeanMeasure::Custom(f) => f(s),
        }
    }

    /// Total mass of the time marginal, `κ(S)` in the Palm identity.
    pub fn total_mass(&self) -> Option<f64> {
        match self {
            MeanMeasure::Mgi {
                n, arrival, x_n, ..
            } => Some(*n as f64 * arrival.total_mass() + *x_n as f64),
            MeanMeasure::Gigi {
                n, mean, horizon, ..
            } => Some(lattice_sites(*n, *horizon) as f64 / mean),
            MeanMeasure::Zero => Some(0.0),
            MeanMeasure::Custom(_) => None,
        }
    }
}

/// `⌊n s⌋`, robust to the rounding of `n·s` when `s` is a lattice point.
pub fn lattice_sites(n: u64, s: f64) -> u64 {
    if s <= 0.0 {
        return 0;
    }
    let x = n as f64 * s;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as u64
    } else {
        x.floor() as u64
    }
}

/// M/GI realization: Poisson customers with intensity `n α × G` plus `x_n`
/// customers present at time zero with residual service `G̃`.
pub fn sample_mgi<R: Rng + ?Sized>(
    n: u64,
    arrival: &ArrivalMeasure,
    service: &ServiceDistribution,
    x_n: u64,
    initial: &ServiceDistribution,
    rng: &mut R,
) -> Result<MarkedPointProcess> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let lambda = n as f64 * arrival.total_mass();
    let count = if lambda > 0.0 {
        Poisson::new(lambda)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    let mut points = Vec::with_capacity(count + x_n as usize);
    for _ in 0..x_n {
        points.push(Point {
            t: 0.0,
            y: initial.sample(rng),
            tag: Tag::Initial,
        });
    }
    for _ in 0..count {
        let t = arrival.sample_time(rng);
        let y = service.sample(rng);
        points.push(Point {
            t,
            y,
            tag: Tag::Poisson,
        });
    }
    MarkedPointProcess::new(points, arrival.horizon())
}

/// Service marks of the lattice model, drawn lazily per site from a keyed
/// substream so they do not depend on which sites are occupied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeMarks {
    pub key: u64,
    pub service: ServiceDistribution,
}

impl LatticeMarks {
    pub fn mark(&self, site: u64) -> f64 {
        self.service.sample(&mut substream(self.key, site))
    }
}

/// GI/GI realization kept in lattice form: `occupied[i - 1]` tells whether
/// the renewal sequence hits site `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GigiRealization {
    pub n: u64,
    pub horizon: f64,
    pub occupied: Vec<bool>,
    pub marks: LatticeMarks,
}

impl GigiRealization {
    pub fn sites(&self) -> u64 {
        self.occupied.len() as u64
    }

    /// The marked point process whose points sit at `i/n` for occupied `i`.
    pub fn process(&self) -> MarkedPointProcess {
        indicators_to_process(&self.occupied, self.n, self.horizon, &self.marks)
    }
}

pub(crate) fn indicators_to_process(
    occupied: &[bool],
    n: u64,
    horizon: f64,
    marks: &LatticeMarks,
) -> MarkedPointProcess {
    let nf = n as f64;
    let points = occupied
        .iter()
        .enumerate()
        .filter(|(_, &o)| o)
        .map(|(idx, _)| {
            let site = idx as u64 + 1;
            Point {
                t: (site as f64 / nf).min(horizon),
                y: marks.mark(site),
                tag: Tag::Renewal,
            }
        })
        .collect();
    MarkedPointProcess { points, horizon }
}

/// Stationary renewal indicators on sites `1..=sites`: the first renewal is
/// at `R₀` from the delay law, then at `R₀ + R₁ + …`.
pub fn stationary_indicators<R: Rng + ?Sized>(
    law: &RenewalLaw,
    sites: u64,
    rng: &mut R,
) -> Vec<bool> {
    let mut occupied = vec![false; sites as usize];
    let mut pos = law.delay_law().sample(rng) as u64;
    while pos <= sites {
        occupied[pos as usize - 1] = true;
        pos += law.sample(rng) as u64;
    }
    occupied
}

pub fn sample_gigi_realization<R: Rng + ?Sized>(
    n: u64,
    law: &RenewalLaw,
    service: &ServiceDistribution,
    horizon: f64,
    rng: &mut R,
) -> Result<GigiRealization> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let key = rng.next_u64();
    let occupied = stationary_indicators(law, lattice_sites(n, horizon), rng);
    Ok(GigiRealization {
        n,
        horizon,
        occupied,
        marks: LatticeMarks {
            key,
            service: *service,
        },
    })
}

/// GI/GI realization: customers at lattice times `i/n` hit by a stationary
/// renewal sequence with inter-arrival law `R`.
pub fn sample_gigi<R: Rng + ?Sized>(
    n: u64,
    law: &RenewalLaw,
    service: &ServiceDistribution,
    horizon: f64,
    rng: &mut R,
) -> Result<MarkedPointProcess> {
    Ok(sample_gigi_realization(n, law, service, horizon, rng)?.process())
}
