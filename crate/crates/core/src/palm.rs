//! Reduced Palm couplings for both queue models and a Monte Carlo check of
//! the Palm identity `E ∫ h(Ξ, u) Ξ(du) = E ∫ h(Ξ^u + δ_u, u) κ(du)`.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::exec::{replication_rng, Execution};
use crate::laws::{ArrivalMeasure, RenewalLaw, ServiceDistribution};
use crate::numerics::{mean_se, Estimate};
use crate::pointproc::{
    indicators_to_process, lattice_sites, sample_gigi_realization, sample_mgi, GigiRealization,
    MarkedPointProcess, Point, Tag,
};
use crate::{Error, Result};

/// How the Palm realization was obtained from the base one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingTimes {
    /// Poisson location: the reduced Palm process is the base process.
    Unchanged,
    /// Initial-customer location: the base point at this index was removed.
    RemovedInitial { index: usize },
    /// Lattice location: the palm equals the base outside the sites
    /// `(site − backward, site + forward)`.
    Lattice {
        site: u64,
        forward: u64,
        backward: u64,
    },
}

#[derive(Debug, Clone)]
pub struct PalmCoupling {
    pub base: MarkedPointProcess,
    pub palm: MarkedPointProcess,
    pub location: (f64, f64),
    pub coupling: CouplingTimes,
}

/// Reduced Palm realization of the M/GI process at `u = (t, y)`.
///
/// For `t > 0` the Poisson part is its own reduced Palm version; at `t = 0`
/// one initial customer, chosen uniformly, is removed.
pub fn palm_mgi<R: Rng + ?Sized>(
    base: &MarkedPointProcess,
    u: (f64, f64),
    rng: &mut R,
) -> Result<PalmCoupling> {
    if u.0 > 0.0 {
        return Ok(PalmCoupling {
            base: base.clone(),
            palm: base.clone(),
            location: u,
            coupling: CouplingTimes::Unchanged,
        });
    }
    let initial: Vec<usize> = base
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.tag == Tag::Initial)
        .map(|(i, _)| i)
        .collect();
    if initial.is_empty() {
        return Err(Error::NoInitialPoints);
    }
    let index = initial[rng.random_range(0..initial.len())];
    Ok(PalmCoupling {
        base: base.clone(),
        palm: base.without(index),
        location: u,
        coupling: CouplingTimes::RemovedInitial { index },
    })
}

/// Lattice form of the renewal Palm coupling at `site`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePalm {
    pub site: u64,
    /// `palm[j - 1]`: renewal of the reduced Palm process at site `j`.
    pub palm: Vec<bool>,
    pub forward: u64,
    pub backward: u64,
}

/// Walk a fresh zero-delayed renewal sequence from `site` in direction
/// `step` until it hits a base renewal or leaves `1..=sites`. Returns the
/// coupling time and the fresh renewals strictly before it.
fn coincidence<R: Rng + ?Sized>(
    base: &[bool],
    site: u64,
    forward: bool,
    law: &RenewalLaw,
    rng: &mut R,
) -> (u64, Vec<u64>) {
    let sites = base.len() as u64;
    let cap = if forward { sites - site + 1 } else { site };
    let mut fresh = Vec::new();
    let mut dist = 0u64;
    loop {
        dist += law.sample(rng) as u64;
        if dist >= cap {
            return (cap, fresh);
        }
        let j = if forward { site + dist } else { site - dist };
        if base[j as usize - 1] {
            return (dist, fresh);
        }
        fresh.push(j);
    }
}

/// Splice independent fresh forward and backward zero-delayed renewal
/// sequences started at `site` into `base`, each up to its first
/// coincidence with a base renewal.
pub fn palm_lattice<R: Rng + ?Sized>(
    base: &[bool],
    site: u64,
    law: &RenewalLaw,
    rng: &mut R,
) -> Result<LatticePalm> {
    let sites = base.len() as u64;
    if site == 0 || site > sites {
        return Err(Error::InvalidArgument(format!(
            "site {site} outside 1..={sites}"
        )));
    }
    let (forward, ahead) = coincidence(base, site, true, law, rng);
    let (backward, behind) = coincidence(base, site, false, law, rng);
    let mut palm = base.to_vec();
    let lo = site - backward + 1;
    let hi = (site + forward - 1).min(sites);
    for j in lo..=hi {
        palm[j as usize - 1] = false;
    }
    for j in ahead.into_iter().chain(behind) {
        palm[j as usize - 1] = true;
    }
    Ok(LatticePalm {
        site,
        palm,
        forward,
        backward,
    })
}

/// Reduced Palm realization of the GI/GI process at lattice site `site`.
/// Service marks are shared with the base realization.
pub fn palm_gigi<R: Rng + ?Sized>(
    base: &GigiRealization,
    site: u64,
    law: &RenewalLaw,
    rng: &mut R,
) -> Result<PalmCoupling> {
    let lp = palm_lattice(&base.occupied, site, law, rng)?;
    let palm = indicators_to_process(&lp.palm, base.n, base.horizon, &base.marks);
    Ok(PalmCoupling {
        base: base.process(),
        palm,
        location: (site as f64 / base.n as f64, base.marks.mark(site)),
        coupling: CouplingTimes::Lattice {
            site,
            forward: lp.forward,
            backward: lp.backward,
        },
    })
}

/// `E X^{i/n}(s) − E X(s) = Σ_{j ≤ ⌊ns⌋} (u⁰_{|j−i|} − 1/m)(1 − G(s − j/n))`
/// with `u⁰_0 = 0`.
pub fn mean_shift(
    law: &RenewalLaw,
    n: u64,
    site: u64,
    s: f64,
    service: &ServiceDistribution,
) -> f64 {
    let last = lattice_sites(n, s);
    if last == 0 {
        return 0.0;
    }
    let reach = last.abs_diff(site).max(site.abs_diff(1)) as usize;
    let u = law.renewal_mass(reach.max(1));
    let inv_m = 1.0 / law.mean();
    let nf = n as f64;
    (1..=last)
        .map(|j| {
            let l = j.abs_diff(site) as usize;
            let u0 = if l == 0 { 0.0 } else { u[l - 1] };
            (u0 - inv_m) * service.survival(s - j as f64 / nf)
        })
        .sum()
}

/// Model whose Palm identity is checked.
#[derive(Debug, Clone)]
pub enum PalmModel {
    Mgi {
        n: u64,
        arrival: ArrivalMeasure,
        service: ServiceDistribution,
        x_n: u64,
        initial: ServiceDistribution,
    },
    Gigi {
        n: u64,
        law: RenewalLaw,
        service: ServiceDistribution,
        horizon: f64,
    },
}

impl PalmModel {
    /// `κ(S)`: expected number of points.
    pub fn intensity_mass(&self) -> f64 {
        match self {
            PalmModel::Mgi {
                n, arrival, x_n, ..
            } => *n as f64 * arrival.total_mass() + *x_n as f64,
            PalmModel::Gigi {
                n, law, horizon, ..
            } => lattice_sites(*n, *horizon) as f64 / law.mean(),
        }
    }
}

/// Functional `h(Ξ, u)` in the Palm identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PalmFunctional {
    /// `h ≡ 1`.
    Unit,
    /// `h(Ξ, u) = Ξ(S)`.
    TotalCount,
    /// Number of points of `Ξ` with arrival in `(t_u, t_u + window]`.
    Successor { window: f64 },
}

impl PalmFunctional {
    pub fn name(&self) -> String {
        match self {
            PalmFunctional::Unit => "unit".into(),
            PalmFunctional::TotalCount => "total_count".into(),
            PalmFunctional::Successor { window } => format!("successor({window})"),
        }
    }

    pub fn eval(&self, xi: &MarkedPointProcess, u: &Point) -> f64 {
        match *self {
            PalmFunctional::Unit => 1.0,
            PalmFunctional::TotalCount => xi.len() as f64,
            PalmFunctional::Successor { window } => {
                // lattice gaps are exact multiples of 1/n only up to rounding
                let slack = 1e-9 * window;
                xi.count_in(u.t, u.t + window + slack) as f64
            }
        }
    }

    /// `E ∫ h(Ξ, u) Ξ(du)`, when it has a closed form.
    pub fn exact(&self, model: &PalmModel) -> Option<f64> {
        match (self, model) {
            (PalmFunctional::Unit, _) => Some(model.intensity_mass()),
            (
                PalmFunctional::TotalCount,
                PalmModel::Mgi {
                    n, arrival, x_n, ..
                },
            ) => {
                let mu = *n as f64 * arrival.total_mass();
                Some(mu + (mu + *x_n as f64).powi(2))
            }
            (
                &PalmFunctional::Successor { window },
                PalmModel::Mgi {
                    n, arrival, x_n, ..
                },
            ) => {
                if !arrival.atoms().is_empty() {
                    return None;
                }
                let t = arrival.horizon();
                let w = window.min(t);
                let na = *n as f64 * arrival.rate();
                Some(na * na * (w * t - 0.5 * w * w) + *x_n as f64 * na * w)
            }
            (
                PalmFunctional::TotalCount,
                PalmModel::Gigi {
                    n, law, horizon, ..
                },
            ) => {
                let sites = lattice_sites(*n, *horizon);
                Some(
                    lattice_pair_sum(law, sites, sites.saturating_sub(1)) * 2.0
                        + sites as f64 / law.mean(),
                )
            }
            (
                &PalmFunctional::Successor { window },
                PalmModel::Gigi {
                    n, law, horizon, ..
                },
            ) => {
                let sites = lattice_sites(*n, *horizon);
                let reach = lattice_sites(*n, window).min(sites.saturating_sub(1));
                Some(lattice_pair_sum(law, sites, reach))
            }
        }
    }
}

/// `m⁻¹ Σ_{l=1}^{reach} (sites − l) u_l`: expected number of ordered renewal
/// pairs at lattice distance `1..=reach`.
fn lattice_pair_sum(law: &RenewalLaw, sites: u64, reach: u64) -> f64 {
    if reach == 0 {
        return 0.0;
    }
    let u = law.renewal_mass(reach as usize);
    u.iter()
        .enumerate()
        .map(|(idx, ul)| (sites - (idx as u64 + 1)) as f64 * ul)
        .sum::<f64>()
        / law.mean()
}

#[derive(Debug, Clone)]
pub struct PalmTestReport {
    pub name: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// Combined standard error of `lhs − rhs`.
    pub se: f64,
    pub exact: Option<f64>,
    pub pass: bool,
}

impl PalmTestReport {
    /// Whether both estimates are also within 4 SE of the closed form.
    pub fn exact_consistent(&self) -> Option<bool> {
        self.exact.map(|e| {
            let slack = 1e-9 * e.abs().max(1.0);
            self.lhs.within(e, 4.0, slack) && self.rhs.within(e, 4.0, slack)
        })
    }
}

fn sample_base<R: Rng + ?Sized>(model: &PalmModel, rng: &mut R) -> Result<Base> {
    match model {
        PalmModel::Mgi {
            n,
            arrival,
            service,
            x_n,
            initial,
        } => Ok(Base::Mgi(sample_mgi(
            *n, arrival, service, *x_n, initial, rng,
        )?)),
        PalmModel::Gigi {
            n,
            law,
            service,
            horizon,
        } => Ok(Base::Gigi(sample_gigi_realization(
            *n, law, service, *horizon, rng,
        )?)),
    }
}

enum Base {
    Mgi(MarkedPointProcess),
    Gigi(GigiRealization),
}

fn lhs_sample<R: Rng + ?Sized>(model: &PalmModel, h: &PalmFunctional, rng: &mut R) -> Result<f64> {
    let xi = match sample_base(model, rng)? {
        Base::Mgi(p) => p,
        Base::Gigi(r) => r.process(),
    };
    Ok(xi.points().iter().map(|u| h.eval(&xi, u)).sum())
}

fn rhs_sample<R: Rng + ?Sized>(model: &PalmModel, h: &PalmFunctional, rng: &mut R) -> Result<f64> {
    let kappa = model.intensity_mass();
    if kappa <= 0.0 {
        return Ok(0.0);
    }
    let base = sample_base(model, rng)?;
    let value = match (model, base) {
        (
            PalmModel::Mgi {
                n,
                arrival,
                service,
                x_n,
                initial,
            },
            Base::Mgi(xi),
        ) => {
            let poisson_mass = *n as f64 * arrival.total_mass();
            let pick_initial = rng.random::<f64>() * kappa >= poisson_mass && *x_n > 0;
            let (u, palm) = if pick_initial {
                let u = Point {
                    t: 0.0,
                    y: initial.sample(rng),
                    tag: Tag::Initial,
                };
                (u, palm_mgi(&xi, (0.0, u.y), rng)?.palm)
            } else {
                let u = Point {
                    t: arrival.sample_time(rng),
                    y: service.sample(rng),
                    tag: Tag::Poisson,
                };
                (u, xi)
            };
            h.eval(&palm.with_point(u), &u)
        }
        (PalmModel::Gigi { law, .. }, Base::Gigi(r)) => {
            let site = rng.random_range(1..=r.sites());
            let mut lp = palm_lattice(&r.occupied, site, law, rng)?;
            lp.palm[site as usize - 1] = true;
            let xi = indicators_to_process(&lp.palm, r.n, r.horizon, &r.marks);
            let u = Point {
                t: site as f64 / r.n as f64,
                y: r.marks.mark(site),
                tag: Tag::Renewal,
            };
            h.eval(&xi, &u)
        }
        _ => unreachable!("base sampled from the same model"),
    };
    Ok(kappa * value)
}

/// Estimate both sides of the Palm identity with `replications` independent
/// draws each. Passes when they agree within 4 combined standard errors.
pub fn palm_identity_test(
    model: &PalmModel,
    h: &PalmFunctional,
    replications: u64,
    seed: u64,
    exec: Execution,
) -> Result<PalmTestReport> {
    if replications < 2 {
        return Err(Error::BudgetTooSmall(replications));
    }
    let draws = exec.replicate(seed, 2 * replications, |idx, rng| {
        if idx < replications {
            lhs_sample(model, h, rng)
        } else {
            rhs_sample(model, h, rng)
        }
    });
    let draws: Vec<f64> = draws.into_iter().collect::<Result<_>>()?;
    let (l, r) = draws.split_at(replications as usize);
    let lhs = mean_se(l);
    let rhs = mean_se(r);
    let se = lhs.se.hypot(rhs.se);
    let pass = (lhs.value - rhs.value).abs() <= 4.0 * se + 1e-12 * lhs.value.abs().max(1.0);
    Ok(PalmTestReport {
        name: h.name(),
        lhs,
        rhs,
        se,
        exact: h.exact(model),
        pass,
    })
}

/// The models used by the `palm-check` suite.
pub fn bundled_models() -> Vec<(String, PalmModel)> {
    let exp1 = ServiceDistribution::Exponential { rate: 1.0 };
    let unif = ServiceDistribution::Uniform { lo: 0.0, hi: 1.0 };
    let leb = ArrivalMeasure::lebesgue(1.0).expect("unit horizon");
    vec![
        (
            "mgi_poisson".into(),
            PalmModel::Mgi {
                n: 20,
                arrival: leb.clone(),
                service: exp1,
                x_n: 0,
                initial: exp1,
            },
        ),
        (
            "mgi_initial".into(),
            PalmModel::Mgi {
                n: 20,
                arrival: ArrivalMeasure::zero(1.0).expect("unit horizon"),
                service: exp1,
                x_n: 5,
                initial: unif,
            },
        ),
        (
            "mgi_mixed".into(),
            PalmModel::Mgi {
                n: 20,
                arrival: leb,
                service: exp1,
                x_n: 10,
                initial: unif,
            },
        ),
        (
            "gigi_uniform12".into(),
            PalmModel::Gigi {
                n: 20,
                law: RenewalLaw::uniform_int(1, 2).expect("valid law"),
                service: exp1,
                horizon: 1.0,
            },
        ),
    ]
}

/// Unit, total count and successor count; the successor window is one
/// lattice step for GI/GI.
pub fn bundled_functionals(model: &PalmModel) -> Vec<PalmFunctional> {
    let window = match model {
        PalmModel::Mgi { .. } => 0.1,
        PalmModel::Gigi { n, .. } => 1.0 / *n as f64,
    };
    vec![
        PalmFunctional::Unit,
        PalmFunctional::TotalCount,
        PalmFunctional::Successor { window },
    ]
}

/// Run every bundled functional on every bundled model.
pub fn bundled_suite(
    replications: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<(String, PalmTestReport)>> {
    let mut out = Vec::new();
    for (k, (name, model)) in bundled_models().into_iter().enumerate() {
        for (j, h) in bundled_functionals(&model).iter().enumerate() {
            let sub = replication_rng(seed, (k * 16 + j) as u64).random::<u64>();
            let report = palm_identity_test(&model, h, replications, sub, exec)?;
            out.push((format!("{name}/{}", report.name), report));
        }
    }
    Ok(out)
}

pub fn write_reports<W: Write>(reports: &[(String, PalmTestReport)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["test", "lhs", "rhs", "se", "pass"])?;
    for (name, r) in reports {
        w.write_record([
            name.clone(),
            r.lhs.value.to_string(),
            r.rhs.value.to_string(),
            r.se.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_reports(reports: &[(String, PalmTestReport)], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_reports(reports, file).map_err(|e| Error::csv(path, e))
}
