use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::laws::{ArrivalMeasure, RenewalLaw, ServiceDistribution};
use crate::stein::{FiniteDimTestFunction, Form};
use crate::{Error, Result};

/// Smallest replication budget accepted for an experiment.
pub const MIN_REPLICATIONS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mgi,
    Gigi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Points(Vec<f64>),
    Range(GridRange),
}

/// `points` equally spaced instants from `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        match *self {
            GridSpec::Points(ref p) => Ok(p.clone()),
            GridSpec::Range(GridRange { from, to, points }) => {
                if points < 2 || !(to > from) {
                    return Err(Error::Config(
                        "grid range needs from < to and points >= 2".into(),
                    ));
                }
                let step = (to - from) / (points - 1) as f64;
                Ok((0..points)
                    .map(|i| {
                        if i + 1 == points {
                            to
                        } else {
                            from + step * i as f64
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceSpec {
    Exp { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Deterministic { value: f64 },
    Pareto { alpha: f64, scale: f64 },
    Erlang { shape: u32, rate: f64 },
    Never,
}

impl ServiceSpec {
    pub fn build(&self) -> Result<ServiceDistribution> {
        match *self {
            ServiceSpec::Exp { rate } => ServiceDistribution::exponential(rate),
            ServiceSpec::Uniform { lo, hi } => ServiceDistribution::uniform(lo, hi),
            ServiceSpec::Deterministic { value } => ServiceDistribution::deterministic(value),
            ServiceSpec::Pareto { alpha, scale } => ServiceDistribution::pareto(alpha, scale),
            ServiceSpec::Erlang { shape, rate } => ServiceDistribution::erlang(shape, rate),
            ServiceSpec::Never => Ok(ServiceDistribution::Never),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RenewalSpec {
    UniformInt {
        lo: usize,
        hi: usize,
    },
    Constant {
        value: usize,
    },
    Geometric {
        p: f64,
    },
    Zeta {
        s: f64,
    },
    Pmf {
        probs: Vec<f64>,
        moment_order: Option<u32>,
    },
}

impl RenewalSpec {
    pub fn build(&self) -> Result<RenewalLaw> {
        match self {
            RenewalSpec::UniformInt { lo, hi } => RenewalLaw::uniform_int(*lo, *hi),
            RenewalSpec::Constant { value } => RenewalLaw::constant(*value),
            RenewalSpec::Geometric { p } => RenewalLaw::geometric(*p),
            RenewalSpec::Zeta { s } => RenewalLaw::zeta(*s),
            RenewalSpec::Pmf {
                probs,
                moment_order,
            } => RenewalLaw::from_pmf(probs.clone(), *moment_order),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalSpec {
    Lebesgue {
        #[serde(rename = "T")]
        horizon: Option<f64>,
        rate: Option<f64>,
    },
    Atoms {
        #[serde(rename = "T")]
        horizon: Option<f64>,
        rate: Option<f64>,
        times: Vec<f64>,
        masses: Vec<f64>,
    },
    None,
}

impl ArrivalSpec {
    pub fn build(&self, default_horizon: f64) -> Result<ArrivalMeasure> {
        match self {
            ArrivalSpec::Lebesgue { horizon, rate } => ArrivalMeasure::new(
                horizon.unwrap_or(default_horizon),
                rate.unwrap_or(1.0),
                Vec::new(),
            ),
            ArrivalSpec::Atoms {
                horizon,
                rate,
                times,
                masses,
            } => {
                if times.len() != masses.len() {
                    return Err(Error::Config("arrival atoms need one mass per time".into()));
                }
                ArrivalMeasure::new(
                    horizon.unwrap_or(default_horizon),
                    rate.unwrap_or(0.0),
                    times.iter().copied().zip(masses.iter().copied()).collect(),
                )
            }
            ArrivalSpec::None => ArrivalMeasure::zero(default_horizon),
        }
    }
}

/// How `x_n` follows from `n` and `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum XnRule {
    Fixed(u64),
    Named(String),
}

impl XnRule {
    pub fn resolve(&self, n: u64, x: f64) -> Result<u64> {
        let nx = n as f64 * x;
        match self {
            XnRule::Fixed(v) => Ok(*v),
            XnRule::Named(s) => match s.as_str() {
                // n·x is often an integer up to rounding
                "floor" => Ok((nx + 1e-9).floor() as u64),
                "ceil" => Ok((nx - 1e-9).ceil() as u64),
                "round" => Ok(nx.round() as u64),
                other => Err(Error::Config(format!("unknown x_n rule {other:?}"))),
            },
        }
    }
}

impl Default for XnRule {
    fn default() -> Self {
        XnRule::Named("floor".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionSpec {
    Linear {
        instants: Vec<f64>,
        coeffs: Vec<f64>,
    },
    Square {
        instant: f64,
    },
    Polynomial {
        instants: Vec<f64>,
        linear: Vec<f64>,
        quadratic: Vec<f64>,
    },
    CosSum {
        instants: Vec<f64>,
        coeffs: Option<Vec<f64>>,
    },
    SigmoidProduct {
        instants: Vec<f64>,
    },
}

impl TestFunctionSpec {
    pub fn build(&self) -> Result<FiniteDimTestFunction> {
        match self {
            TestFunctionSpec::Linear { instants, coeffs } => {
                FiniteDimTestFunction::linear(instants.clone(), coeffs.clone())
            }
            TestFunctionSpec::Square { instant } => {
                FiniteDimTestFunction::square(vec![*instant], 0)
            }
            TestFunctionSpec::Polynomial {
                instants,
                linear,
                quadratic,
            } => FiniteDimTestFunction::new(
                instants.clone(),
                Form::Polynomial {
                    linear: linear.clone(),
                    quadratic: quadratic.clone(),
                },
            ),
            TestFunctionSpec::CosSum { instants, coeffs } => FiniteDimTestFunction::cos_sum(
                instants.clone(),
                coeffs.clone().unwrap_or_else(|| vec![1.0; instants.len()]),
            ),
            TestFunctionSpec::SigmoidProduct { instants } => {
                FiniteDimTestFunction::sigmoid_product(instants.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TolerancePolicy {
    /// Standard errors allowed between estimate and target.
    pub se_multiplier: f64,
    /// `c` in the finite-`n` covariance allowance `c·n^{−1/2}`.
    pub bias_c: f64,
    /// Slack subtracted from the theoretical rate in slope checks.
    pub slope_slack: f64,
    /// Theoretical decay rate of the expectation gap; defaults to `1/2`
    /// for M/GI and `β̄` for GI/GI.
    pub theory_rate: Option<f64>,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            se_multiplier: 4.0,
            bias_c: 0.25,
            slope_slack: 0.1,
            theory_rate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSpec {
    pub beta: f64,
    pub r: Option<u32>,
    pub eta: f64,
    pub k: Option<u32>,
    pub chi: f64,
    pub constant: f64,
    pub smoothness: f64,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec {
            beta: 1.0,
            r: None,
            eta: 0.5,
            k: None,
            chi: 0.0,
            constant: 1.0,
            smoothness: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteinSpec {
    pub quad_nodes: usize,
    pub mc_draws: usize,
    /// Random evaluation points per test function.
    pub points: usize,
    /// Standard deviation of the random evaluation points.
    pub w_scale: f64,
    /// Probes in the derivative-bound check.
    pub probes: usize,
}

impl Default for SteinSpec {
    fn default() -> Self {
        SteinSpec {
            quad_nodes: 64,
            mc_draws: 100_000,
            points: 20,
            w_scale: 1.5,
            probes: 100,
        }
    }
}

fn default_batches() -> usize {
    30
}

fn default_test_functions() -> Vec<TestFunctionSpec> {
    vec![TestFunctionSpec::CosSum {
        instants: vec![1.0],
        coeffs: None,
    }]
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n: Vec<u64>,
    pub replications: u64,
    pub seed: Option<u64>,
    pub grid: GridSpec,
    /// Grid for covariance checks, which cost `O(grid²)` per replication;
    /// defaults to `grid`.
    pub covariance_grid: Option<GridSpec>,
    pub arrival: Option<ArrivalSpec>,
    pub service: ServiceSpec,
    pub initial_service: Option<ServiceSpec>,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub x_n: XnRule,
    pub renewal: Option<RenewalSpec>,
    #[serde(default = "default_test_functions")]
    pub test_functions: Vec<TestFunctionSpec>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub tolerance: TolerancePolicy,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub stein: SteinSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required".into()))
    }

    pub fn covariance_grid(&self) -> Result<Vec<f64>> {
        self.covariance_grid.as_ref().unwrap_or(&self.grid).points()
    }

    fn check_grid(&self, grid: &[f64]) -> Result<()> {
        if grid.is_empty()
            || !grid.windows(2).all(|w| w[0] < w[1])
            || grid.iter().any(|&s| !(0.0..=self.horizon).contains(&s))
        {
            return Err(Error::UnsortedGrid {
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Check every invariant except the presence of a seed.
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Config("T must be positive".into()));
        }
        if self.n.is_empty() || self.n[0] == 0 || !self.n.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "n ladder must be non-empty, positive and strictly increasing".into(),
            ));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::BudgetTooSmall(self.replications));
        }
        if self.batches < 2 || self.batches as u64 > self.replications {
            return Err(Error::Config("batches must lie in 2..=replications".into()));
        }
        self.check_grid(&self.grid.points()?)?;
        self.check_grid(&self.covariance_grid()?)?;
        if self.eps.iter().any(|&e| !(e > 0.0)) || self.theta.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config(
                "eps and theta values must be positive".into(),
            ));
        }
        match self.model {
            ModelKind::Mgi => {
                if self.x < 0.0 {
                    return Err(Error::Config("x must be >= 0".into()));
                }
                self.x_n.resolve(1, self.x)?;
            }
            ModelKind::Gigi => {
                if self.renewal.is_none() {
                    return Err(Error::Config("gigi model needs a renewal law".into()));
                }
            }
        }
        for g in &self.test_functions {
            g.build()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MMINF: &str = r#"
model = "mgi"
T = 1.0
n = [50, 100]
replications = 2000
seed = 3
grid = {from = 0.0, to = 1.0, points = 5}
arrival = {kind = "lebesgue", T = 1.0}
service = {kind = "exp", rate = 1.0}
test_functions = [{kind = "cos_sum", instants = [1.0]}, {kind = "square", instant = 0.5}]

[tolerance]
bias_c = 0.5
"#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::from_toml(MMINF).unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid.points().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.tolerance.bias_c, 0.5);
        assert_eq!(c.tolerance.se_multiplier, 4.0);
        assert_eq!(c.x_n.resolve(100, 0.37).unwrap(), 37);
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_configs() {
        let small = MMINF.replace("replications = 2000", "replications = 999");
        assert!(matches!(
            ExperimentConfig::from_toml(&small).unwrap().validate(),
            Err(Error::BudgetTooSmall(999))
        ));
        let ladder = MMINF.replace("n = [50, 100]", "n = [100, 50]");
        assert!(ExperimentConfig::from_toml(&ladder)
            .unwrap()
            .validate()
            .is_err());
        let typo = MMINF.replace("seed = 3", "sead = 3");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
        let gigi = MMINF.replace("model = \"mgi\"", "model = \"gigi\"");
        assert!(ExperimentConfig::from_toml(&gigi)
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn renewal_and_service_kinds() {
        let r: RenewalSpec = toml::from_str("kind = \"uniform_int\"\nlo = 1\nhi = 2").unwrap();
        assert_eq!(r.build().unwrap().mean(), 1.5);
        let s: ServiceSpec = toml::from_str("kind = \"pareto\"\nalpha = 2.5\nscale = 1.0").unwrap();
        assert!(matches!(
            s.build().unwrap(),
            ServiceDistribution::Pareto { .. }
        ));
        let s: ServiceSpec = toml::from_str("kind = \"never\"").unwrap();
        assert_eq!(s.build().unwrap(), ServiceDistribution::Never);
    }
}
