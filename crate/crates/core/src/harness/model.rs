use rand::Rng;

use super::config::{ExperimentConfig, ModelKind};
use crate::gausslim::{kernel_gigi, kernel_mgi, CovarianceKernel};
use crate::laws::{ArrivalMeasure, RenewalLaw, ServiceDistribution};
use crate::palm::PalmModel;
use crate::paths::QueuePath;
use crate::pointproc::{sample_gigi, sample_mgi, MarkedPointProcess, MeanMeasure};
use crate::Result;

use super::config::XnRule;

/// A queue family indexed by `n`, with its scaling and Gaussian limit.
#[derive(Debug, Clone)]
pub enum QueueModel {
    Mgi {
        arrival: ArrivalMeasure,
        service: ServiceDistribution,
        initial: ServiceDistribution,
        x: f64,
        x_n: XnRule,
    },
    Gigi {
        law: RenewalLaw,
        service: ServiceDistribution,
        horizon: f64,
    },
}

impl QueueModel {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let service = config.service.build()?;
        match config.model {
            ModelKind::Mgi => {
                let arrival = match &config.arrival {
                    Some(a) => a.build(config.horizon)?,
                    None => ArrivalMeasure::lebesgue(config.horizon)?,
                };
                let initial = match &config.initial_service {
                    Some(s) => s.build()?,
                    None => service,
                };
                Ok(QueueModel::Mgi {
                    arrival,
                    service,
                    initial,
                    x: config.x,
                    x_n: config.x_n.clone(),
                })
            }
            ModelKind::Gigi => {
                let law = config
                    .renewal
                    .as_ref()
                    .ok_or_else(|| crate::Error::Config("gigi model needs a renewal law".into()))?
                    .build()?;
                Ok(QueueModel::Gigi {
                    law,
                    service,
                    horizon: config.horizon,
                })
            }
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            QueueModel::Mgi { arrival, .. } => arrival.horizon(),
            QueueModel::Gigi { horizon, .. } => *horizon,
        }
    }

    pub fn x_n(&self, n: u64) -> Result<u64> {
        match self {
            QueueModel::Mgi { x, x_n, .. } => x_n.resolve(n, *x),
            QueueModel::Gigi { .. } => Ok(0),
        }
    }

    /// The spatial scale: `√n` for M/GI, `σ_n` for GI/GI.
    pub fn sigma(&self, n: u64) -> Result<f64> {
        match self {
            QueueModel::Mgi { .. } => Ok((n as f64).sqrt()),
            QueueModel::Gigi { law, .. } => Ok(law.sigma_n_sq(n)?.sqrt()),
        }
    }

    /// The centering used for `X̃_n`.
    pub fn mean(&self, n: u64) -> Result<MeanMeasure> {
        Ok(match self {
            QueueModel::Mgi {
                arrival,
                service,
                initial,
                ..
            } => MeanMeasure::Mgi {
                n,
                arrival: arrival.clone(),
                service: *service,
                x_n: self.x_n(n)?,
                initial: *initial,
            },
            QueueModel::Gigi {
                law,
                service,
                horizon,
            } => MeanMeasure::gigi(n, law, *service, *horizon),
        })
    }

    /// Covariance of the Gaussian limit `Z`.
    pub fn kernel(&self) -> Result<CovarianceKernel> {
        match self {
            QueueModel::Mgi {
                arrival,
                service,
                initial,
                x,
                ..
            } => Ok(kernel_mgi(arrival, service, *x, initial)),
            QueueModel::Gigi { law, service, .. } => kernel_gigi(law, service),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Result<MarkedPointProcess> {
        match self {
            QueueModel::Mgi {
                arrival,
                service,
                initial,
                ..
            } => sample_mgi(n, arrival, service, self.x_n(n)?, initial, rng),
            QueueModel::Gigi {
                law,
                service,
                horizon,
            } => sample_gigi(n, law, service, *horizon, rng),
        }
    }

    pub fn palm_model(&self, n: u64) -> Result<PalmModel> {
        Ok(match self {
            QueueModel::Mgi {
                arrival,
                service,
                initial,
                ..
            } => PalmModel::Mgi {
                n,
                arrival: arrival.clone(),
                service: *service,
                x_n: self.x_n(n)?,
                initial: *initial,
            },
            QueueModel::Gigi {
                law,
                service,
                horizon,
            } => PalmModel::Gigi {
                n,
                law: law.clone(),
                service: *service,
                horizon: *horizon,
            },
        })
    }
}

/// Per-`n` state for repeated path evaluation.
pub(crate) struct Scaled<'a> {
    pub model: &'a QueueModel,
    pub n: u64,
    pub grid: Vec<f64>,
    pub centers: Vec<f64>,
    pub mean: MeanMeasure,
    pub sigma: f64,
}

impl<'a> Scaled<'a> {
    pub fn new(model: &'a QueueModel, n: u64, grid: &[f64]) -> Result<Self> {
        let mean = model.mean(n)?;
        let centers = grid.iter().map(|&s| mean.evaluate(s)).collect();
        Ok(Scaled {
            model,
            n,
            grid: grid.to_vec(),
            centers,
            mean,
            sigma: model.sigma(n)?,
        })
    }

    pub fn path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<QueuePath> {
        let proc = self.model.sample(self.n, rng)?;
        QueuePath::evaluate_with_centers(&proc, &self.grid, &self.centers, &self.mean, self.sigma)
    }
}
