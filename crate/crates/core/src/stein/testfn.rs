use crate::{Error, Result};

/// `max_{r ≥ 0} r/(1 + r³) = max_{r ≥ 0} r²/(1 + r³) = 2^{2/3}/3`.
const CUBIC_PEAK: f64 = 0.529_133_683_989_399_8;

const SIG1: f64 = 0.25;
// sup|σ''| = 1/(6√3), sup|σ'''| = 1/8
const SIG2: f64 = 0.096_225_044_864_937_63;
const SIG3: f64 = 0.125;

/// The function `F: ℝ^k → ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Form {
    /// `c·w + wᵀ Q w`, `Q` symmetric and row-major.
    Polynomial {
        linear: Vec<f64>,
        quadratic: Vec<f64>,
    },
    /// `cos(a·w)`.
    CosSum { coeffs: Vec<f64> },
    /// `Π σ(w_i)` with the logistic `σ`.
    SigmoidProduct,
}

/// `g(w) = scale·F(w(t₁), …, w(t_k)) + offset` with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDimTestFunction {
    instants: Vec<f64>,
    form: Form,
    scale: f64,
    offset: f64,
    smoothness: Option<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl FiniteDimTestFunction {
    pub fn new(instants: Vec<f64>, form: Form) -> Result<Self> {
        if instants.is_empty() {
            return Err(Error::InvalidArgument(
                "test function needs at least one instant".into(),
            ));
        }
        if !instants.windows(2).all(|w| w[0] < w[1]) || instants[0] < 0.0 {
            return Err(Error::InvalidArgument(
                "instants must be increasing and >= 0".into(),
            ));
        }
        let k = instants.len();
        match &form {
            Form::Polynomial { linear, quadratic } => {
                if linear.len() != k || quadratic.len() != k * k {
                    return Err(Error::InvalidArgument(
                        "polynomial coefficient shape mismatch".into(),
                    ));
                }
                for i in 0..k {
                    for j in 0..k {
                        if quadratic[i * k + j] != quadratic[j * k + i] {
                            return Err(Error::InvalidArgument(
                                "quadratic form must be symmetric".into(),
                            ));
                        }
                    }
                }
            }
            Form::CosSum { coeffs } if coeffs.len() != k => {
                return Err(Error::InvalidArgument(
                    "cosine coefficient count mismatch".into(),
                ));
            }
            _ => {}
        }
        Ok(FiniteDimTestFunction {
            instants,
            form,
            scale: 1.0,
            offset: 0.0,
            smoothness: None,
        })
    }

    /// `Σ c_i w(t_i)`.
    pub fn linear(instants: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        let k = coeffs.len();
        Self::new(
            instants,
            Form::Polynomial {
                linear: coeffs,
                quadratic: vec![0.0; k * k],
            },
        )
    }

    /// `w(t_index)²`.
    pub fn square(instants: Vec<f64>, index: usize) -> Result<Self> {
        let k = instants.len();
        if index >= k {
            return Err(Error::InvalidArgument(format!(
                "index {index} out of range"
            )));
        }
        let mut quadratic = vec![0.0; k * k];
        quadratic[index * k + index] = 1.0;
        Self::new(
            instants,
            Form::Polynomial {
                linear: vec![0.0; k],
                quadratic,
            },
        )
    }

    pub fn constant(instants: Vec<f64>, c: f64) -> Result<Self> {
        Ok(Self::linear(instants.clone(), vec![0.0; instants.len()])?.with_offset(c))
    }

    /// `cos(Σ a_i w(t_i))`.
    pub fn cos_sum(instants: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(instants, Form::CosSum { coeffs })
    }

    pub fn sigmoid_product(instants: Vec<f64>) -> Result<Self> {
        Self::new(instants, Form::SigmoidProduct)
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self.offset *= c;
        self
    }

    pub fn with_offset(mut self, c: f64) -> Self {
        self.offset += c;
        self
    }

    /// Attach the smoothness constant `S_g` (metadata only).
    pub fn with_smoothness(mut self, s: f64) -> Self {
        self.smoothness = Some(s);
        self
    }

    pub fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn dim(&self) -> usize {
        self.instants.len()
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    pub fn name(&self) -> String {
        let base = match &self.form {
            Form::Polynomial { linear, quadratic } => {
                if quadratic.iter().all(|&q| q == 0.0) {
                    if linear.iter().all(|&c| c == 0.0) {
                        "constant".to_string()
                    } else {
                        "linear".to_string()
                    }
                } else {
                    "quadratic".to_string()
                }
            }
            Form::CosSum { .. } => "cos_sum".to_string(),
            Form::SigmoidProduct => "sigmoid_product".to_string(),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{}*{base}", self.scale)
        }
    }

    /// Coefficients `c` when `g(w) = c·w + const`.
    pub fn linear_coefficients(&self) -> Option<Vec<f64>> {
        match &self.form {
            Form::Polynomial { linear, quadratic } if quadratic.iter().all(|&q| q == 0.0) => {
                Some(linear.iter().map(|c| c * self.scale).collect())
            }
            _ => None,
        }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let k = self.dim();
        let f = match &self.form {
            Form::Polynomial { linear, quadratic } => {
                let mut v: f64 = linear.iter().zip(w).map(|(c, x)| c * x).sum();
                for i in 0..k {
                    for j in 0..k {
                        v += quadratic[i * k + j] * w[i] * w[j];
                    }
                }
                v
            }
            Form::CosSum { coeffs } => coeffs.iter().zip(w).map(|(a, x)| a * x).sum::<f64>().cos(),
            Form::SigmoidProduct => w.iter().map(|&x| sigmoid(x)).product(),
        };
        self.scale * f + self.offset
    }

    pub fn gradient(&self, w: &[f64], out: &mut [f64]) {
        let k = self.dim();
        match &self.form {
            Form::Polynomial { linear, quadratic } => {
                for i in 0..k {
                    let q: f64 = (0..k).map(|j| quadratic[i * k + j] * w[j]).sum();
                    out[i] = linear[i] + 2.0 * q;
                }
            }
            Form::CosSum { coeffs } => {
                let s = coeffs.iter().zip(w).map(|(a, x)| a * x).sum::<f64>().sin();
                for i in 0..k {
                    out[i] = -coeffs[i] * s;
                }
            }
            Form::SigmoidProduct => {
                let sig: Vec<f64> = w.iter().map(|&x| sigmoid(x)).collect();
                for i in 0..k {
                    let mut p = sig[i] * (1.0 - sig[i]);
                    for (j, s) in sig.iter().enumerate() {
                        if j != i {
                            p *= s;
                        }
                    }
                    out[i] = p;
                }
            }
        }
        for o in out.iter_mut() {
            *o *= self.scale;
        }
    }

    /// Row-major `k × k` Hessian.
    pub fn hessian(&self, w: &[f64], out: &mut [f64]) {
        let k = self.dim();
        match &self.form {
            Form::Polynomial { quadratic, .. } => {
                for (o, q) in out.iter_mut().zip(quadratic) {
                    *o = 2.0 * q;
                }
            }
            Form::CosSum { coeffs } => {
                let c = coeffs.iter().zip(w).map(|(a, x)| a * x).sum::<f64>().cos();
                for i in 0..k {
                    for j in 0..k {
                        out[i * k + j] = -coeffs[i] * coeffs[j] * c;
                    }
                }
            }
            Form::SigmoidProduct => {
                let sig: Vec<f64> = w.iter().map(|&x| sigmoid(x)).collect();
                let d1: Vec<f64> = sig.iter().map(|s| s * (1.0 - s)).collect();
                let d2: Vec<f64> = sig
                    .iter()
                    .zip(&d1)
                    .map(|(s, d)| d * (1.0 - 2.0 * s))
                    .collect();
                for i in 0..k {
                    for j in 0..k {
                        let mut p = 1.0;
                        for l in 0..k {
                            p *= if i == j && l == i {
                                d2[l]
                            } else if l == i || l == j {
                                d1[l]
                            } else {
                                sig[l]
                            };
                        }
                        out[i * k + j] = p;
                    }
                }
            }
        }
        for o in out.iter_mut() {
            *o *= self.scale;
        }
    }

    /// Closed-form upper bound on
    /// `‖g‖_{M'} = sup|g|/(1+‖w‖²) + sup‖Dg‖/(1+‖w‖) + sup‖D²g‖ + Lip(D²g)`.
    pub fn norm_m_prime(&self) -> f64 {
        let (t0, t1, t2, t3) = match &self.form {
            Form::Polynomial { linear, quadratic } => {
                let a: f64 = linear.iter().map(|c| c.abs()).sum();
                let b: f64 = quadratic.iter().map(|q| q.abs()).sum();
                (a / 2.0 + b, a.max(2.0 * b), 2.0 * b, 0.0)
            }
            Form::CosSum { coeffs } => {
                let a: f64 = coeffs.iter().map(|c| c.abs()).sum();
                (1.0, a * a / (1.0 + a), a * a, a.powi(3))
            }
            Form::SigmoidProduct => self.sigmoid_bounds(),
        };
        self.scale.abs() * (t0 + t1 + t2 + t3) + self.offset.abs()
    }

    /// Closed-form upper bound on
    /// `‖g‖_M = sup|g|/(1+‖w‖³) + sup‖Dg‖/(1+‖w‖²) + sup‖D²g‖/(1+‖w‖) + Lip(D²g)`.
    pub fn norm_m(&self) -> f64 {
        let (t0, t1, t2, t3) = match &self.form {
            Form::Polynomial { linear, quadratic } => {
                let a: f64 = linear.iter().map(|c| c.abs()).sum();
                let b: f64 = quadratic.iter().map(|q| q.abs()).sum();
                (CUBIC_PEAK * (a + b), a + b, 2.0 * b, 0.0)
            }
            Form::CosSum { coeffs } => {
                let a: f64 = coeffs.iter().map(|c| c.abs()).sum();
                (1.0, a * (a / 2.0).min(1.0), a * a, a.powi(3))
            }
            Form::SigmoidProduct => self.sigmoid_bounds(),
        };
        self.scale.abs() * (t0 + t1 + t2 + t3) + self.offset.abs()
    }

    fn sigmoid_bounds(&self) -> (f64, f64, f64, f64) {
        let k = self.dim() as f64;
        (
            1.0,
            k * SIG1,
            k * SIG2 + k * (k - 1.0) * SIG1 * SIG1,
            k * SIG3 + 3.0 * k * (k - 1.0) * SIG2 * SIG1 + k * (k - 1.0) * (k - 2.0) * SIG1.powi(3),
        )
    }
}
