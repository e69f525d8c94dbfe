/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, se: 0.0 }
    }

    /// `|value - target| <= k·se + slack`.
    pub fn within(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.value - target).abs() <= k * self.se + slack
    }
}

/// Sample mean and its standard error.
pub fn mean_se(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            se: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate {
            value: mean,
            se: 0.0,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate {
        value: mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Batch-means estimate: the values are split into `batches` contiguous
/// blocks, and the SE is that of the block means.
pub fn batch_means(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    let batches = batches.clamp(1, n.max(1));
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let lo = b * n / batches;
            let hi = (b + 1) * n / batches;
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let value = values.iter().sum::<f64>() / n as f64;
    if batches < 2 {
        return Estimate {
            value,
            se: f64::NAN,
        };
    }
    let bm = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Estimate {
        value,
        se: (var / batches as f64).sqrt(),
    }
}

/// Ordinary least squares fit `y = intercept + slope·x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Running first and second product moments of a fixed-length vector, for
/// covariance estimates with entrywise standard errors.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    dim: usize,
    count: u64,
    sum: Vec<f64>,
    prod: Vec<f64>,
    prod_sq: Vec<f64>,
}

impl MomentMatrix {
    pub fn new(dim: usize) -> Self {
        MomentMatrix {
            dim,
            count: 0,
            sum: vec![0.0; dim],
            prod: vec![0.0; dim * dim],
            prod_sq: vec![0.0; dim * dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.count += 1;
        for i in 0..self.dim {
            self.sum[i] += x[i];
            for j in 0..self.dim {
                let p = x[i] * x[j];
                self.prod[i * self.dim + j] += p;
                self.prod_sq[i * self.dim + j] += p * p;
            }
        }
    }

    pub fn merge(&mut self, other: &MomentMatrix) {
        assert_eq!(self.dim, other.dim);
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.prod.iter_mut().zip(&other.prod) {
            *a += b;
        }
        for (a, b) in self.prod_sq.iter_mut().zip(&other.prod_sq) {
            *a += b;
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.count as f64
    }

    /// Sample covariance of entries `i, j` with the standard error of the
    /// product-moment estimator.
    pub fn covariance(&self, i: usize, j: usize) -> Estimate {
        let n = self.count as f64;
        let k = i * self.dim + j;
        let ep = self.prod[k] / n;
        let value = ep - self.mean(i) * self.mean(j);
        let var = (self.prod_sq[k] / n - ep * ep).max(0.0);
        Estimate {
            value: value * n / (n - 1.0),
            se: (var / n).sqrt(),
        }
    }
}
