use serde::{Deserialize, Serialize};

/// Cross-trial mean with its standard error `s / sqrt(M)`, where `s` is the
/// unbiased sample standard deviation. The error is absent for `M < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: Option<f64>,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let std_err = (xs.len() >= 2).then(|| {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        });
        Some(Estimate { mean, std_err, count: xs.len() })
    }

    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> Option<f64> {
        self.std_err.map(|se| {
            let d = (self.mean - target).abs();
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
    }

    /// True when `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        self.z_score(target).is_some_and(|z| z <= k)
    }
}
