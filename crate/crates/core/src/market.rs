//! Return matrices for one trial.
//!
//! Entry `(i, mu)` of `x` is the centered return `x̄_{i mu} - r_i` divided by
//! `sqrt(N)`, so `J = X X^T` needs no further scaling and
//! `E[J_ii] = (p / N) v_i`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperparams::HyperParams;
use crate::seed;

/// Standardized (mean 0, variance 1) noise law for the return fluctuations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    Gaussian,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
    /// `±1` with equal probability.
    Rademacher,
}

impl NoiseSpec {
    pub const ALL: [NoiseSpec; 3] = [NoiseSpec::Gaussian, NoiseSpec::Uniform, NoiseSpec::Rademacher];

    pub fn name(&self) -> &'static str {
        match self {
            NoiseSpec::Gaussian => "gaussian",
            NoiseSpec::Uniform => "uniform",
            NoiseSpec::Rademacher => "rademacher",
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSpec::Gaussian => rng.sample(StandardNormal),
            NoiseSpec::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            NoiseSpec::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

impl std::str::FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseSpec::Gaussian),
            "uniform" => Ok(NoiseSpec::Uniform),
            "rademacher" => Ok(NoiseSpec::Rademacher),
            other => Err(Error::Parameter(format!("unknown noise kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSample {
    /// `N x p` scaled, centered returns.
    pub x: DMatrix<f64>,
    /// `N x N` matrix `X X^T`.
    pub j: DMatrix<f64>,
    pub n_assets: usize,
    pub n_periods: usize,
}

impl MarketSample {
    /// Wraps an existing return matrix and computes `J`.
    pub fn from_returns(x: DMatrix<f64>) -> Self {
        let (n_assets, n_periods) = x.shape();
        let j = gram(&x);
        MarketSample { x, j, n_assets, n_periods }
    }

    pub fn alpha(&self) -> f64 {
        self.n_periods as f64 / self.n_assets as f64
    }

    /// Writes `x` as `N: u64 LE`, `p: u64 LE`, then `N * p` little-endian
    /// `f64` values in row-major order.
    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.n_assets as u64).to_le_bytes())?;
        w.write_all(&(self.n_periods as u64).to_le_bytes())?;
        for i in 0..self.n_assets {
            for mu in 0..self.n_periods {
                w.write_all(&self.x[(i, mu)].to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_dump(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let p = u64::from_le_bytes(word) as usize;
        let mut x = DMatrix::zeros(n, p);
        for i in 0..n {
            for mu in 0..p {
                r.read_exact(&mut word)?;
                x[(i, mu)] = f64::from_le_bytes(word);
            }
        }
        if r.read(&mut word)? != 0 {
            return Err(Error::Io("trailing bytes after return matrix".into()));
        }
        Ok(MarketSample::from_returns(x))
    }
}

/// `X X^T`, written into a single symmetric `N x N` buffer.
fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut j = DMatrix::zeros(n, n);
    // gemm on the transposed view; the only N x N allocation is `j`.
    j.gemm(1.0, x, &x.transpose(), 0.0);
    // Symmetrize exactly so downstream Cholesky sees a symmetric input.
    for c in 0..n {
        for r in (c + 1)..n {
            let v = 0.5 * (j[(r, c)] + j[(c, r)]);
            j[(r, c)] = v;
            j[(c, r)] = v;
        }
    }
    j
}

/// Draws the centered return matrix for `params` over `n_periods` periods.
///
/// Noise is drawn asset by asset, period by period, from a ChaCha stream
/// seeded with `rng_seed`.
pub fn generate_market(
    params: &HyperParams,
    n_periods: usize,
    noise: NoiseSpec,
    rng_seed: u64,
) -> Result<MarketSample> {
    params.validate()?;
    let n = params.n_assets();
    if n_periods <= n {
        return Err(Error::PeriodRatio { alpha: n_periods as f64 / n as f64 });
    }
    let mut rng = seed::rng(rng_seed);
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut x = DMatrix::zeros(n, n_periods);
    for (i, &v) in params.variances.iter().enumerate() {
        let scale = v.sqrt() * inv_sqrt_n;
        for mu in 0..n_periods {
            x[(i, mu)] = scale * noise.draw(&mut rng);
        }
    }
    Ok(MarketSample::from_returns(x))
}
