//! MT-functions, normalized sample weights and test-point generators.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{MticaError, Result};

/// Natural log of the smallest mean raw weight accepted before a weight
/// vector is declared degenerate (`ln 1e-300`).
pub const LOG_WEIGHT_FLOOR: f64 = -690.775_527_898_213_7;

/// A non-negative product-form weight function generating a measure transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MtFunction {
    /// `u(x) = 1`; the transformed measure equals the original one.
    Constant,
    /// `u(x) = exp(tᵀx)`.
    Exponential { t: Vec<f64> },
    /// `u(x) = exp(-‖x - t‖² / (2τ²))`.
    Gaussian { t: Vec<f64>, tau: f64 },
}

impl MtFunction {
    pub fn exponential(t: DVector<f64>) -> Self {
        MtFunction::Exponential {
            t: t.as_slice().to_vec(),
        }
    }

    pub fn gaussian(t: DVector<f64>, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(MtFunction::Gaussian {
            t: t.as_slice().to_vec(),
            tau,
        })
    }

    /// Dimension of the test-point, if the function has one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            MtFunction::Constant => None,
            MtFunction::Exponential { t } | MtFunction::Gaussian { t, .. } => Some(t.len()),
        }
    }

    pub fn test_point(&self) -> Option<&[f64]> {
        match self {
            MtFunction::Constant => None,
            MtFunction::Exponential { t } | MtFunction::Gaussian { t, .. } => Some(t),
        }
    }

    /// Checks the parameters against a data dimension `p`.
    pub fn validate(&self, p: usize) -> Result<()> {
        if let MtFunction::Gaussian { tau, .. } = self {
            check_tau(*tau)?;
        }
        match self.dim() {
            Some(d) if d != p => Err(MticaError::DimensionMismatch { expected: p, got: d }),
            _ => Ok(()),
        }
    }

    /// `ln u(x)`. The caller guarantees `x.len()` matches the test-point.
    pub fn log_value(&self, x: &[f64]) -> f64 {
        match self {
            MtFunction::Constant => 0.0,
            MtFunction::Exponential { t } => t.iter().zip(x).map(|(a, b)| a * b).sum(),
            MtFunction::Gaussian { t, tau } => {
                let d2: f64 = t.iter().zip(x).map(|(a, b)| (b - a) * (b - a)).sum();
                -d2 / (2.0 * tau * tau)
            }
        }
    }

    /// `u(x)`, with a dimension check.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.validate(x.len())?;
        Ok(self.log_value(x).exp())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(MticaError::InvalidParameter {
            name: "tau",
            reason: format!("width must be positive and finite, got {tau}"),
        })
    }
}

/// Normalized sample weights `u(X_n) / Σ_m u(X_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: DVector<f64>,
    /// `ln((1/N) Σ_n u(X_n))`.
    pub log_norm: f64,
}

/// Evaluates the normalized weights in the log domain, shifting by the
/// maximum log-weight so that no exponential overflows.
pub fn eval_weights(data: &DataMatrix, spec: &MtFunction) -> Result<WeightVector> {
    let p = data.n_channels();
    spec.validate(p)?;
    let n = data.n_samples();
    let x = data.as_matrix();

    let mut row = vec![0.0; p];
    let mut logs = Vec::with_capacity(n);
    for i in 0..n {
        for (j, v) in row.iter_mut().enumerate() {
            *v = x[(i, j)];
        }
        logs.push(spec.log_value(&row));
    }

    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(MticaError::DegenerateWeights { log_mean_weight: max });
    }
    let ln_n = (n as f64).ln();
    if max - ln_n < LOG_WEIGHT_FLOOR {
        return Err(MticaError::DegenerateWeights {
            log_mean_weight: max - ln_n,
        });
    }

    let shifted: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = shifted.iter().sum();
    let weights = DVector::from_iterator(n, shifted.into_iter().map(|w| w / total));
    Ok(WeightVector {
        weights,
        log_norm: max + total.ln() - ln_n,
    })
}

fn check_count(name: &'static str, value: usize, min: usize) -> Result<()> {
    if value < min {
        return Err(MticaError::InvalidParameter {
            name,
            reason: format!("must be at least {min}, got {value}"),
        });
    }
    Ok(())
}

/// Test-points for the exponential family: `c · r/‖r‖` with `r` standard
/// normal and `c` uniform on `[0, 1]`, i.e. points inside the unit ball.
pub fn gen_exp_testpoints<R: Rng + ?Sized>(count: usize, p: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    check_count("M", count, 2)?;
    check_count("p", p, 1)?;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let r = loop {
            let r: DVector<f64> = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
            if r.norm() > 0.0 {
                break r;
            }
        };
        let c: f64 = rng.random();
        let norm = r.norm();
        points.push(r * (c / norm));
    }
    Ok(points)
}

const BETA_SHAPE: f64 = 3.0;
/// Standard deviation of Beta(3, 3): `sqrt(1/28)`.
const BETA_STD: f64 = 0.188_982_236_504_613_6;

/// Test-points for the Gaussian family: independent Beta(3, 3) coordinates
/// standardized to zero mean and unit variance.
pub fn gen_gauss_testpoints<R: Rng + ?Sized>(count: usize, p: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    check_count("M", count, 1)?;
    check_count("p", p, 1)?;
    let beta = Beta::new(BETA_SHAPE, BETA_SHAPE).expect("valid beta shape");
    Ok((0..count)
        .map(|_| DVector::from_fn(p, |_, _| (beta.sample(rng) - 0.5) / BETA_STD))
        .collect())
}
