use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Exp, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{MticaError, Result};

/// Rice(ν = 1/2, σ = 1) mean: `σ √(π/2) L_{1/2}(-ν²/(2σ²))`.
const RICE_MEAN: f64 = 1.330_447_340_610_703_2;
/// Rice(ν = 1/2, σ = 1) variance: `2σ² + ν² - mean²`.
const RICE_VAR: f64 = 0.479_909_873_861_907_6;
const RICE_NU: f64 = 0.5;

/// The ten univariate source laws of the simulation study, with their fixed parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFamily {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// Arcsine on `[0, 1]`.
    Arcsine,
    /// Laplace, location 0, scale 1.
    Laplace,
    /// Student t with 3 degrees of freedom.
    StudentT,
    /// Beta(2, 2).
    Beta,
    /// Exponential with rate 1.
    Exponential,
    /// Rayleigh with scale 1.
    Rayleigh,
    /// Gamma with shape 1 and scale 1 (same law as `Exponential`).
    Gamma,
    /// Central chi-squared with 4 degrees of freedom.
    ChiSquared,
    /// Rice with noncentrality 1/2 and scale 1.
    Rice,
}

impl SourceFamily {
    pub const ALL: [SourceFamily; 10] = [
        SourceFamily::Uniform,
        SourceFamily::Arcsine,
        SourceFamily::Laplace,
        SourceFamily::StudentT,
        SourceFamily::Beta,
        SourceFamily::Exponential,
        SourceFamily::Rayleigh,
        SourceFamily::Gamma,
        SourceFamily::ChiSquared,
        SourceFamily::Rice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceFamily::Uniform => "uniform",
            SourceFamily::Arcsine => "arcsine",
            SourceFamily::Laplace => "laplace",
            SourceFamily::StudentT => "student-t",
            SourceFamily::Beta => "beta",
            SourceFamily::Exponential => "exponential",
            SourceFamily::Rayleigh => "rayleigh",
            SourceFamily::Gamma => "gamma",
            SourceFamily::ChiSquared => "chi-squared",
            SourceFamily::Rice => "rice",
        }
    }

    /// Closed-form mean and variance of the raw law.
    pub fn moments(self) -> (f64, f64) {
        match self {
            SourceFamily::Uniform => (0.5, 1.0 / 12.0),
            SourceFamily::Arcsine => (0.5, 1.0 / 8.0),
            SourceFamily::Laplace => (0.0, 2.0),
            SourceFamily::StudentT => (0.0, 3.0),
            SourceFamily::Beta => (0.5, 1.0 / 20.0),
            SourceFamily::Exponential | SourceFamily::Gamma => (1.0, 1.0),
            SourceFamily::Rayleigh => ((PI / 2.0).sqrt(), (4.0 - PI) / 2.0),
            SourceFamily::ChiSquared => (4.0, 8.0),
            SourceFamily::Rice => (RICE_MEAN, RICE_VAR),
        }
    }

    /// One raw draw.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            SourceFamily::Uniform => rng.random(),
            SourceFamily::Arcsine => 0.5 * (1.0 - (PI * rng.random::<f64>()).cos()),
            SourceFamily::Laplace => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            SourceFamily::StudentT => StudentT::new(3.0).expect("valid dof").sample(rng),
            SourceFamily::Beta => Beta::new(2.0, 2.0).expect("valid shape").sample(rng),
            SourceFamily::Exponential => Exp::new(1.0).expect("valid rate").sample(rng),
            SourceFamily::Rayleigh => {
                let u: f64 = 1.0 - rng.random::<f64>();
                (-2.0 * u.ln()).sqrt()
            }
            SourceFamily::Gamma => Gamma::new(1.0, 1.0).expect("valid shape").sample(rng),
            SourceFamily::ChiSquared => ChiSquared::new(4.0).expect("valid dof").sample(rng),
            SourceFamily::Rice => {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                (RICE_NU + a).hypot(b)
            }
        }
    }
}

impl fmt::Display for SourceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SourceFamily {
    type Err = MticaError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let alias = match key.as_str() {
            "t" | "student" | "studentt" | "t3" => "student-t",
            "chi2" | "chisquared" | "chi-square" => "chi-squared",
            "exp" => "exponential",
            other => other,
        };
        SourceFamily::ALL
            .into_iter()
            .find(|f| f.name() == alias)
            .ok_or_else(|| MticaError::InvalidParameter {
                name: "source",
                reason: format!("unknown source family `{s}`"),
            })
    }
}

/// A source law plus whether draws are standardized to zero mean, unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub family: SourceFamily,
    pub standardize: bool,
}

impl SourceSpec {
    pub fn new(family: SourceFamily) -> Self {
        Self {
            family,
            standardize: true,
        }
    }

    pub fn raw(family: SourceFamily) -> Self {
        Self {
            family,
            standardize: false,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.family.draw(rng);
        if self.standardize {
            let (mean, var) = self.family.moments();
            (x - mean) / var.sqrt()
        } else {
            x
        }
    }
}

impl From<SourceFamily> for SourceSpec {
    fn from(family: SourceFamily) -> Self {
        SourceSpec::new(family)
    }
}

/// `n` i.i.d. samples, column `k` drawn from `specs[k]`. Draws are taken
/// sample by sample, channel by channel.
pub fn sample_sources<R: Rng + ?Sized>(specs: &[SourceSpec], n: usize, rng: &mut R) -> Result<DataMatrix> {
    if specs.is_empty() {
        return Err(MticaError::InvalidParameter {
            name: "specs",
            reason: "need at least one source".into(),
        });
    }
    if n == 0 {
        return Err(MticaError::InvalidParameter {
            name: "N",
            reason: "need at least one sample".into(),
        });
    }
    let p = specs.len();
    let mut values = DMatrix::zeros(n, p);
    for i in 0..n {
        for (k, spec) in specs.iter().enumerate() {
            values[(i, k)] = spec.draw(rng);
        }
    }
    DataMatrix::new(values)
}
