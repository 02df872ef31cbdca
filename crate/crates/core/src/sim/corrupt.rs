use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{MticaError, Result};

/// Random orthogonal matrix: QR of a standard Gaussian matrix with the signs
/// of `R`'s diagonal absorbed into `Q` (Haar distributed).
pub fn random_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// 2-norm condition number.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = a.singular_values();
    s.max() / s.min()
}

/// Random mixing matrix `Q₁ diag(s) Q₂ᵀ` whose condition number is uniform on
/// `[lo, hi]`: `s` holds `1`, the drawn condition number, and values uniform
/// in between.
pub fn gen_mixing<R: Rng + ?Sized>(p: usize, cond_range: (f64, f64), rng: &mut R) -> Result<DMatrix<f64>> {
    let (lo, hi) = cond_range;
    if p == 0 {
        return Err(MticaError::InvalidParameter {
            name: "p",
            reason: "must be positive".into(),
        });
    }
    if !(lo >= 1.0 && hi > lo && hi.is_finite()) {
        return Err(MticaError::InvalidParameter {
            name: "cond_range",
            reason: format!("need 1 <= lo < hi, got [{lo}, {hi}]"),
        });
    }
    loop {
        let kappa = rng.random_range(lo..=hi);
        let mut s = DVector::from_element(p, 1.0);
        if p > 1 {
            s[1] = kappa;
            for k in 2..p {
                s[k] = rng.random_range(1.0..=kappa);
            }
        }
        let q1 = random_orthogonal(p, rng);
        let q2 = random_orthogonal(p, rng);
        let a = &q1 * DMatrix::from_diagonal(&s) * q2.transpose();
        let c = condition_number(&a);
        let slack = 1e-9 * hi;
        if p == 1 || (c >= lo - slack && c <= hi + slack) {
            return Ok(a);
        }
    }
}

/// Observations `x_n = A s_n`.
pub fn mix(a: &DMatrix<f64>, sources: &DataMatrix) -> Result<DataMatrix> {
    sources.transform(a)
}

/// Adds `±magnitude` (fair sign) to one uniformly chosen component of each of
/// `count` distinct, uniformly chosen samples.
pub fn inject_outliers<R: Rng + ?Sized>(
    data: &DataMatrix,
    count: usize,
    magnitude: f64,
    rng: &mut R,
) -> Result<DataMatrix> {
    let (n, p) = (data.n_samples(), data.n_channels());
    if count > n {
        return Err(MticaError::CountExceedsN { count, n });
    }
    let mut values = data.as_matrix().clone();
    for row in index::sample(rng, n, count) {
        let col = rng.random_range(0..p);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        values[(row, col)] += sign * magnitude;
    }
    DataMatrix::new(values)
}

/// Noise scale giving the requested linear SNR: `λ = sqrt(tr(A Aᵀ) / (p · snr))`.
pub fn noise_scale(a: &DMatrix<f64>, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(MticaError::InvalidParameter {
            name: "snr",
            reason: format!("must be positive, got {snr}"),
        });
    }
    let p = a.nrows() as f64;
    Ok((a.norm_squared() / (p * snr)).sqrt())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `X = A S + λ E` with `E` independent uniform noise of zero mean and unit
/// variance and `λ` set by [`noise_scale`].
pub fn noisy_mix<R: Rng + ?Sized>(a: &DMatrix<f64>, sources: &DataMatrix, snr: f64, rng: &mut R) -> Result<DataMatrix> {
    let lambda = noise_scale(a, snr)?;
    let clean = mix(a, sources)?;
    let half_width = 3f64.sqrt();
    let (n, p) = (clean.n_samples(), clean.n_channels());
    let mut values = clean.into_matrix();
    for i in 0..n {
        for j in 0..p {
            values[(i, j)] += lambda * rng.random_range(-half_width..half_width);
        }
    }
    DataMatrix::new(values)
}
