//! Whitening and the two MTICA separation pipelines.
//!
//! Without whitening, MT-covariances of the observations are jointly
//! diagonalized by a non-orthogonal diagonalizer, which directly estimates
//! the separation matrix. With whitening, MT-covariances of the whitened data
//! are jointly diagonalized by an orthogonal matrix `V` and the separation
//! matrix is `B = V W`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::covariance::mt_moments;
use crate::data::{covariance, DataMatrix};
use crate::error::{MticaError, Result};
use crate::jd::{noajd, oajd, JdOptions, JointDiagResult, MatrixStack};
use crate::transform::{gen_exp_testpoints, gen_gauss_testpoints, MtFunction};

/// Smallest eigenvalue ratio accepted by [`whiten`].
pub const WHITENING_RATIO_FLOOR: f64 = 1e-12;
/// Diagonal profiles closer than this (relative) are reported as degenerate.
pub const SEPARABILITY_FLOOR: f64 = 1e-6;

/// Centered, whitened data together with the whitening map.
#[derive(Debug, Clone)]
pub struct Whitened {
    pub z: DataMatrix,
    /// `W = Λ^{-1/2} Eᵀ` for the eigendecomposition `E Λ Eᵀ` of the sample covariance.
    pub w: DMatrix<f64>,
    pub mean: DVector<f64>,
}

/// Centers the data and maps its sample covariance (`1/N` normalization) to
/// the identity. Eigenvalues are taken in descending order and each
/// eigenvector is signed so that its largest entry is positive.
pub fn whiten(data: &DataMatrix) -> Result<Whitened> {
    let p = data.n_channels();
    let cov = covariance(data);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let max = eig.eigenvalues[order[0]];
    let min = eig.eigenvalues[order[p - 1]];
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio > WHITENING_RATIO_FLOOR) {
        return Err(MticaError::SingularCovariance { ratio });
    }

    let mut w = DMatrix::zeros(p, p);
    for (r, &k) in order.iter().enumerate() {
        let e = eig.eigenvectors.column(k);
        let pivot = e.iamax();
        let sign = if e[pivot] < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / eig.eigenvalues[k].sqrt();
        w.set_row(r, &(e.transpose() * scale));
    }
    let (centered, mean) = data.centered();
    let z = centered.transform(&w)?;
    Ok(Whitened { z, w, mean })
}

/// A separation matrix estimate and the diagnostics that produced it.
#[derive(Debug, Clone)]
pub struct SeparationEstimate {
    /// Estimated separation matrix; sources are `B x`.
    pub b: DMatrix<f64>,
    /// Whitening matrix, when the pipeline whitens.
    pub w: Option<DMatrix<f64>>,
    /// Orthogonal factor with `B = V W`, when the pipeline whitens.
    pub v: Option<DMatrix<f64>>,
    pub jd: JointDiagResult,
    /// Test-points of the MT-functions that were requested.
    pub testpoints: Vec<DVector<f64>>,
    /// Indices (into `testpoints`) whose weights were degenerate and were skipped.
    pub dropped: Vec<usize>,
    /// Minimum pairwise distinctness of the diagonal profiles after
    /// diagonalization; near zero means the separation is not identifiable
    /// from the supplied matrices.
    pub separability: f64,
    pub degenerate: bool,
}

impl SeparationEstimate {
    /// Recovered sources `B x_n` for every sample.
    pub fn sources(&self, data: &DataMatrix) -> Result<DataMatrix> {
        data.transform(&self.b)
    }
}

fn check_shape(data: &DataMatrix) -> Result<()> {
    let (n, p) = (data.n_samples(), data.n_channels());
    if n < p + 1 {
        return Err(MticaError::TooFewSamples { needed: p + 1, got: n });
    }
    Ok(())
}

/// Surviving MT-covariances, their spec indices and the dropped indices.
type Covariances = (Vec<DMatrix<f64>>, Vec<usize>, Vec<usize>);

/// Computes the MT-covariances, skipping MT-functions with degenerate weights.
fn mt_covariances(data: &DataMatrix, specs: &[MtFunction]) -> Result<Covariances> {
    let results: Vec<Result<DMatrix<f64>>> = specs
        .par_iter()
        .map(|spec| mt_moments(data, spec).map(|m| m.sigma))
        .collect();
    let mut mats = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                mats.push(s);
                kept.push(i);
            }
            Err(MticaError::DegenerateWeights { .. }) | Err(MticaError::SingularMoments { .. }) => dropped.push(i),
            Err(e) => return Err(e),
        }
    }
    Ok((mats, kept, dropped))
}

fn distinct_count(specs: &[MtFunction], kept: &[usize]) -> usize {
    let mut distinct: Vec<&MtFunction> = Vec::new();
    for &i in kept {
        if !distinct.contains(&&specs[i]) {
            distinct.push(&specs[i]);
        }
    }
    distinct.len()
}

fn test_points(specs: &[MtFunction]) -> Vec<DVector<f64>> {
    specs
        .iter()
        .filter_map(|s| s.test_point().map(DVector::from_row_slice))
        .collect()
}

/// Diagonal profile `d_i = ([B C_1 Bᵀ]_ii, …, [B C_M Bᵀ]_ii)` of every row.
fn diagonal_profiles(stack: &MatrixStack, b: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let diag = stack.congruence(b);
    (0..b.nrows())
        .map(|i| DVector::from_iterator(diag.len(), diag.iter().map(|m| m[(i, i)])))
        .collect()
}

/// Orthogonal case: rows are separable when their profiles differ.
fn profile_distance(profiles: &[DVector<f64>]) -> f64 {
    let scale = profiles.iter().map(|d| d.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            best = best.min((&profiles[i] - &profiles[j]).norm() / scale);
        }
    }
    best
}

/// Non-orthogonal case: rows are separable when their profiles are not collinear.
fn profile_angle(profiles: &[DVector<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            let (a, b) = (&profiles[i], &profiles[j]);
            let denom = a.norm() * b.norm();
            if denom == 0.0 {
                return 0.0;
            }
            let cos = (a.dot(b) / denom).clamp(-1.0, 1.0);
            best = best.min((1.0 - cos * cos).max(0.0).sqrt());
        }
    }
    best
}

/// Generic MTICA without whitening: non-orthogonal joint diagonalization of
/// the MT-covariances of `data` under each MT-function.
pub fn mtica_no_whitening(data: &DataMatrix, specs: &[MtFunction], opts: &JdOptions) -> Result<SeparationEstimate> {
    check_shape(data)?;
    let (mats, kept, dropped) = mt_covariances(data, specs)?;
    let distinct = distinct_count(specs, &kept);
    if distinct < 2 {
        return Err(MticaError::InsufficientTestPoints {
            survived: distinct,
            needed: 2,
        });
    }
    let stack = MatrixStack::new(mats)?;
    let jd = noajd(&stack, opts)?;
    let separability = if data.n_channels() > 1 {
        profile_angle(&diagonal_profiles(&stack, &jd.diag_matrix))
    } else {
        1.0
    };
    Ok(SeparationEstimate {
        b: jd.diag_matrix.clone(),
        w: None,
        v: None,
        jd,
        testpoints: test_points(specs),
        dropped,
        separability,
        degenerate: separability < SEPARABILITY_FLOOR,
    })
}

/// Generic MTICA with whitening: orthogonal joint diagonalization of the
/// MT-covariances of the whitened data. The MT-functions act on whitened
/// coordinates.
pub fn mtica_with_whitening(data: &DataMatrix, specs: &[MtFunction], opts: &JdOptions) -> Result<SeparationEstimate> {
    check_shape(data)?;
    let whitened = whiten(data)?;
    let (mats, kept, dropped) = mt_covariances(&whitened.z, specs)?;
    if kept.is_empty() {
        return Err(MticaError::InsufficientTestPoints { survived: 0, needed: 1 });
    }
    let stack = MatrixStack::new(mats)?;
    let jd = oajd(&stack, opts)?;
    let separability = if data.n_channels() > 1 {
        profile_distance(&diagonal_profiles(&stack, &jd.diag_matrix))
    } else {
        1.0
    };
    let v = jd.diag_matrix.clone();
    Ok(SeparationEstimate {
        b: &v * &whitened.w,
        w: Some(whitened.w),
        v: Some(v),
        jd,
        testpoints: test_points(specs),
        dropped,
        separability,
        degenerate: separability < SEPARABILITY_FLOOR,
    })
}

/// Exponential MTICA: `count` test-points in the unit ball, exponential
/// MT-functions, non-orthogonal joint diagonalization.
///
/// The data are centered and scaled to unit per-channel variance before the
/// weights are evaluated so that the unit-ball test-points are commensurate
/// with the data; the scaling is folded back into the returned `B`.
pub fn exponential_mtica<R: Rng + ?Sized>(
    data: &DataMatrix,
    count: usize,
    rng: &mut R,
    opts: &JdOptions,
) -> Result<SeparationEstimate> {
    check_shape(data)?;
    let p = data.n_channels();
    let points = gen_exp_testpoints(count, p, rng)?;
    let specs: Vec<MtFunction> = points.into_iter().map(MtFunction::exponential).collect();

    let (centered, _) = data.centered();
    let std = DVector::from_iterator(
        p,
        centered
            .as_matrix()
            .column_iter()
            .map(|c| (c.norm_squared() / data.n_samples() as f64).sqrt()),
    );
    if let Some(k) = std.iter().position(|&s| !(s > 0.0)) {
        return Err(MticaError::SingularCovariance { ratio: std[k] });
    }
    let inv_std = DMatrix::from_diagonal(&std.map(|s| 1.0 / s));
    let standardized = centered.transform(&inv_std)?;

    let mut est = mtica_no_whitening(&standardized, &specs, opts)?;
    est.b = &est.b * inv_std;
    Ok(est)
}

/// Gaussian MTICA: whitening, `count` standardized Beta(3, 3) test-points,
/// Gaussian MT-functions of width `tau`, orthogonal joint diagonalization.
pub fn gaussian_mtica<R: Rng + ?Sized>(
    data: &DataMatrix,
    count: usize,
    tau: f64,
    rng: &mut R,
    opts: &JdOptions,
) -> Result<SeparationEstimate> {
    check_shape(data)?;
    let points = gen_gauss_testpoints(count, data.n_channels(), rng)?;
    let specs = points
        .into_iter()
        .map(|t| MtFunction::gaussian(t, tau))
        .collect::<Result<Vec<_>>>()?;
    mtica_with_whitening(data, &specs, opts)
}
