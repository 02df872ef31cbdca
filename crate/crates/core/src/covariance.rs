//! Empirical measure-transformed moments and their influence function.
//!
//! The empirical MT-covariance is a weighted covariance with weights
//! `u(X_n) / Σ_m u(X_m)`. Evaluated on a weighted point-mass dataset it is
//! also the statistical functional of that discrete law, so no separate
//! functional entry point exists.
//!
//! Finite second moments of `u` and finite fourth moments of the data are
//! needed for strong consistency; they cannot be checked from samples and are
//! not checked here.

use nalgebra::{DMatrix, DVector};

use crate::data::{symmetrize, DataMatrix};
use crate::error::{MticaError, Result};
use crate::transform::{eval_weights, MtFunction};

/// Tolerance on the most negative eigenvalue of an assembled MT-covariance.
pub const PSD_TOLERANCE: f64 = -1e-10;

/// Empirical MT-mean, MT-covariance and `ln Ê[u(X)]` for one MT-function.
#[derive(Debug, Clone, PartialEq)]
pub struct MtMoments {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub mean_log_weight: f64,
}

impl MtMoments {
    /// `Ê[u(X)]`, the normalizer expected by [`influence_function`].
    pub fn mean_weight(&self) -> f64 {
        self.mean_log_weight.exp()
    }
}

pub fn mt_moments(data: &DataMatrix, spec: &MtFunction) -> Result<MtMoments> {
    let n = data.n_samples();
    if n < 2 {
        return Err(MticaError::TooFewSamples { needed: 2, got: n });
    }
    let w = eval_weights(data, spec)?;
    let (mu, sigma) = weighted_moments(data.as_matrix(), &w.weights);

    let min_eig = sigma.symmetric_eigenvalues().min();
    if min_eig < PSD_TOLERANCE {
        return Err(MticaError::SingularMoments {
            min_eigenvalue: min_eig,
        });
    }
    Ok(MtMoments {
        mu,
        sigma,
        mean_log_weight: w.log_norm,
    })
}

/// Weighted mean and covariance for weights summing to one, accumulated
/// around the weighted mean in sample order.
pub(crate) fn weighted_moments(x: &DMatrix<f64>, weights: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (n, p) = x.shape();
    let mut mu = DVector::zeros(p);
    for i in 0..n {
        let w = weights[i];
        for j in 0..p {
            mu[j] += w * x[(i, j)];
        }
    }
    let mut sigma = DMatrix::zeros(p, p);
    let mut d = vec![0.0; p];
    for i in 0..n {
        let w = weights[i];
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = x[(i, j)] - mu[j];
        }
        for a in 0..p {
            let wa = w * d[a];
            for b in a..p {
                sigma[(a, b)] += wa * d[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            sigma[(a, b)] = sigma[(b, a)];
        }
    }
    symmetrize(&mut sigma);
    (mu, sigma)
}

/// Influence of an infinitesimal contamination at `y` on the MT-covariance:
/// `u(y)/E[u(X)] · ((y - μ)(y - μ)ᵀ - Σ)`.
///
/// `ref_norm` is `E[u(X)]` under the reference law, typically
/// [`MtMoments::mean_weight`] from a large reference sample.
pub fn influence_function(
    y: &DVector<f64>,
    spec: &MtFunction,
    reference: &MtMoments,
    ref_norm: f64,
) -> Result<DMatrix<f64>> {
    let p = reference.mu.len();
    if y.len() != p {
        return Err(MticaError::DimensionMismatch {
            expected: p,
            got: y.len(),
        });
    }
    if reference.sigma.shape() != (p, p) {
        return Err(MticaError::DimensionMismatch {
            expected: p,
            got: reference.sigma.nrows(),
        });
    }
    if !(ref_norm.is_finite() && ref_norm > 0.0) {
        return Err(MticaError::InvalidParameter {
            name: "ref_norm",
            reason: format!("must be positive and finite, got {ref_norm}"),
        });
    }
    spec.validate(p)?;
    let scale = spec.log_value(y.as_slice()).exp() / ref_norm;
    let d = y - &reference.mu;
    Ok((&d * d.transpose() - &reference.sigma) * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use crate::transform::gen_exp_testpoints;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn naive(data: &DMatrix<f64>, spec: &MtFunction) -> (DVector<f64>, DMatrix<f64>) {
        let (n, p) = data.shape();
        let raw: Vec<f64> = (0..n)
            .map(|i| {
                let row: Vec<f64> = data.row(i).iter().copied().collect();
                spec.value(&row).unwrap()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let mut mu = DVector::zeros(p);
        let mut second = DMatrix::zeros(p, p);
        for (i, r) in raw.iter().enumerate() {
            let x = data.row(i).transpose();
            let phi = r / total;
            mu += &x * phi;
            second += &x * x.transpose() * phi;
        }
        let sigma = second - &mu * mu.transpose();
        (mu, sigma)
    }

    #[test]
    fn two_point_constant_moments() {
        let d = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = mt_moments(&d, &MtFunction::Constant).unwrap();
        assert_eq!(m.mu.as_slice(), &[0.5, 0.5]);
        let expected = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert!((m.sigma - expected).amax() < 1e-15);
    }

    #[test]
    fn exponential_at_origin_is_the_plain_covariance() {
        let mut rng = SeedStream::new(3).stream("x", 0);
        let x: DMatrix<f64> = DMatrix::from_fn(50, 3, |_, _| StandardNormal.sample(&mut rng));
        let d = DataMatrix::new(x).unwrap();
        let a = mt_moments(&d, &MtFunction::Constant).unwrap();
        let b = mt_moments(&d, &MtFunction::exponential(DVector::zeros(3))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_transform_of_standard_normal_halves_variance() {
        // N(0,1) reweighted by exp(-x²/2) is N(0, 1/2).
        let mut rng = SeedStream::new(17).stream("x", 0);
        let x: DMatrix<f64> = DMatrix::from_fn(100_000, 1, |_, _| StandardNormal.sample(&mut rng));
        let d = DataMatrix::new(x).unwrap();
        let spec = MtFunction::gaussian(DVector::zeros(1), 1.0).unwrap();
        let m = mt_moments(&d, &spec).unwrap();
        assert!((m.sigma[(0, 0)] - 0.5).abs() < 0.02, "{}", m.sigma[(0, 0)]);
        // E[exp(-X²/2)] = 1/√2
        assert!((m.mean_weight() - 0.5f64.sqrt()).abs() < 0.01);
    }

    #[test]
    fn too_few_samples() {
        let d = DataMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(
            mt_moments(&d, &MtFunction::Constant),
            Err(MticaError::TooFewSamples { needed: 2, got: 1 })
        );
    }

    #[test]
    fn influence_vanishes_at_mean_of_point_mass() {
        let reference = MtMoments {
            mu: DVector::from_vec(vec![1.0, -2.0]),
            sigma: DMatrix::zeros(2, 2),
            mean_log_weight: 0.0,
        };
        let y = reference.mu.clone();
        let spec = MtFunction::gaussian(DVector::zeros(2), 1.0).unwrap();
        let inf = influence_function(&y, &spec, &reference, 0.7).unwrap();
        assert_eq!(inf, DMatrix::zeros(2, 2));
    }

    #[test]
    fn influence_rejects_bad_input() {
        let reference = MtMoments {
            mu: DVector::zeros(2),
            sigma: DMatrix::identity(2, 2),
            mean_log_weight: 0.0,
        };
        let spec = MtFunction::Constant;
        assert!(matches!(
            influence_function(&DVector::zeros(3), &spec, &reference, 1.0),
            Err(MticaError::DimensionMismatch { .. })
        ));
        assert!(influence_function(&DVector::zeros(2), &spec, &reference, 0.0).is_err());
    }

    fn reference_moments(spec: &MtFunction) -> MtMoments {
        let mut rng = SeedStream::new(23).stream("ref", 0);
        let x: DMatrix<f64> = DMatrix::from_fn(20_000, 2, |_, _| StandardNormal.sample(&mut rng));
        mt_moments(&DataMatrix::new(x).unwrap(), spec).unwrap()
    }

    #[test]
    fn gaussian_influence_is_bounded_and_decays() {
        let spec = MtFunction::gaussian(DVector::zeros(2), 1.0).unwrap();
        let r = reference_moments(&spec);
        let dir = DVector::from_vec(vec![0.6, 0.8]);
        let norms: Vec<f64> = [1e1, 1e2, 1e3, 1e4]
            .iter()
            .map(|&s| {
                influence_function(&(&dir * s), &spec, &r, r.mean_weight())
                    .unwrap()
                    .norm()
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
        assert!(norms[3] < 1e-12);
    }

    #[test]
    fn exponential_influence_grows_along_test_point() {
        let t = DVector::from_vec(vec![0.3, 0.4]);
        let spec = MtFunction::exponential(t.clone());
        let r = reference_moments(&spec);
        let dir = &t / t.norm();
        let norms: Vec<f64> = [1e1, 1e2]
            .iter()
            .map(|&s| {
                influence_function(&(&dir * s), &spec, &r, r.mean_weight())
                    .unwrap()
                    .norm()
            })
            .collect();
        assert!(norms[1] > 1e10 * norms[0], "{norms:?}");
    }

    #[test]
    fn fisher_consistency_on_discrete_law() {
        // law on three atoms with probabilities 1/6, 2/6, 3/6
        let atoms = [vec![0.0, 1.0], vec![2.0, -1.0], vec![-1.0, 0.5]];
        let probs = [1.0, 2.0, 3.0];
        let mut rows = Vec::new();
        for (a, &k) in atoms.iter().zip(&probs) {
            for _ in 0..(k as usize * 4) {
                rows.push(a.clone());
            }
        }
        let d = DataMatrix::from_rows(&rows).unwrap();
        let spec = MtFunction::gaussian(DVector::from_vec(vec![0.5, 0.0]), 1.3).unwrap();
        let m = mt_moments(&d, &spec).unwrap();

        // functional: E[XXᵀu]/E[u] - E[Xu]E[Xu]ᵀ/E[u]²
        let total: f64 = probs.iter().sum();
        let mut eu = 0.0;
        let mut exu = DVector::zeros(2);
        let mut exxu = DMatrix::zeros(2, 2);
        for (a, &k) in atoms.iter().zip(&probs) {
            let x = DVector::from_vec(a.clone());
            let pu = k / total * spec.value(a).unwrap();
            eu += pu;
            exu += &x * pu;
            exxu += &x * x.transpose() * pu;
        }
        let h = exxu / eu - &exu * exu.transpose() / (eu * eu);
        assert!((m.sigma - h).amax() < 1e-12);
        assert!((m.mu - exu / eu).amax() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_direct_summation(
            n in 2usize..=8,
            p in 1usize..=3,
            raw in prop::collection::vec(-3.0f64..3.0, 24),
            seed in 0u64..500,
            tau in 0.2f64..3.0,
        ) {
            let x = DMatrix::from_row_slice(n, p, &raw[..n * p]);
            let d = DataMatrix::new(x.clone()).unwrap();
            let t = gen_exp_testpoints(2, p, &mut SeedStream::new(seed).stream("t", 0)).unwrap();
            for spec in [
                MtFunction::Constant,
                MtFunction::exponential(t[0].clone() * 2.0),
                MtFunction::gaussian(t[1].clone(), tau).unwrap(),
            ] {
                let m = mt_moments(&d, &spec).unwrap();
                let (mu, sigma) = naive(&x, &spec);
                prop_assert!((m.mu - mu).amax() < 1e-10);
                prop_assert!((&m.sigma - sigma).amax() < 1e-10);
                prop_assert!((&m.sigma - m.sigma.transpose()).amax() == 0.0);
            }
        }
    }
}
