//! Measure-transformed independent component analysis.
//!
//! The data distribution is reweighted by non-negative MT-functions
//! (exponential or Gaussian); weighted covariances under several such
//! transforms are then jointly diagonalized to recover the separation
//! matrix. The [`sim`] module reproduces the Monte-Carlo evaluation protocol.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod data;
pub mod error;
pub mod jd;
pub mod rng;
pub mod separation;
pub mod sim;
pub mod transform;

pub use covariance::{influence_function, mt_moments, MtMoments};
pub use data::DataMatrix;
pub use error::{MticaError, Result};
pub use jd::{noajd, oajd, offdiag_criterion, JdOptions, JointDiagResult, MatrixStack};
pub use rng::{SeedStream, StreamRng};
pub use separation::{
    exponential_mtica, gaussian_mtica, mtica_no_whitening, mtica_with_whitening, whiten, SeparationEstimate, Whitened,
};
pub use sim::{amari_error, SourceFamily, SourceSpec, TrialRecord};
pub use transform::{eval_weights, gen_exp_testpoints, gen_gauss_testpoints, MtFunction, WeightVector};
