//! Powered Chinese restaurant process (pCRP) mixtures of Gaussians.
//!
//! The crate provides the seating rules of the CRP, the powered CRP and the
//! generic g-CRP, Normal-Inverse-Wishart conjugate machinery, a collapsed
//! Gibbs sampler over cluster assignments, partition comparison metrics
//! (NMI, VI), cross-validated selection of the power `r`, and synthetic
//! data generators.
//!
//! All numerical code is generic over a floating point [`Scalar`] (`f32` or
//! `f64`). The aliases at the crate root fix the scalar to `f64`, which is
//! what the command line tool uses. Exact rational seat weights for integer
//! powers live in [`partition::exact`].

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod conjugate;
pub mod datasets;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod tuning;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use conjugate::{log_posterior_predictive, log_prior_predictive};
pub use metrics::{cv_loss, nmi, vi};
pub use partition::{partition_log_probability, sample_prior_partition, seat_weights};
pub use sampler::{posterior_k_distribution, run_chain, summarize, summarize_samples};
pub use tuning::{oracle_alpha, tune_power, tune_power_parallel};

pub use partition::PartitionState;
pub use sampler::{Chain, Initialization, SamplerConfig, Summary};

/// Dense row-major matrix of `f64`.
pub type Matrix = linalg::Matrix<f64>;
/// Process parameters over `f64`.
pub type ProcessParams = partition::ProcessParams<f64>;
/// Normal-Inverse-Wishart hyperparameters over `f64`.
pub type NiwParams = conjugate::NiwParams<f64>;
/// Per-cluster sufficient statistics over `f64`.
pub type ClusterStats = conjugate::ClusterStats<f64>;
/// Labelled data matrix over `f64`.
pub type Dataset = datasets::Dataset<f64>;
/// Gaussian mixture description over `f64`.
pub type MixtureSpec = datasets::MixtureSpec<f64>;
/// Cross-validation curve over `f64`.
pub type CvCurve = tuning::CvCurve<f64>;
/// Power grid over `f64`.
pub type GridSpec = tuning::GridSpec<f64>;

/// Single precision variants.
pub mod f32 {
    pub type Matrix = crate::linalg::Matrix<f32>;
    pub type ProcessParams = crate::partition::ProcessParams<f32>;
    pub type NiwParams = crate::conjugate::NiwParams<f32>;
    pub type ClusterStats = crate::conjugate::ClusterStats<f32>;
    pub type Dataset = crate::datasets::Dataset<f32>;
}
