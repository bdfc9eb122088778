//! Batch acquisition for pool-based Bayesian active learning.
//!
//! The crate scores batches of unlabelled points by the mutual information
//! between their joint labels and the model parameters (BatchBALD), selects
//! batches greedily, and provides the estimators, baselines, an exact-Bayes
//! simulator and a property-verification suite around that core.
//!
//! Everything consumes a [`PosteriorTensor`] of per-sample predictive
//! probabilities; producing one from a trained network is up to the caller.

pub mod acquisition;
#[cfg(not(target_arch = "wasm32"))]
pub mod bench;
pub mod estimators;
pub mod io;
mod parallel;
pub mod seed;
pub mod sim;
pub mod tensor;
pub mod verify;

pub use acquisition::{
    acquire, AcquisitionError, AcquisitionRequest, AcquisitionResult, Strategy,
};
pub use estimators::{batchbald_score, bald_scores, EntropyBreakdown, EstimatorConfig, EstimatorMode};
pub use tensor::{validate_tensor, PosteriorTensor, ScoreVector, ValidationReport};
