//! Review-aware factorization machine recommender.
//!
//! A device/service rating model built from two feature branches:
//!
//! * a review branch that convolves the device's and the service's review
//!   collections, re-weights every word with a bilinear selective layer and
//!   abstracts the weighted words into a fixed-width feature vector;
//! * an engagement branch built from identity latent vectors.
//!
//! Each branch is scored by its own factorization machine. The two scores are
//! blended with a data-dependent weight and shifted by device and service
//! biases.
//!
//! The crate is organised bottom-up:
//!
//! * [`ingest`]: parsing, vocabulary, review collections, splits, stats
//! * [`nn`]: dense kernels with hand-written backward passes, the parameter
//!   store and a finite-difference gradient checker
//! * [`review_net`], [`engagement`], [`fm`]: the three model components
//! * [`model`]: the assembled network and its per-pair forward/backward pass
//! * [`train`]: optimizers, the training loop and checkpoints
//! * [`eval`]: metrics, ranking, the MF baseline, ablations, synthetic data

pub mod engagement;
pub mod error;
pub mod eval;
pub mod fm;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod review_net;
pub mod train;

pub use error::{Error, Result};
