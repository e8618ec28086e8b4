//! Numerical core for two tied-weight toy autoencoders trained on basis-vector
//! data: one with an explicit l1 penalty on the encodings, one regularized only
//! by noise injected into the hidden layer.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. Everything
//! here is a deterministic function of its inputs and a 64-bit seed, so a run
//! can be replayed bit for bit.
//!
//! - [`matrix`], [`noise`], [`metrics`], [`rng`]: shared building blocks.
//! - [`l1`]: loss, force decomposition and proximal training of the l1 model.
//! - [`noisy`]: exact gradient of the noisy loss and its moment identities.
//! - [`analysis`]: initialization collisions, polysemanticity counts and the
//!   closed-form sparsification curves.
//! - [`surgery`]: the Gram-preserving neuron split.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod config;
pub mod error;
pub mod l1;
pub mod matrix;
pub mod metrics;
pub mod noise;
pub mod noisy;
pub mod rng;
pub mod surgery;
pub mod trace;

pub use config::ModelConfig;
pub use error::{Error, Result};
pub use matrix::WeightMatrix;
pub use metrics::RowMetrics;
pub use noise::NoiseSpec;
pub use trace::{RecordSchedule, TraceRecord, TrainingTrace};
