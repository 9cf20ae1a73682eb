//! Hierarchical information-bottleneck fusion for multimodal embeddings.
//!
//! A prime modality is compressed through a chain of Gaussian latent states.
//! Each latent is trained to predict the next-ranked modality with a detector
//! head, so the chain distills what the secondary modalities share with the
//! prime one while only the prime modality is needed at inference time.
//!
//! Modules:
//!
//! - [`numerics`]: matrices, affine layers, hand-written backward passes
//! - [`gaussian`]: diagonal Gaussians, reparameterized sampling, KL to the prior
//! - [`model`]: the level chain, loss assembly and exact gradients
//! - [`train`]: Adam, minibatch fitting, evaluation
//! - [`ranking`]: modality ordering by sample entropy or greedy selection
//! - [`metrics`]: weighted P/R/F, accuracy, F1, MAE, Pearson correlation
//! - [`data`]: manifests, embedding files, k-fold splits, synthetic data
//! - [`oracle`]: independent reference computations used to verify the above
//! - [`checkpoint`]: binary parameter files
//! - [`cli`]: the `ithp` command-line front end

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod gaussian;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod ranking;
pub mod train;

pub use error::{Error, Result};
pub use model::{IthpConfig, IthpParams, LossBreakdown};
pub use numerics::{Matrix, Parameters};
