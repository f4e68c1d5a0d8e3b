//! Tensor-train density estimation.
//!
//! Densities are expansions over a tensor-product B-spline basis whose
//! coefficient tensor is stored in tensor-train format. The crate covers the
//! whole life cycle: building the basis, training from samples (Riemannian
//! optimization of the L2 loss, or Adam on cores), exact evaluation of
//! densities, marginals and CDFs, exact autoregressive sampling, and sample
//! based quality metrics.

pub mod basis;
pub mod cli;
pub mod data;
pub mod density;
pub mod error;
pub mod init;
mod linalg;
pub mod metrics;
pub mod quadrature;
pub mod sampler;
pub mod training;
pub mod tt_core;

#[cfg(test)]
mod testing;

pub use basis::{BasisSet, BasisSpec, GramMatrix, LocalEval};
pub use data::{CornerLayout, CornerMixture, Dataset, DatasetManifest};
pub use density::{DensityModel, LogLikelihood, ModelFile, Variant};
pub use error::{Error, Result};
pub use sampler::{sample, SampleReport, SamplerState, Samples};
pub use training::{train, train_with, InitKind, Optimizer, TrainConfig, TrainLog, TrainOutput};
pub use tt_core::{Orthogonalization, TTTensor};
