//! Minimax estimation under Wasserstein-2 distribution shift.

// `!(x > 0.0)` is used on purpose so that NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod linalg;
pub mod perturbations;
pub mod quad;
pub mod risk;
pub mod rng;
mod serde_mat;
pub mod special;
pub mod theory;
pub mod transport;

pub use distributions::{DistributionSpec, FisherMode};
pub use error::{Error, Result};
