//! Competing convolutional kernels for time series classification.
//!
//! Each input series is convolved with random, normalized, length-9 dilated
//! kernels arranged into `g` groups of `k` kernels per dilation. At every
//! timepoint the kernels within a group compete: the kernel with the largest
//! (and/or smallest) response is counted, either by incrementing an integer
//! count ("hard") or by accumulating the winning response ("soft"). The
//! resulting counts feed a linear classifier.
//!
//! The crate is organised as:
//!
//! - [`data_io`]: `.ts` / TSV loading, validation and stratified resampling.
//! - [`kernel_bank`]: configuration, dilations and seeded kernel generation.
//! - [`transform`]: the fast batched transform and its feature layout.
//! - [`test_oracle`]: a naive loop-based reference transform for differential tests.
//! - [`classifier`]: feature scaling, ridge (closed-form LOOCV) and minibatch logistic regression.
//! - [`pipeline`]: bank + transform + classifier bundled as one fitted model.
//! - [`bench_harness`]: resampled experiments, sensitivity grids and mean ranks.

pub mod bench_harness;
pub mod classifier;
pub mod container;
pub mod data_io;
mod error;
pub mod kernel_bank;
pub mod pipeline;
pub mod test_oracle;
pub mod transform;

pub use error::{HydraError, Result};
pub use kernel_bank::{CountMode, HydraConfig, KernelBank};
pub use transform::{FeatureLayout, FeatureMatrix};

/// Version string embedded in every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
