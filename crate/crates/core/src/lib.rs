//! Twin neural network regression on `alloc` alone.
//!
//! A twin network `F` is trained on pairs of inputs to predict the difference
//! of their targets, `F(a, b) ≈ y_a - y_b`. A target for an unseen point `x`
//! is recovered by averaging `F(x, a) + y_a` over labelled anchors `a`. When
//! the anchors are restricted to the nearest neighbors of `x` the method turns
//! into a network-corrected k-NN regressor.
//!
//! Module map:
//!
//! - [`nn`]: fixed two-hidden-layer MLP, manual backprop, Adadelta and the
//!   early-stopping / LR-halving training loop.
//! - [`knn`]: exact kd-tree nearest-neighbor search and the k-NN baseline.
//! - [`pairing`]: all-pairs and nearest-neighbor pair datasets.
//! - [`twin`]: the trained twin model and its anchor-ensemble predictors.
//! - [`data`]: synthetic generators, splitting and standardization.
//! - [`bench`]: RMSE, result rows and aggregation.
//!
//! Everything here is deterministic given its seeds. File formats, timing and
//! the command line live in the `twinreg` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod data;
mod error;
pub mod knn;
mod matrix;
pub mod nn;
pub mod pairing;
pub mod twin;

pub use error::{Error, Result};
pub use knn::Neighbors;
pub use matrix::Matrix;
