//! Patch-based point-cloud upsampling: a small reverse-mode autodiff
//! engine, point-set geometry, adjacent patch pairing, the two-stage
//! upsampling network, EMD training and evaluation metrics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod model;
pub mod pairing;
pub mod training;

pub use error::{Error, Result};
