//! Gradient-descent implicit-bias experiments for two-layer convolutional
//! networks trained on the exponential loss.

pub mod conv2d;
pub mod dataset;
pub mod error;
pub mod sweep;
pub mod train;

pub use error::{Error, Result};
