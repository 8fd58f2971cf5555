//! Induced regularizers of two-layer linear convolutional networks.
//!
//! The regularizer of a linear predictor `w` is the smallest `‖U‖² + ‖V‖²`
//! over network weights realizing it. This crate evaluates it in closed form
//! where possible, through a certified semidefinite relaxation otherwise,
//! recovers optimal single-channel weights from the relaxation, and
//! cross-checks everything against a nonconvex weight-space minimizer.

pub mod closed_form;
pub mod error;
pub mod linalg;
pub mod multichannel;
pub mod oracle;
pub mod rank1;
pub mod sdp;
pub mod spectral;
pub mod tolerance;

pub use error::{Error, Result};
pub use tolerance::ToleranceConfig;
