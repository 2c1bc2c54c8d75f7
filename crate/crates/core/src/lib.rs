//! Over-the-air statistical estimation over a Gaussian multiple-access
//! channel.
//!
//! Users transmit analog, uncoded symbols simultaneously; the receiver sees
//! their noisy sum and applies an affine estimator. This crate builds the
//! minimax-optimal schemes for the Gaussian location, product Bernoulli and
//! m-sparse Bernoulli families, evaluates their risks exactly and by Monte
//! Carlo, computes mutual-information leakage, calibrates local noise for a
//! conditional-MI budget, and checks the underlying optimization results
//! against brute-force grid searches.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod model;
pub mod oracle;
pub mod privacy;
pub mod risk;
pub mod scheme;

pub use error::{Constraint, Error, Result};
pub use model::{sample_users, validate_theta, ModelSpec, SystemConfig, Theta, UserSamples};
pub use scheme::{AffineEstimator, Branch, EncoderMap, EncoderSpec, Scheme};
