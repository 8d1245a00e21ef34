//! Differentially private randomized block coordinate descent with unbiased
//! diagonal sketches.
//!
//! The pieces compose as: build a [`erm::Problem`], pick a
//! [`sampling::SamplingDistribution`], compute regularity constants with
//! [`erm::RegularityBundle`], calibrate noise with [`privacy::calibrate_noise`]
//! and hand everything to [`optimizer::dp_skgd`].

// Guards are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod erm;
pub mod error;
pub mod linalg;
pub mod optimizer;
pub mod privacy;
pub mod sampling;

pub use error::{Error, Result};
