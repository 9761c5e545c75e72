//! Secure transmit beamforming and artificial-noise design for a
//! multi-antenna dual-functional radar-communication (DFRC) transmitter.
//!
//! The base station serves `K` single-antenna users while illuminating a
//! target that may itself be an eavesdropper. Designs maximise the SINR gap
//! at the target (or its worst case over an angular uncertainty region)
//! subject to user SINR, radar beampattern and power constraints, for
//! perfect, norm-bounded and statistically-bounded channel knowledge.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate openblas_src;

pub mod error;
pub mod linalg;
pub mod model;
pub mod sdp;
pub mod synthesis;
pub mod designers;
pub mod extraction;

pub use error::{Error, Result};
