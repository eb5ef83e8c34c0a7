//! Simultaneous weighted Max-Cut.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod independence;
pub mod infotheory;
pub mod instance;
pub mod lasserre;
pub mod perturb;
pub mod pipeline;
pub mod preprocess;
pub mod prover;
pub mod rounding;
pub mod sdpsolver;

pub use error::{Error, Result};
