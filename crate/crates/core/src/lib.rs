// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Published coefficients and reference values keep all their digits.
#![allow(clippy::excessive_precision)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod rng;
pub mod secrecy;
pub mod specfun;

pub use error::{Error, Result};
