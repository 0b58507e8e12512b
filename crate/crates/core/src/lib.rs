// Negated comparisons reject NaN inputs on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod density;
pub mod eigen;
pub mod error;
pub mod glauber;
pub mod harness;
pub mod kernel;
pub mod matrixsim;
pub mod quad;
pub mod rng;
pub mod specfun;

pub use error::{Error, Result};
