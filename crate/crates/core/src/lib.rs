// NaN must fail validation, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversaries;
pub mod analysis;
pub mod circuit;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod protocol;
pub mod seeding;

pub use error::{Error, Result};
pub use numerics::C64;
