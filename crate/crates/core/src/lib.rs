#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod repr;
pub mod state;
pub mod tolerance;

pub use error::{Error, Result};
pub use tolerance::Tolerances;
pub mod curve;
pub mod numeric;
pub mod canon;
pub mod zoo;
pub mod witness;
