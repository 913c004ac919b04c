#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod generators;
pub mod hermite;
pub mod io;
pub mod linalg;
pub mod methods;
pub mod numeric;
pub mod objective;
pub mod parallel;
pub mod plot;

pub use error::{Error, Result};
