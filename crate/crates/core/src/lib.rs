//! Operator systems, their tensor cones and a small semidefinite engine.

mod error;
pub mod factorization;
pub mod linalg;
pub mod opsys;
pub mod solver;
pub mod tensor;
pub mod verdict;

pub use error::{Error, Result};
pub use verdict::{ConeVerdict, Diagnostics};
