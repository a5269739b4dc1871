//! Exact projective-form calculus for weighted Koppelman formulas and a
//! numerical ∂̄-solver on plane projective curves built from the explicit
//! kernels.

pub mod algebra;
pub mod curves;
pub mod error;
pub mod forms;
pub mod hefer;
pub mod kernels;
pub mod numeric;
pub mod operators;
pub mod quadrature;
pub mod suite;
pub mod weights;

pub use error::{Error, Result};
