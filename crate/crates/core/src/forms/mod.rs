//! Exterior algebra over the generators `dζ_j`, `dζ̄_j`, `dz̄_j` (and `dw_j`
//! for Hefer forms) with rational coefficients.

pub mod expr;
pub mod gens;
pub mod json;
pub mod multivector;
pub mod vector;

pub use expr::{DbarFamily, FormExpr, Projectivity};
pub use gens::{DiffFamily, GenLayout};
pub use multivector::Multivector;
pub use vector::VectorField;
