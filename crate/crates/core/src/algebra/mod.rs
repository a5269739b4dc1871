//! Exact scalar arithmetic: Gaussian rationals, polynomials and rational
//! functions in the paired variable families.

pub mod gaussian;
pub mod json;
pub mod parse;
pub mod point;
pub mod poly;
pub mod rational;
pub mod vars;

pub use gaussian::GaussianRational;
pub use parse::{parse_poly, parse_rational};
pub use point::Point;
pub use poly::{Grading, Monomial, MultiPoly, TWO_PI_I};
pub use rational::RationalFn;
pub use vars::{Family, Universe, Var};
