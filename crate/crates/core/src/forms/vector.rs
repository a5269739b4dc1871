use crate::algebra::{Family, RationalFn, Var};

use super::gens::DiffFamily;

/// `Σ_j c_j ∂/∂v_j` for a single variable family `v`; contraction pairs it
/// with the generators `dv_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub target: DiffFamily,
    pub comps: Vec<RationalFn>,
}

impl VectorField {
    pub fn new(target: DiffFamily, comps: Vec<RationalFn>) -> Self {
        Self { target, comps }
    }

    /// The Euler field `Σ v_j ∂/∂v_j` of the family paired with `target`.
    pub fn euler(n: usize, target: DiffFamily) -> Self {
        let fam = target.variable_family();
        Self::new(
            target,
            (0..=n).map(|j| RationalFn::var(Var::new(fam, j))).collect(),
        )
    }

    /// `η = 2πi Σ z_j ∂/∂ζ_j`.
    pub fn eta(n: usize) -> Self {
        Self::new(
            DiffFamily::DZeta,
            (0..=n)
                .map(|j| RationalFn::var(Var::new(Family::Z, j)).mul_poly(&crate::algebra::MultiPoly::pi(1)))
                .collect(),
        )
    }

    /// `c ∂/∂v_j`.
    pub fn single(n: usize, target: DiffFamily, j: usize, c: RationalFn) -> Self {
        let mut comps = vec![RationalFn::zero(); n + 1];
        comps[j] = c;
        Self::new(target, comps)
    }

    /// `w − z` as a field `Σ (w_j − z_j) ∂/∂w_j`, pairing with `dw`.
    pub fn w_minus_z(n: usize) -> Self {
        Self::new(
            DiffFamily::DW,
            (0..=n)
                .map(|j| &RationalFn::var(Var::w(j)) - &RationalFn::var(Var::z(j)))
                .collect(),
        )
    }
}
