use num_complex::Complex64;

use super::vars::{Family, Var};

const STRIDE: usize = 16;

/// A numeric assignment of values to variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Point {
    vals: Vec<Option<Complex64>>,
}

impl Point {
    pub fn new() -> Self {
        Self {
            vals: vec![None; STRIDE * Family::ALL.len()],
        }
    }

    fn slot(v: Var) -> usize {
        assert!(v.index() < STRIDE, "numeric points support indices below {STRIDE}");
        v.family as usize * STRIDE + v.index()
    }

    pub fn set(&mut self, v: Var, c: Complex64) -> &mut Self {
        self.vals[Self::slot(v)] = Some(c);
        self
    }

    /// Sets a holomorphic family together with its conjugate family.
    pub fn set_family(&mut self, fam: Family, vals: &[Complex64]) -> &mut Self {
        for (i, c) in vals.iter().enumerate() {
            self.set(Var::new(fam, i), *c);
            self.set(Var::new(fam.conj(), i), c.conj());
        }
        self
    }

    pub fn get(&self, v: Var) -> Option<Complex64> {
        self.vals[Self::slot(v)]
    }

    /// Point with ζ, ζ̄, z, z̄ set.
    pub fn zeta_z(zeta: &[Complex64], z: &[Complex64]) -> Self {
        let mut p = Self::new();
        p.set_family(Family::Zeta, zeta).set_family(Family::Z, z);
        p
    }
}
