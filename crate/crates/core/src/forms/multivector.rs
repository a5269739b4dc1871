use std::collections::BTreeMap;

use num_complex::Complex64;
use num_traits::Zero;

use super::gens::{bits, wedge_sign, DiffFamily, GenLayout};

/// A form with complex-number coefficients at a single point.
#[derive(Clone, Debug, PartialEq)]
pub struct Multivector {
    layout: GenLayout,
    terms: BTreeMap<u64, Complex64>,
}

impl Multivector {
    pub fn zero(n: usize) -> Self {
        Self {
            layout: GenLayout::new(n),
            terms: BTreeMap::new(),
        }
    }

    pub fn layout(&self) -> GenLayout {
        self.layout
    }

    pub fn add(&mut self, mask: u64, c: Complex64) {
        *self.terms.entry(mask).or_insert_with(Complex64::zero) += c;
    }

    pub fn get(&self, mask: u64) -> Complex64 {
        self.terms.get(&mask).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, Complex64)> + '_ {
        self.terms.iter().map(|(m, c)| (*m, *c))
    }

    pub fn wedge(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.layout.n);
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                if let Some(s) = wedge_sign(*a, *b) {
                    out.add(a | b, ca * cb * s as f64);
                }
            }
        }
        out
    }

    /// Contraction with numeric field components paired with `target`.
    pub fn contract(&self, target: DiffFamily, comps: &[Complex64]) -> Self {
        let l = self.layout;
        let mut out = Self::zero(l.n);
        for (m, c) in &self.terms {
            for p in bits(m & l.family_mask(target)) {
                let (_, j) = l.decode(p);
                let below = (m & ((1u64 << p) - 1)).count_ones();
                let s = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
                out.add(m & !(1u64 << p), c * comps[j] * s);
            }
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add(*m, -c);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}
