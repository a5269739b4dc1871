//! Sparse multivariate polynomials over the Gaussian rationals, with the
//! unit `2πi` adjoined as a Laurent symbol.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};
use smallvec::SmallVec;

use super::gaussian::GaussianRational;
use super::point::Point;
use super::vars::{Family, Var};
use crate::error::{Error, Result};

pub const TWO_PI_I: Complex64 = Complex64::new(0.0, std::f64::consts::TAU);

/// A power product of variables times a power of `2πi`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pi: i32,
    vars: SmallVec<[(Var, u32); 6]>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(v: Var, e: u32) -> Self {
        let mut m = Self::one();
        if e > 0 {
            m.vars.push((v, e));
        }
        m
    }

    pub fn pi(k: i32) -> Self {
        Self {
            pi: k,
            vars: SmallVec::new(),
        }
    }

    pub fn from_pairs(pi: i32, pairs: impl IntoIterator<Item = (Var, u32)>) -> Self {
        let mut m = Self::pi(pi);
        for (v, e) in pairs {
            m = m.mul(&Self::var(v, e));
        }
        m
    }

    pub fn pi_exp(&self) -> i32 {
        self.pi
    }

    pub fn exp(&self, v: Var) -> u32 {
        match self.vars.binary_search_by(|(w, _)| w.cmp(&v)) {
            Ok(i) => self.vars[i].1,
            Err(_) => 0,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = (Var, u32)> + '_ {
        self.vars.iter().copied()
    }

    pub fn is_one(&self) -> bool {
        self.pi == 0 && self.vars.is_empty()
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = SmallVec::with_capacity(self.vars.len() + o.vars.len());
        let (mut i, mut j) = (0, 0);
        while i < self.vars.len() && j < o.vars.len() {
            let (a, b) = (self.vars[i], o.vars[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.vars[i..]);
        out.extend_from_slice(&o.vars[j..]);
        Self {
            pi: self.pi + o.pi,
            vars: out,
        }
    }

    /// Exact quotient, if `o` divides `self` (the `2πi` exponent always divides).
    pub fn div(&self, o: &Self) -> Option<Self> {
        let mut out = SmallVec::new();
        let mut j = 0;
        for &(v, e) in &self.vars {
            let mut e = e;
            if j < o.vars.len() && o.vars[j].0 < v {
                return None;
            }
            if j < o.vars.len() && o.vars[j].0 == v {
                if o.vars[j].1 > e {
                    return None;
                }
                e -= o.vars[j].1;
                j += 1;
            }
            if e > 0 {
                out.push((v, e));
            }
        }
        if j < o.vars.len() {
            return None;
        }
        Some(Self {
            pi: self.pi - o.pi,
            vars: out,
        })
    }

    /// Componentwise minimum of exponents (including the `2πi` exponent).
    pub fn gcd(&self, o: &Self) -> Self {
        let vars = self
            .vars
            .iter()
            .filter_map(|&(v, e)| {
                let f = o.exp(v);
                (f > 0).then_some((v, e.min(f)))
            })
            .collect();
        Self {
            pi: self.pi.min(o.pi),
            vars,
        }
    }

    pub fn degree(&self, fam: Family) -> u32 {
        self.vars
            .iter()
            .filter(|(v, _)| v.family == fam)
            .map(|(_, e)| e)
            .sum()
    }

    pub fn total_degree(&self) -> u32 {
        self.vars.iter().map(|(_, e)| e).sum()
    }

    pub fn pow(&self, k: u32) -> Self {
        Self {
            pi: self.pi * k as i32,
            vars: self.vars.iter().map(|&(v, e)| (v, e * k)).collect(),
        }
    }

    /// Conjugated variables; the caller accounts for `conj(2πi) = −2πi`.
    fn conj_vars(&self) -> Self {
        let mut vars: SmallVec<[(Var, u32); 6]> =
            self.vars.iter().map(|&(v, e)| (v.conj(), e)).collect();
        vars.sort_unstable_by_key(|p| p.0);
        Self { pi: self.pi, vars }
    }

    /// Removes `v`, returning its exponent and the remaining monomial.
    pub fn split_var(&self, v: Var) -> (u32, Self) {
        let mut rest = self.clone();
        match rest.vars.binary_search_by(|(w, _)| w.cmp(&v)) {
            Ok(i) => {
                let e = rest.vars.remove(i).1;
                (e, rest)
            }
            Err(_) => (0, rest),
        }
    }

    /// Removes the `2πi` factor.
    pub fn without_pi(&self) -> Self {
        Self {
            pi: 0,
            vars: self.vars.clone(),
        }
    }

    pub fn eval(&self, pt: &Point) -> Result<Complex64> {
        let mut acc = TWO_PI_I.powi(self.pi);
        for &(v, e) in &self.vars {
            let x = pt.get(v).ok_or_else(|| Error::Unbound(v.to_string()))?;
            acc *= x.powu(e);
        }
        Ok(acc)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        for &(v, e) in &self.vars {
            if e == 1 {
                parts.push(v.to_string());
            } else {
                parts.push(format!("{v}^{e}"));
            }
        }
        if self.pi == 1 {
            parts.push("pi2i".into());
        } else if self.pi != 0 {
            parts.push(format!("pi2i^{}", self.pi));
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Polynomial with canonical (sorted, zero-free) term map.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiPoly {
    terms: BTreeMap<Monomial, GaussianRational>,
}

/// Gradings for [`MultiPoly::homogeneity`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grading {
    Family(Family),
    /// `λ` on ζ and `λ̄` on ζ̄ simultaneously.
    CombinedZeta,
    /// `μ` on z and `μ̄` on z̄ simultaneously.
    CombinedZ,
}

impl MultiPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(GaussianRational::one())
    }

    pub fn constant(c: GaussianRational) -> Self {
        Self::term(c, Monomial::one())
    }

    pub fn int(n: i64) -> Self {
        Self::constant(n.into())
    }

    pub fn term(c: GaussianRational, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Self { terms }
    }

    pub fn var(v: Var) -> Self {
        Self::term(GaussianRational::one(), Monomial::var(v, 1))
    }

    /// `(2πi)^k`.
    pub fn pi(k: i32) -> Self {
        Self::term(GaussianRational::one(), Monomial::pi(k))
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, GaussianRational)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl ExactSizeIterator<Item = (&Monomial, &GaussianRational)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial, GaussianRational)> {
        self.terms.into_iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The coefficient if this is a constant (no variables, no `2πi`).
    pub fn as_constant(&self) -> Option<GaussianRational> {
        match self.terms.len() {
            0 => Some(GaussianRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    /// True if the polynomial has a single term.
    pub fn as_monomial(&self) -> Option<(&Monomial, &GaussianRational)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    pub fn leading(&self) -> Option<(&Monomial, &GaussianRational)> {
        self.terms.iter().next_back()
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(n, a)| (n.mul(m), a.clone()))
                .collect(),
        }
    }

    /// Exact division by a monomial; `None` if some term is not divisible.
    pub fn div_monomial(&self, m: &Monomial) -> Option<Self> {
        let mut terms = BTreeMap::new();
        for (n, a) in &self.terms {
            terms.insert(n.div(m)?, a.clone());
        }
        Some(Self { terms })
    }

    /// Largest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |g, m| g.gcd(m))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn conjugate(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let mut c = c.conj();
                    if m.pi.rem_euclid(2) == 1 {
                        c = -c;
                    }
                    (m.conj_vars(), c)
                })
                .collect(),
        }
    }

    pub fn differentiate(&self, v: Var) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let (e, rest) = m.split_var(v);
            if e == 0 {
                continue;
            }
            let m2 = rest.mul(&Monomial::var(v, e - 1));
            out.add_term(m2, c * &GaussianRational::from_int(e as i64));
        }
        out
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.terms.keys().any(|m| m.exp(v) > 0)
    }

    pub fn depends_on_family(&self, fam: Family) -> bool {
        self.terms.keys().any(|m| m.degree(fam) > 0)
    }

    /// All variables occurring, sorted.
    pub fn variables(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self
            .terms
            .keys()
            .flat_map(|m| m.vars().map(|(v, _)| v))
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// Polynomial substitution. Unbound variables stay in place.
    pub fn substitute(&self, bindings: &HashMap<Var, MultiPoly>) -> Self {
        let mut powers: HashMap<(Var, u32), MultiPoly> = HashMap::new();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut acc = Self::term(c.clone(), Monomial::pi(m.pi));
            let mut keep = Monomial::one();
            for (v, e) in m.vars() {
                match bindings.get(&v) {
                    Some(b) => {
                        let p = powers.entry((v, e)).or_insert_with(|| b.pow(e));
                        acc = &acc * p;
                    }
                    None => keep = keep.mul(&Monomial::var(v, e)),
                }
            }
            out += &acc.mul_monomial(&keep);
        }
        out
    }

    /// Degree per family of the first term, or `None` if terms disagree.
    fn family_degree(&self, fam: Family) -> Option<i32> {
        let mut it = self.terms.keys().map(|m| m.degree(fam) as i32);
        let first = it.next().unwrap_or(0);
        it.all(|d| d == first).then_some(first)
    }

    /// Weight `d` with `e(λv) = λ^d e(v)` for the given grading, or `None`
    /// if the polynomial is not homogeneous for it. The zero polynomial has
    /// weight 0.
    pub fn homogeneity(&self, g: Grading) -> Option<i32> {
        match g {
            Grading::Family(f) => self.family_degree(f),
            Grading::CombinedZeta => self.combined(Family::Zeta),
            Grading::CombinedZ => self.combined(Family::Z),
        }
    }

    fn combined(&self, fam: Family) -> Option<i32> {
        let a = self.family_degree(fam)?;
        let b = self.family_degree(fam.conj())?;
        (b == 0).then_some(a)
    }

    /// Total degree in the given families, if homogeneous.
    pub fn degree_in(&self, fams: &[Family]) -> Option<u32> {
        let mut it = self
            .terms
            .keys()
            .map(|m| fams.iter().map(|&f| m.degree(f)).sum::<u32>());
        let first = it.next().unwrap_or(0);
        it.all(|d| d == first).then_some(first)
    }

    pub fn evaluate(&self, pt: &Point) -> Result<Complex64> {
        let mut acc = Complex64::zero();
        for (m, c) in &self.terms {
            acc += c.to_complex() * m.eval(pt)?;
        }
        Ok(acc)
    }
}

impl<'a> Add<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn add(self, o: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        out += o;
        out
    }
}

impl<'a> Sub<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn sub(self, o: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl<'a> Mul<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn mul(self, o: &MultiPoly) -> MultiPoly {
        let mut out = MultiPoly::zero();
        for (m, a) in &self.terms {
            for (n, b) in &o.terms {
                out.add_term(m.mul(n), a * b);
            }
        }
        out
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        MultiPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        -&self
    }
}

impl Add for MultiPoly {
    type Output = MultiPoly;
    fn add(mut self, o: MultiPoly) -> MultiPoly {
        self += &o;
        self
    }
}

impl Sub for MultiPoly {
    type Output = MultiPoly;
    fn sub(self, o: MultiPoly) -> MultiPoly {
        &self - &o
    }
}

impl Mul for MultiPoly {
    type Output = MultiPoly;
    fn mul(self, o: MultiPoly) -> MultiPoly {
        &self * &o
    }
}

impl std::ops::AddAssign<&MultiPoly> for MultiPoly {
    fn add_assign(&mut self, o: &MultiPoly) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl std::ops::SubAssign<&MultiPoly> for MultiPoly {
    fn sub_assign(&mut self, o: &MultiPoly) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), -c);
        }
    }
}

impl From<Var> for MultiPoly {
    fn from(v: Var) -> Self {
        Self::var(v)
    }
}

impl From<i64> for MultiPoly {
    fn from(n: i64) -> Self {
        Self::int(n)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg_real = c.is_real() && c.re < num_rational::BigRational::zero();
            let c_abs = if neg_real { -c } else { c.clone() };
            if k == 0 {
                if neg_real {
                    write!(f, "-")?;
                }
            } else if neg_real {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{c_abs}")?;
            } else if c_abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{c_abs}*{m}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeta(i: usize) -> MultiPoly {
        MultiPoly::var(Var::zeta(i))
    }

    #[test]
    fn difference_of_squares() {
        let p = &(&zeta(0) + &zeta(1)) * &(&zeta(0) - &zeta(1));
        let q = &zeta(0).pow(2) - &zeta(1).pow(2);
        assert_eq!(p, q);
        assert_eq!(&p + &MultiPoly::zero(), p);
    }

    #[test]
    fn conjugation_flips_pi() {
        let p = MultiPoly::pi(1).scale(&GaussianRational::i());
        let c = p.conjugate();
        assert_eq!(c, MultiPoly::pi(1).scale(&GaussianRational::i()));
        let q = &MultiPoly::var(Var::zeta(0)) * &MultiPoly::var(Var::z_bar(1));
        let q = q.scale(&GaussianRational::i());
        let expect = (&MultiPoly::var(Var::zeta_bar(0)) * &MultiPoly::var(Var::z(1)))
            .scale(&-GaussianRational::i());
        assert_eq!(q.conjugate(), expect);
    }

    #[test]
    fn power_rule() {
        let f = &zeta(1).pow(3) - &(&zeta(2).pow(2) * &zeta(0));
        let d = f.differentiate(Var::zeta(2));
        assert_eq!(d, (&zeta(2) * &zeta(0)).scale(&(-2).into()));
    }

    #[test]
    fn gradings() {
        let f = &(&zeta(0).pow(3) + &zeta(1).pow(3)) + &zeta(2).pow(3);
        assert_eq!(f.homogeneity(Grading::Family(Family::Zeta)), Some(3));
        let g = &zeta(0) + &MultiPoly::var(Var::zeta_bar(0));
        assert_eq!(g.homogeneity(Grading::Family(Family::Zeta)), None);
        let h = &zeta(0) * &MultiPoly::var(Var::zeta_bar(0));
        assert_eq!(h.homogeneity(Grading::CombinedZeta), None);
    }

    #[test]
    fn monomial_division() {
        let a = Monomial::from_pairs(1, [(Var::zeta(0), 2), (Var::z(1), 1)]);
        let b = Monomial::from_pairs(2, [(Var::zeta(0), 1)]);
        let q = a.div(&b).unwrap();
        assert_eq!(q, Monomial::from_pairs(-1, [(Var::zeta(0), 1), (Var::z(1), 1)]));
        assert!(b.div(&a).is_none());
    }
}
