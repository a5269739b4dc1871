//! Rational functions with a factored denominator.
//!
//! The denominator is kept as a product of normalized factors raised to
//! positive powers. Single-variable factors are split out, constants and
//! powers of `2πi` are moved into the numerator, and multi-term factors are
//! scaled to leading coefficient 1. Sums use the least common multiple of the
//! factor lists; no polynomial gcd is ever taken, so equality is decided by
//! testing whether the numerator of the difference vanishes.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};

use super::gaussian::GaussianRational;
use super::point::Point;
use super::poly::{Grading, Monomial, MultiPoly};
use super::vars::{Family, Var};
use crate::error::{Error, Result};

pub const DEFAULT_POLE_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, Default)]
pub struct RationalFn {
    num: MultiPoly,
    den: Vec<(MultiPoly, u32)>,
}

/// Splits a nonzero polynomial into a numerator multiplier and normalized
/// factors.
fn normalize_factor(f: &MultiPoly) -> (MultiPoly, Vec<(MultiPoly, u32)>) {
    debug_assert!(!f.is_zero());
    let content = f.monomial_content();
    let rest = f.div_monomial(&content).expect("content divides");
    let mut factors: Vec<(MultiPoly, u32)> = content
        .vars()
        .map(|(v, e)| (MultiPoly::var(v), e))
        .collect();
    let mut mult = MultiPoly::pi(-content.pi_exp());
    if let Some((m, c)) = rest.as_monomial() {
        debug_assert!(m.is_one());
        mult = mult.scale(&c.inv().expect("nonzero"));
    } else {
        let lc = rest.leading().unwrap().1.clone();
        let inv = lc.inv().expect("nonzero");
        factors.push((rest.scale(&inv), 1));
        mult = mult.scale(&inv);
    }
    (mult, factors)
}

fn merge_factor(den: &mut Vec<(MultiPoly, u32)>, f: MultiPoly, e: u32) {
    if e == 0 {
        return;
    }
    match den.binary_search_by(|(g, _)| g.cmp(&f)) {
        Ok(i) => den[i].1 += e,
        Err(i) => den.insert(i, (f, e)),
    }
}

impl RationalFn {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        MultiPoly::one().into()
    }

    pub fn constant(c: GaussianRational) -> Self {
        MultiPoly::constant(c).into()
    }

    pub fn int(n: i64) -> Self {
        MultiPoly::int(n).into()
    }

    pub fn var(v: Var) -> Self {
        MultiPoly::var(v).into()
    }

    /// `(2πi)^k`.
    pub fn pi(k: i32) -> Self {
        MultiPoly::pi(k).into()
    }

    /// `num / den`; errors if `den` is the zero polynomial.
    pub fn new(num: MultiPoly, den: &MultiPoly) -> Result<Self> {
        Self::from(num).div_poly(den)
    }

    pub fn numerator(&self) -> &MultiPoly {
        &self.num
    }

    pub fn factors(&self) -> &[(MultiPoly, u32)] {
        &self.den
    }

    /// The expanded denominator.
    pub fn denominator(&self) -> MultiPoly {
        self.den
            .iter()
            .fold(MultiPoly::one(), |acc, (f, e)| &acc * &f.pow(*e))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_empty()
    }

    pub fn as_polynomial(&self) -> Option<&MultiPoly> {
        self.den.is_empty().then_some(&self.num)
    }

    pub fn as_constant(&self) -> Option<GaussianRational> {
        if self.num.is_zero() {
            return Some(GaussianRational::zero());
        }
        self.as_polynomial()?.as_constant()
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn mul_poly(&self, p: &MultiPoly) -> Self {
        self.clone().with_num(&self.num * p)
    }

    fn with_num(mut self, num: MultiPoly) -> Self {
        self.num = num;
        if self.num.is_zero() {
            self.den.clear();
        }
        self.cancel_monomials();
        self
    }

    /// Cancels single-variable denominator factors against the numerator's
    /// monomial content.
    fn cancel_monomials(&mut self) {
        if self.num.is_zero() {
            return;
        }
        let content = self.num.monomial_content();
        let mut cancel = Monomial::one();
        self.den.retain_mut(|(f, e)| {
            if let Some((m, _)) = f.as_monomial() {
                let mut vars = m.vars();
                if let (Some((v, 1)), None) = (vars.next(), vars.next()) {
                    let k = content.exp(v).min(*e);
                    if k > 0 {
                        cancel = cancel.mul(&Monomial::var(v, k));
                        *e -= k;
                    }
                }
            }
            *e > 0
        });
        if !cancel.is_one() {
            self.num = self.num.div_monomial(&cancel).expect("content divides");
        }
    }

    pub fn div_poly(&self, p: &MultiPoly) -> Result<Self> {
        self.div_poly_pow(p, 1)
    }

    /// Divides by `p^e` keeping `p`'s factor structure.
    pub fn div_poly_pow(&self, p: &MultiPoly, e: u32) -> Result<Self> {
        if p.is_zero() {
            return Err(Error::DenominatorVanishes);
        }
        let (mult, factors) = normalize_factor(p);
        let mut out = self.clone();
        for (f, k) in factors {
            merge_factor(&mut out.den, f, k * e);
        }
        Ok(out.with_num(&self.num * &mult.pow(e)))
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        self.div_pow(o, 1)
    }

    /// Divides by `o^e`.
    pub fn div_pow(&self, o: &Self, e: u32) -> Result<Self> {
        if o.is_zero() {
            return Err(Error::DenominatorVanishes);
        }
        let mut out = self.div_poly_pow(&o.num, e)?;
        let mut extra = MultiPoly::one();
        for (f, k) in &o.den {
            extra = &extra * &f.pow(*k * e);
        }
        let num = &out.num * &extra;
        out.num = num;
        out.cancel_monomials();
        Ok(out)
    }

    pub fn inv(&self) -> Result<Self> {
        Self::one().div(self)
    }

    pub fn pow(&self, k: u32) -> Self {
        Self {
            num: self.num.pow(k),
            den: self.den.iter().map(|(f, e)| (f.clone(), e * k)).collect(),
        }
    }

    pub fn conjugate(&self) -> Self {
        let mut out = Self::from(self.num.conjugate());
        for (f, e) in &self.den {
            out = out
                .div_poly_pow(&f.conjugate(), *e)
                .expect("conjugate of a nonzero factor is nonzero");
        }
        out
    }

    pub fn differentiate(&self, v: Var) -> Self {
        let dnum = self.num.differentiate(v);
        let moving: Vec<usize> = (0..self.den.len())
            .filter(|&i| self.den[i].0.depends_on(v))
            .collect();
        if moving.is_empty() {
            return self.clone().with_num(dnum);
        }
        let derivs: Vec<MultiPoly> = moving
            .iter()
            .map(|&i| self.den[i].0.differentiate(v))
            .collect();
        let mut num = dnum;
        for &i in &moving {
            num = &num * &self.den[i].0;
        }
        for (k, &i) in moving.iter().enumerate() {
            let mut t = self.num.scale(&GaussianRational::from_int(self.den[i].1 as i64));
            t = &t * &derivs[k];
            for &j in &moving {
                if j != i {
                    t = &t * &self.den[j].0;
                }
            }
            num -= &t;
        }
        let mut den = self.den.clone();
        for &i in &moving {
            den[i].1 += 1;
        }
        Self { num, den }.with_num_checked()
    }

    fn with_num_checked(mut self) -> Self {
        if self.num.is_zero() {
            self.den.clear();
        }
        self.cancel_monomials();
        self
    }

    /// Composition with rational bindings.
    pub fn substitute(&self, bindings: &HashMap<Var, RationalFn>) -> Result<Self> {
        let mut out = subst_poly(&self.num, bindings);
        for (f, e) in &self.den {
            let g = subst_poly(f, bindings);
            if g.is_zero() {
                return Err(Error::DenominatorVanishes);
            }
            out = out.div_pow(&g, *e)?;
        }
        Ok(out)
    }

    /// Substitutes exact constants; the result may still involve `2πi`
    /// and any unbound variables.
    pub fn evaluate_exact(&self, point: &HashMap<Var, GaussianRational>) -> Result<Self> {
        let b = point
            .iter()
            .map(|(v, c)| (*v, RationalFn::constant(c.clone())))
            .collect();
        self.substitute(&b)
    }

    pub fn evaluate(&self, pt: &Point) -> Result<Complex64> {
        self.evaluate_with_floor(pt, DEFAULT_POLE_FLOOR)
    }

    pub fn evaluate_with_floor(&self, pt: &Point, floor: f64) -> Result<Complex64> {
        let mut d = Complex64::one();
        for (f, e) in &self.den {
            let x = f.evaluate(pt)?;
            if x.norm() < floor {
                return Err(Error::Pole);
            }
            d *= x.powu(*e);
        }
        Ok(self.num.evaluate(pt)? / d)
    }

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

    /// Degree in one family (numerator minus denominator), if homogeneous.
    pub fn family_degree(&self, fam: Family) -> Option<i32> {
        let g = Grading::Family(fam);
        let mut d = self.num.homogeneity(g)?;
        for (f, e) in &self.den {
            d -= f.homogeneity(g)? * *e as i32;
        }
        Some(d)
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.num.depends_on(v) || self.den.iter().any(|(f, _)| f.depends_on(v))
    }

    pub fn depends_on_family(&self, fam: Family) -> bool {
        self.num.depends_on_family(fam) || self.den.iter().any(|(f, _)| f.depends_on_family(fam))
    }
}

fn subst_poly(p: &MultiPoly, bindings: &HashMap<Var, RationalFn>) -> RationalFn {
    let touched = p.variables().into_iter().any(|v| bindings.contains_key(&v));
    if !touched {
        return p.clone().into();
    }
    if bindings.values().all(|b| b.is_polynomial()) {
        let polys = bindings
            .iter()
            .map(|(v, b)| (*v, b.num.clone()))
            .collect();
        return p.substitute(&polys).into();
    }
    let mut powers: HashMap<(Var, u32), RationalFn> = HashMap::new();
    let mut out = RationalFn::zero();
    for (m, c) in p.terms() {
        let mut acc = RationalFn::from(MultiPoly::term(c.clone(), Monomial::pi(m.pi_exp())));
        let mut keep = Monomial::one();
        for (v, e) in m.vars() {
            match bindings.get(&v) {
                Some(b) => {
                    let pw = powers.entry((v, e)).or_insert_with(|| b.pow(e));
                    acc = &acc * pw;
                }
                None => keep = keep.mul(&Monomial::var(v, e)),
            }
        }
        out = &out + &acc.mul_poly(&MultiPoly::term(GaussianRational::one(), keep));
    }
    out
}

impl From<MultiPoly> for RationalFn {
    fn from(num: MultiPoly) -> Self {
        Self {
            num,
            den: Vec::new(),
        }
    }
}

impl From<Var> for RationalFn {
    fn from(v: Var) -> Self {
        Self::var(v)
    }
}

impl From<i64> for RationalFn {
    fn from(n: i64) -> Self {
        Self::int(n)
    }
}

impl From<GaussianRational> for RationalFn {
    fn from(c: GaussianRational) -> Self {
        Self::constant(c)
    }
}

/// Brings both operands over the lcm of their factor lists.
fn common(a: &RationalFn, b: &RationalFn) -> (MultiPoly, MultiPoly, Vec<(MultiPoly, u32)>) {
    let mut den = a.den.clone();
    let mut ma = MultiPoly::one();
    let mut mb = MultiPoly::one();
    for (f, e) in &b.den {
        match den.binary_search_by(|(g, _)| g.cmp(f)) {
            Ok(i) => {
                let ea = den[i].1;
                if *e > ea {
                    ma = &ma * &f.pow(e - ea);
                    den[i].1 = *e;
                } else if ea > *e {
                    mb = &mb * &f.pow(ea - e);
                }
            }
            Err(i) => {
                ma = &ma * &f.pow(*e);
                den.insert(i, (f.clone(), *e));
            }
        }
    }
    for (f, e) in &a.den {
        if b.den.binary_search_by(|(g, _)| g.cmp(f)).is_err() {
            mb = &mb * &f.pow(*e);
        }
    }
    (&a.num * &ma, &b.num * &mb, den)
}

impl<'a> Add<&'a RationalFn> for &'a RationalFn {
    type Output = RationalFn;
    fn add(self, o: &RationalFn) -> RationalFn {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            return self.clone().with_num(&self.num + &o.num);
        }
        let (a, b, den) = common(self, o);
        RationalFn { num: a + b, den }.with_num_checked()
    }
}

impl<'a> Sub<&'a RationalFn> for &'a RationalFn {
    type Output = RationalFn;
    fn sub(self, o: &RationalFn) -> RationalFn {
        self + &(-o)
    }
}

impl<'a> Mul<&'a RationalFn> for &'a RationalFn {
    type Output = RationalFn;
    fn mul(self, o: &RationalFn) -> RationalFn {
        if self.is_zero() || o.is_zero() {
            return RationalFn::zero();
        }
        let mut den = self.den.clone();
        for (f, e) in &o.den {
            merge_factor(&mut den, f.clone(), *e);
        }
        RationalFn {
            num: &self.num * &o.num,
            den,
        }
        .with_num_checked()
    }
}

impl Neg for &RationalFn {
    type Output = RationalFn;
    fn neg(self) -> RationalFn {
        RationalFn {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Neg for RationalFn {
    type Output = RationalFn;
    fn neg(mut self) -> RationalFn {
        self.num = -self.num;
        self
    }
}

impl Add for RationalFn {
    type Output = RationalFn;
    fn add(self, o: RationalFn) -> RationalFn {
        &self + &o
    }
}

impl Sub for RationalFn {
    type Output = RationalFn;
    fn sub(self, o: RationalFn) -> RationalFn {
        &self - &o
    }
}

impl Mul for RationalFn {
    type Output = RationalFn;
    fn mul(self, o: RationalFn) -> RationalFn {
        &self * &o
    }
}

impl std::ops::AddAssign<&RationalFn> for RationalFn {
    fn add_assign(&mut self, o: &RationalFn) {
        *self = &*self + o;
    }
}

impl std::ops::SubAssign<&RationalFn> for RationalFn {
    fn sub_assign(&mut self, o: &RationalFn) {
        *self = &*self - o;
    }
}

impl PartialEq for RationalFn {
    fn eq(&self, o: &Self) -> bool {
        if self.den == o.den {
            return self.num == o.num;
        }
        (self - o).is_zero()
    }
}

impl fmt::Display for RationalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_empty() {
            return write!(f, "{}", self.num);
        }
        write!(f, "({})/(", self.num)?;
        for (k, (g, e)) in self.den.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "({g})")?;
            } else {
                write!(f, "({g})^{e}")?;
            }
        }
        write!(f, ")")
    }
}
