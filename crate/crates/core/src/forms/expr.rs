use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{Family, GaussianRational, Grading, MultiPoly, Point, RationalFn, Var};
use crate::error::{Error, Result};

use super::gens::{bits, wedge_sign, DiffFamily, GenLayout};
use super::multivector::Multivector;
use super::vector::VectorField;

/// Which antiholomorphic variables `∂̄` differentiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbarFamily {
    ZetaBar,
    ZBar,
    Both,
}

/// A differential form with rational coefficients. Terms are keyed by the
/// generator bitmask; bundle weights `(p_ζ, p_z)` are optional metadata.
#[derive(Clone, Debug)]
pub struct FormExpr {
    layout: GenLayout,
    terms: BTreeMap<u64, RationalFn>,
    bundle: Option<(i32, i32)>,
}

/// Outcome of [`FormExpr::is_projective`].
#[derive(Clone, Debug, PartialEq)]
pub struct Projectivity {
    pub projective: bool,
    pub bundle: Option<(i32, i32)>,
    pub failures: Vec<String>,
}

const PAR_THRESHOLD: usize = 24;

impl FormExpr {
    pub fn zero(n: usize) -> Self {
        Self {
            layout: GenLayout::new(n),
            terms: BTreeMap::new(),
            bundle: None,
        }
    }

    pub fn scalar(n: usize, c: RationalFn) -> Self {
        Self::term(n, 0, c)
    }

    pub fn one(n: usize) -> Self {
        Self::scalar(n, RationalFn::one())
    }

    pub fn term(n: usize, mask: u64, c: RationalFn) -> Self {
        let mut f = Self::zero(n);
        f.add_term(mask, c);
        f
    }

    pub fn gen(n: usize, fam: DiffFamily, j: usize) -> Self {
        let l = GenLayout::new(n);
        Self::term(n, l.bit(fam, j), RationalFn::one())
    }

    /// `Σ_j c_j dv_j`.
    pub fn one_form(n: usize, fam: DiffFamily, coeffs: &[RationalFn]) -> Self {
        let l = GenLayout::new(n);
        let mut f = Self::zero(n);
        for (j, c) in coeffs.iter().enumerate() {
            f.add_term(l.bit(fam, j), c.clone());
        }
        f
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn layout(&self) -> GenLayout {
        self.layout
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, &RationalFn)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn coeff(&self, mask: u64) -> RationalFn {
        self.terms.get(&mask).cloned().unwrap_or_default()
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

    pub fn bundle(&self) -> Option<(i32, i32)> {
        self.bundle
    }

    pub fn with_bundle(mut self, b: (i32, i32)) -> Self {
        self.bundle = Some(b);
        self
    }

    pub fn without_bundle(mut self) -> Self {
        self.bundle = None;
        self
    }

    pub fn add_term(&mut self, mask: u64, c: RationalFn) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(mask) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get() + &c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    fn check_layout(&self, o: &Self) {
        assert_eq!(self.layout, o.layout, "forms over different dimensions");
    }

    fn merged_bundle(a: &Self, b: &Self) -> Option<(i32, i32)> {
        if a.is_zero() {
            b.bundle
        } else if b.is_zero() || a.bundle == b.bundle {
            a.bundle
        } else {
            None
        }
    }

    pub fn scale(&self, c: &RationalFn) -> Self {
        let mut out = Self::zero(self.n());
        out.bundle = self.bundle;
        if c.is_zero() {
            return out;
        }
        for (m, a) in &self.terms {
            out.add_term(*m, a * c);
        }
        out
    }

    pub fn scale_const(&self, c: &GaussianRational) -> Self {
        let mut out = Self::zero(self.n());
        out.bundle = self.bundle;
        for (m, a) in &self.terms {
            out.add_term(*m, a.scale(c));
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&RationalFn) -> Result<RationalFn> + Sync) -> Result<Self> {
        let mapped: Result<Vec<(u64, RationalFn)>> = if self.terms.len() >= PAR_THRESHOLD {
            self.terms
                .par_iter()
                .map(|(m, c)| Ok((*m, f(c)?)))
                .collect()
        } else {
            self.terms.iter().map(|(m, c)| Ok((*m, f(c)?))).collect()
        };
        let mut out = Self::zero(self.n());
        out.bundle = self.bundle;
        for (m, c) in mapped? {
            out.add_term(m, c);
        }
        Ok(out)
    }

    /// Rational substitution in the coefficients.
    pub fn substitute(&self, bindings: &HashMap<Var, RationalFn>) -> Result<Self> {
        self.map_coeffs(|c| c.substitute(bindings))
    }

    pub fn wedge(&self, o: &Self) -> Self {
        self.wedge_bounded(o, usize::MAX)
    }

    /// Wedge product dropping terms whose dζ-degree exceeds `max_dzeta`.
    pub fn wedge_bounded(&self, o: &Self, max_dzeta: usize) -> Self {
        self.check_layout(o);
        let l = self.layout;
        let pairs: Vec<(u64, &RationalFn, u64, &RationalFn)> = self
            .terms
            .iter()
            .flat_map(|(a, ca)| o.terms.iter().map(move |(b, cb)| (*a, ca, *b, cb)))
            .filter(|(a, _, b, _)| {
                a & b == 0 && l.degree(a | b, DiffFamily::DZeta) as usize <= max_dzeta
            })
            .collect();
        let products: Vec<(u64, RationalFn)> = if pairs.len() >= PAR_THRESHOLD {
            pairs
                .par_iter()
                .map(|(a, ca, b, cb)| {
                    let s = wedge_sign(*a, *b).unwrap();
                    let p = *ca * *cb;
                    (a | b, if s < 0 { -p } else { p })
                })
                .collect()
        } else {
            pairs
                .iter()
                .map(|(a, ca, b, cb)| {
                    let s = wedge_sign(*a, *b).unwrap();
                    let p = *ca * *cb;
                    (a | b, if s < 0 { -p } else { p })
                })
                .collect()
        };
        let mut out = Self::zero(self.n());
        out.bundle = match (self.bundle, o.bundle) {
            (Some((a, b)), Some((c, d))) => Some((a + c, b + d)),
            _ => None,
        };
        for (m, c) in products {
            out.add_term(m, c);
        }
        out
    }

    /// `k`-fold wedge power, truncated at dζ-degree `N`.
    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.n());
        acc.bundle = self.bundle.map(|_| (0, 0));
        for _ in 0..k {
            acc = acc.wedge_bounded(self, self.n());
        }
        acc
    }

    pub fn degrees(&self, mask: u64) -> [u32; 4] {
        DiffFamily::ALL.map(|f| self.layout.degree(mask, f))
    }

    /// The component with the given dζ-degree and, optionally, dζ̄- and
    /// dz̄-degrees.
    pub fn extract(&self, dzeta: u32, dzeta_bar: Option<u32>, dz_bar: Option<u32>) -> Self {
        let l = self.layout;
        let mut out = Self::zero(self.n());
        out.bundle = self.bundle;
        for (m, c) in &self.terms {
            if l.degree(*m, DiffFamily::DZeta) == dzeta
                && dzeta_bar.is_none_or(|d| l.degree(*m, DiffFamily::DZetaBar) == d)
                && dz_bar.is_none_or(|d| l.degree(*m, DiffFamily::DZBar) == d)
            {
                out.terms.insert(*m, c.clone());
            }
        }
        out
    }

    /// The part with no generators at all.
    pub fn scalar_part(&self) -> RationalFn {
        self.coeff(0)
    }

    /// Interior multiplication `δ_v`.
    pub fn contract(&self, v: &VectorField) -> Self {
        let l = self.layout;
        assert_eq!(v.comps.len(), self.n() + 1);
        let fam_mask = l.family_mask(v.target);
        let mut out = Self::zero(self.n());
        out.bundle = self.bundle;
        for (m, c) in &self.terms {
            let hits = m & fam_mask;
            for p in bits(hits) {
                let (_, j) = l.decode(p);
                if v.comps[j].is_zero() {
                    continue;
                }
                let below = (m & ((1u64 << p) - 1)).count_ones();
                let t = c * &v.comps[j];
                out.add_term(m & !(1u64 << p), if below.is_multiple_of(2) { t } else { -t });
            }
        }
        out
    }

    pub fn dbar(&self, family: DbarFamily) -> Self {
        let l = self.layout;
        let fams: &[(Family, DiffFamily)] = match family {
            DbarFamily::ZetaBar => &[(Family::ZetaBar, DiffFamily::DZetaBar)],
            DbarFamily::ZBar => &[(Family::ZBar, DiffFamily::DZBar)],
            DbarFamily::Both => &[
                (Family::ZetaBar, DiffFamily::DZetaBar),
                (Family::ZBar, DiffFamily::DZBar),
            ],
        };
        let jobs: Vec<(u64, &RationalFn, Var, u64)> = self
            .terms
            .iter()
            .flat_map(|(m, c)| {
                fams.iter().flat_map(move |&(vf, df)| {
                    (0..=l.n).filter_map(move |j| {
                        let g = l.bit(df, j);
                        let v = Var::new(vf, j);
                        (g & m == 0 && c.depends_on(v)).then_some((*m, c, v, g))
                    })
                })
            })
            .collect();
        let run = |(m, c, v, g): &(u64, &RationalFn, Var, u64)| {
            let d = c.differentiate(*v);
            let s = wedge_sign(*g, *m).unwrap();
            (g | m, if s < 0 { -d } else { d })
        };
        let parts: Vec<(u64, RationalFn)> = if jobs.len() >= PAR_THRESHOLD {
            jobs.par_iter().map(run).collect()
        } else {
            jobs.iter().map(run).collect()
        };
        let mut out = Self::zero(self.n());
        out.bundle = self.bundle;
        for (m, c) in parts {
            out.add_term(m, c);
        }
        out
    }

    pub fn delta_eta(&self) -> Self {
        self.contract(&VectorField::eta(self.n()))
    }

    /// `∇_η = δ_η − ∂̄` with `∂̄` in both ζ̄ and z̄.
    pub fn nabla_eta(&self) -> Self {
        &self.delta_eta() - &self.dbar(DbarFamily::Both)
    }

    /// Checks `δ_ζ = δ_ζ̄ = δ_z̄ = 0` and that each term's weights match the
    /// bundle `(p_ζ, p_z)` shifted by its dζ-degree `j`: holomorphic ζ-weight
    /// `p_ζ + j`, z-weight `p_z − j`, antiholomorphic weights 0. Generators
    /// count towards the weight of their family. Without a declared bundle
    /// the first term fixes it.
    pub fn is_projective(&self) -> Projectivity {
        let n = self.n();
        let mut failures = Vec::new();
        for (name, fam) in [
            ("δ_ζ", DiffFamily::DZeta),
            ("δ_ζ̄", DiffFamily::DZetaBar),
            ("δ_z̄", DiffFamily::DZBar),
        ] {
            let c = self.contract(&VectorField::euler(n, fam));
            if let Some((m, t)) = c.terms.iter().next() {
                failures.push(format!(
                    "{name} ≠ 0: term {} with coefficient {t}",
                    self.mask_name(*m)
                ));
            }
        }
        if self.layout.degree(self.terms.keys().fold(0, |a, b| a | b), DiffFamily::DW) > 0 {
            failures.push("contains dw generators".into());
        }
        let mut bundle = self.bundle;
        for (m, c) in &self.terms {
            match self.term_weights(*m, c) {
                None => failures.push(format!(
                    "coefficient of {} is not homogeneous",
                    self.mask_name(*m)
                )),
                Some([hz, az, hw, aw]) => {
                    let j = self.layout.degree(*m, DiffFamily::DZeta) as i32;
                    let b = *bundle.get_or_insert((hz - j, hw + j));
                    if hz != b.0 + j || hw != b.1 - j || az != 0 || aw != 0 {
                        failures.push(format!(
                            "weights of {} are (ζ {hz}, ζ̄ {az}, z {hw}, z̄ {aw}), expected (ζ {}, ζ̄ 0, z {}, z̄ 0)",
                            self.mask_name(*m),
                            b.0 + j,
                            b.1 - j
                        ));
                    }
                }
            }
        }
        Projectivity {
            projective: failures.is_empty(),
            bundle,
            failures,
        }
    }

    /// Weights (ζ, ζ̄, z, z̄) of one term including its generators.
    fn term_weights(&self, m: u64, c: &RationalFn) -> Option<[i32; 4]> {
        let l = self.layout;
        Some([
            c.family_degree(Family::Zeta)? + l.degree(m, DiffFamily::DZeta) as i32,
            c.family_degree(Family::ZetaBar)? + l.degree(m, DiffFamily::DZetaBar) as i32,
            c.family_degree(Family::Z)?,
            c.family_degree(Family::ZBar)? + l.degree(m, DiffFamily::DZBar) as i32,
        ])
    }

    /// Every coefficient homogeneous under the given grading (generators
    /// excluded); returns the distinct weights found.
    pub fn coefficient_weights(&self, g: Grading) -> Option<Vec<i32>> {
        let mut ws: Vec<i32> = self
            .terms
            .values()
            .map(|c| c.homogeneity(g))
            .collect::<Option<_>>()?;
        ws.sort_unstable();
        ws.dedup();
        Some(ws)
    }

    /// `Ω = δ_ζ(dζ_0 ∧ … ∧ dζ_N) = Σ_j (−1)^j ζ_j dζ_0∧…∧\hat{dζ_j}∧…∧dζ_N`.
    pub fn omega(n: usize) -> Self {
        let l = GenLayout::new(n);
        let full = l.family_mask(DiffFamily::DZeta);
        Self::term(n, full, RationalFn::one()).contract(&VectorField::euler(n, DiffFamily::DZeta))
    }

    /// The form `ϑ` with `ϑ ∧ Ω` equal to the dζ-degree-`N` part.
    pub fn theta(&self) -> Result<Self> {
        let n = self.n();
        let l = self.layout;
        let top = self.extract(n as u32, None, None);
        let mut th = Self::zero(n);
        let missing0 = l.family_mask(DiffFamily::DZeta) & !l.bit(DiffFamily::DZeta, 0);
        let zeta0 = RationalFn::var(Var::zeta(0));
        for (m, c) in &top.terms {
            if m & l.family_mask(DiffFamily::DZeta) != missing0 {
                continue;
            }
            let g = m & !missing0;
            let sign = if (g.count_ones() as usize * n).is_multiple_of(2) { 1 } else { -1 };
            let q = c.div(&zeta0)?;
            th.add_term(g, if sign < 0 { -q } else { q });
        }
        let check = &th.wedge(&Self::omega(n)) - &top;
        if !check.is_zero() {
            return Err(Error::NotOmegaDivisible);
        }
        th.bundle = self.bundle.map(|(a, b)| (a - n as i32, b));
        Ok(th)
    }

    pub fn eval(&self, pt: &Point) -> Result<Multivector> {
        let mut mv = Multivector::zero(self.n());
        for (m, c) in &self.terms {
            mv.add(*m, c.evaluate(pt)?);
        }
        Ok(mv)
    }

    pub fn eval_with_floor(&self, pt: &Point, floor: f64) -> Result<Multivector> {
        let mut mv = Multivector::zero(self.n());
        for (m, c) in &self.terms {
            mv.add(*m, c.evaluate_with_floor(pt, floor)?);
        }
        Ok(mv)
    }

    pub fn mask_name(&self, m: u64) -> String {
        if m == 0 {
            return "1".into();
        }
        self.layout
            .names(m)
            .into_iter()
            .map(|(f, j)| format!("{}{j}", f.symbol()))
            .collect::<Vec<_>>()
            .join("∧")
    }

    /// True when every term's mask has the same total degree parity.
    pub fn parity(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|m| m.count_ones() % 2);
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    /// Restriction to the diagonal `z = ζ`, `z̄ = ζ̄`.
    pub fn restrict_diagonal(&self) -> Result<Self> {
        let mut b = HashMap::new();
        for j in 0..=self.n() {
            b.insert(Var::z(j), RationalFn::var(Var::zeta(j)));
            b.insert(Var::z_bar(j), RationalFn::var(Var::zeta_bar(j)));
        }
        self.substitute(&b)
    }

    pub fn multiply_poly(&self, p: &MultiPoly) -> Self {
        self.scale(&RationalFn::from(p.clone()))
    }
}

impl PartialEq for FormExpr {
    fn eq(&self, o: &Self) -> bool {
        self.layout == o.layout && (self - o).is_zero()
    }
}

impl<'a> Add<&'a FormExpr> for &'a FormExpr {
    type Output = FormExpr;
    fn add(self, o: &FormExpr) -> FormExpr {
        self.check_layout(o);
        let mut out = self.clone();
        out.bundle = FormExpr::merged_bundle(self, o);
        for (m, c) in &o.terms {
            out.add_term(*m, c.clone());
        }
        out
    }
}

impl<'a> Sub<&'a FormExpr> for &'a FormExpr {
    type Output = FormExpr;
    fn sub(self, o: &FormExpr) -> FormExpr {
        self + &(-o)
    }
}

impl Neg for &FormExpr {
    type Output = FormExpr;
    fn neg(self) -> FormExpr {
        FormExpr {
            layout: self.layout,
            terms: self.terms.iter().map(|(m, c)| (*m, -c)).collect(),
            bundle: self.bundle,
        }
    }
}

impl fmt::Display for FormExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if *m == 0 {
                write!(f, "[{c}]")?;
            } else {
                write!(f, "[{c}] {}", self.mask_name(*m))?;
            }
        }
        Ok(())
    }
}

/// Numeric value of a generator mask at a point: used by tests comparing
/// symbolic and numeric contraction.
pub fn eval_field(v: &VectorField, pt: &Point) -> Result<Vec<Complex64>> {
    v.comps.iter().map(|c| c.evaluate(pt)).collect()
}
