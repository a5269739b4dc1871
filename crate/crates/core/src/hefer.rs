//! Hefer decompositions, the `τ*` substitution, Koszul Hefer forms, the
//! minimal-norm section `σ` and the degree bookkeeping.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{Family, Grading, Monomial, MultiPoly, Point, RationalFn, Var};
use crate::error::{Error, Result};
use crate::forms::{DiffFamily, FormExpr};
use crate::weights::{alpha_power_form, build_gamma, norm2, GammaVariant};

/// Components `h_ℓ(w, z)` with `2πi Σ_ℓ h_ℓ (w_ℓ − z_ℓ) = f(w) − f(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeferScalar {
    pub n: usize,
    pub f: MultiPoly,
    pub degree: u32,
    pub h: Vec<MultiPoly>,
}

fn rename(p: &MultiPoly, from: Family, to: Family) -> MultiPoly {
    MultiPoly::from_terms(p.terms().map(|(m, c)| {
        let m2 = Monomial::from_pairs(
            m.pi_exp(),
            m.vars().map(|(v, e)| {
                if v.family == from {
                    (Var::new(to, v.index()), e)
                } else {
                    (v, e)
                }
            }),
        );
        (m2, c.clone())
    }))
}

/// `p` with ζ renamed to `w`.
pub fn in_w(p: &MultiPoly) -> MultiPoly {
    rename(p, Family::Zeta, Family::W)
}

/// `p` with ζ renamed to `z`.
pub fn in_z(p: &MultiPoly) -> MultiPoly {
    rename(p, Family::Zeta, Family::Z)
}

/// Degree of a polynomial in the ζ variables only, if it is homogeneous and
/// involves nothing else.
pub fn zeta_degree(f: &MultiPoly) -> Result<u32> {
    if f.is_zero() {
        return Err(Error::InvalidInput("zero polynomial".into()));
    }
    if f.variables().iter().any(|v| v.family != Family::Zeta)
        || f.terms().any(|(m, _)| m.pi_exp() != 0)
    {
        return Err(Error::InvalidInput(
            "polynomial must involve only ζ variables".into(),
        ));
    }
    f.homogeneity(Grading::Family(Family::Zeta))
        .map(|d| d as u32)
        .ok_or(Error::Inhomogeneous)
}

impl HeferScalar {
    /// Residual `f(w) − f(z) − 2πi Σ h_ℓ (w_ℓ − z_ℓ)`.
    pub fn identity_residual(&self) -> MultiPoly {
        let mut acc = &in_w(&self.f) - &in_z(&self.f);
        for (l, h) in self.h.iter().enumerate() {
            let diff = &MultiPoly::var(Var::w(l)) - &MultiPoly::var(Var::z(l));
            acc -= &(&(h * &diff) * &MultiPoly::pi(1));
        }
        acc
    }

    /// Builds from given components after checking the identity exactly.
    pub fn from_components(n: usize, f: MultiPoly, h: Vec<MultiPoly>) -> Result<Self> {
        let degree = zeta_degree(&f)?;
        if h.len() != n + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} Hefer components",
                n + 1
            )));
        }
        let s = Self { n, f, degree, h };
        if !s.identity_residual().is_zero() {
            return Err(Error::InvalidInput(
                "Hefer identity fails for the supplied components".into(),
            ));
        }
        Ok(s)
    }

    /// `h̃ = Σ h_ℓ dw_ℓ`.
    pub fn as_form(&self) -> FormExpr {
        let coeffs: Vec<RationalFn> = self.h.iter().map(|h| h.clone().into()).collect();
        FormExpr::one_form(self.n, DiffFamily::DW, &coeffs)
    }

    /// The negated decomposition, a Hefer form for `−f`.
    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            f: -&self.f,
            degree: self.degree,
            h: self.h.iter().map(|h| -h).collect(),
        }
    }
}

/// Telescoping decomposition in ascending variable order: the `ℓ`-th bracket
/// `f(z_{<ℓ}, w_{≥ℓ}) − f(z_{≤ℓ}, w_{>ℓ})` is divided exactly by `w_ℓ − z_ℓ`.
pub fn hefer_decompose(f: &MultiPoly, n: usize) -> Result<HeferScalar> {
    let degree = zeta_degree(f)?;
    if degree == 0 {
        return Err(Error::InvalidInput("degree must be at least 1".into()));
    }
    if f.variables().iter().any(|v| v.index() > n) {
        return Err(Error::InvalidInput(format!("variable index exceeds N = {n}")));
    }
    let mut h = vec![MultiPoly::zero(); n + 1];
    for (m, c) in f.terms() {
        for (l, hl) in h.iter_mut().enumerate() {
            let a = m.exp(Var::zeta(l));
            if a == 0 {
                continue;
            }
            let mut rest = Monomial::pi(-1);
            for (v, e) in m.vars() {
                let k = v.index();
                if k < l {
                    rest = rest.mul(&Monomial::var(Var::z(k), e));
                } else if k > l {
                    rest = rest.mul(&Monomial::var(Var::w(k), e));
                }
            }
            for i in 0..a {
                let q = Monomial::var(Var::w(l), i).mul(&Monomial::var(Var::z(l), a - 1 - i));
                hl.add_term(rest.mul(&q), c.clone());
            }
        }
    }
    let s = HeferScalar {
        n,
        f: f.clone(),
        degree,
        h,
    };
    assert!(
        s.identity_residual().is_zero(),
        "telescoping division must be exact"
    );
    Ok(s)
}

/// `(1/2πi) Σ_j (z_j² + z_j w_j + w_j²) dw_j` for the Fermat cubic.
pub fn fermat_displayed() -> HeferScalar {
    let mut h = Vec::new();
    let mut f = MultiPoly::zero();
    for j in 0..=2 {
        let (z, w) = (MultiPoly::var(Var::z(j)), MultiPoly::var(Var::w(j)));
        let q = &(&(&z * &z) + &(&z * &w)) + &(&w * &w);
        h.push(&q * &MultiPoly::pi(-1));
        f = &f + &MultiPoly::var(Var::zeta(j)).pow(3);
    }
    HeferScalar::from_components(2, f, h).expect("Fermat display satisfies the identity")
}

/// The cusp `ζ1³ − ζ2²ζ0`.
pub fn cusp_polynomial() -> MultiPoly {
    &MultiPoly::var(Var::zeta(1)).pow(3)
        - &(&MultiPoly::var(Var::zeta(2)).pow(2) * &MultiPoly::var(Var::zeta(0)))
}

/// Components of `2πi h̃ = z2² dw0 − (z1² + z1w1 + w1²) dw1 + (z2 + w2) w0 dw2`.
pub fn cusp_displayed_components() -> Vec<MultiPoly> {
    let v = |x: Var| MultiPoly::var(x);
    let p = MultiPoly::pi(-1);
    vec![
        &v(Var::z(2)).pow(2) * &p,
        &-(&(&v(Var::z(1)).pow(2) + &(&v(Var::z(1)) * &v(Var::w(1)))) + &v(Var::w(1)).pow(2)) * &p,
        &(&(&v(Var::z(2)) + &v(Var::w(2))) * &v(Var::w(0))) * &p,
    ]
}

/// A named Hefer variant for the cusp together with the polynomial whose
/// identity it satisfies.
#[derive(Clone, Debug)]
pub struct CuspVariant {
    pub name: &'static str,
    pub hefer: HeferScalar,
    pub satisfies_for_f: bool,
}

/// Both stored cusp variants: the telescoping decomposition of `f`, and the
/// displayed components, which satisfy the identity for `−f`.
pub fn cusp_variants() -> Vec<CuspVariant> {
    let f = cusp_polynomial();
    let tele = hefer_decompose(&f, 2).unwrap();
    let shown = cusp_displayed_components();
    let for_f = HeferScalar::from_components(2, f.clone(), shown.clone());
    let displayed = match for_f {
        Ok(h) => CuspVariant {
            name: "displayed",
            hefer: h,
            satisfies_for_f: true,
        },
        Err(_) => CuspVariant {
            name: "displayed",
            hefer: HeferScalar::from_components(2, -&f, shown)
                .expect("displayed cusp form satisfies the identity for −f"),
            satisfies_for_f: false,
        },
    };
    vec![
        CuspVariant {
            name: "telescoping",
            hefer: tele,
            satisfies_for_f: true,
        },
        displayed,
    ]
}

/// `τ*` of a polynomial in `(w, z)`: `w ↦ αζ` with `α` the full even form,
/// expanded by `w`-degree.
pub fn tau_star_scalar(p: &MultiPoly, n: usize) -> FormExpr {
    let mut by_degree: BTreeMap<u32, MultiPoly> = BTreeMap::new();
    for (m, c) in p.terms() {
        let k = m.degree(Family::W);
        by_degree
            .entry(k)
            .or_default()
            .add_term(m.clone(), c.clone());
    }
    let mut out = FormExpr::zero(n);
    for (k, q) in by_degree {
        let q_zeta = rename(&q, Family::W, Family::Zeta);
        let ak = alpha_power_form(n, k);
        out = &out + &ak.scale(&q_zeta.into());
    }
    out
}

/// `τ*h̃ = Σ_ℓ h_ℓ(αζ, z) ∧ γ^α_ℓ`, a projective form with bundle `(0, d)`.
pub fn tau_star(h: &HeferScalar) -> FormExpr {
    let n = h.n;
    let mut out = FormExpr::zero(n);
    for (l, hl) in h.h.iter().enumerate() {
        if hl.is_zero() {
            continue;
        }
        let g = build_gamma(n, GammaVariant::Alpha, l).without_bundle();
        out = &out + &tau_star_scalar(hl, n).wedge_bounded(&g, n);
    }
    out.with_bundle((0, h.degree as i32))
}

/// `τ*(2πi δ_{z−w} h̃) = f(z) − α^d f(ζ)`, the exact value of `∇_η τ*h̃`.
pub fn tau_star_naturality_target(h: &HeferScalar) -> FormExpr {
    let diff = &in_z(&h.f) - &in_w(&h.f);
    tau_star_scalar(&diff, h.n)
}

/// Residual `∇_η τ*h̃ − τ*(2πi δ_{z−w} h̃)`.
pub fn tau_star_naturality_residual(h: &HeferScalar) -> FormExpr {
    &tau_star(h).nabla_eta() - &tau_star_naturality_target(h)
}

/// Complete-intersection data for the Koszul complex of `f_1, …, f_p`.
#[derive(Clone, Debug)]
pub struct KoszulData {
    pub n: usize,
    pub fs: Vec<MultiPoly>,
    pub degrees: Vec<u32>,
    /// Fiber variables for the Jacobian minor (one per equation).
    pub a_field: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeLedger {
    pub kappa0: i64,
    pub kappa: i64,
    pub kappa_q: i64,
    pub reg: i64,
    pub threshold: i64,
    pub solvable: bool,
}

impl KoszulData {
    pub fn new(n: usize, fs: Vec<MultiPoly>) -> Result<Self> {
        if fs.is_empty() || fs.len() > n {
            return Err(Error::UnsupportedRank(format!(
                "need 1 ≤ p ≤ N, got p = {} with N = {n}",
                fs.len()
            )));
        }
        let degrees = fs.iter().map(zeta_degree).collect::<Result<Vec<_>>>()?;
        let a_field = (0..fs.len()).map(|k| n - k).collect();
        Ok(Self {
            n,
            fs,
            degrees,
            a_field,
        })
    }

    pub fn p(&self) -> usize {
        self.fs.len()
    }

    pub fn kappa0(&self) -> i64 {
        self.degrees.iter().map(|&d| d as i64).sum()
    }

    /// `κ(s) = s + N − Σ d^j`.
    pub fn kappa(&self, s: i64) -> i64 {
        s + self.n as i64 - self.kappa0()
    }

    /// Largest Koszul degree `d_ℓ` (sum of `ℓ` of the `d^j`) with
    /// `ℓ ≤ min(N − q, p)`.
    pub fn kappa_q(&self, q: usize) -> i64 {
        let lmax = self.p().min(self.n.saturating_sub(q));
        let mut ds: Vec<i64> = self.degrees.iter().map(|&d| d as i64).collect();
        ds.sort_unstable_by(|a, b| b.cmp(a));
        ds.iter().take(lmax).sum()
    }

    /// `reg X = Σ (d^j − 1) + 1`.
    pub fn reg(&self) -> i64 {
        self.degrees.iter().map(|&d| d as i64 - 1).sum::<i64>() + 1
    }

    pub fn degree_ledger(&self, s: i64, q: usize) -> DegreeLedger {
        let threshold = self.kappa0() - self.n as i64;
        DegreeLedger {
            kappa0: self.kappa0(),
            kappa: self.kappa(s),
            kappa_q: self.kappa_q(q),
            reg: self.reg(),
            threshold,
            solvable: s >= threshold,
        }
    }

    /// `σ_j = conj(f_j)/|ζ|^{2d_j} / ‖f‖²` as rational functions.
    pub fn sigma_symbolic(&self) -> Vec<RationalFn> {
        let n2 = norm2(Family::Zeta, self.n);
        let parts: Vec<RationalFn> = self
            .fs
            .iter()
            .zip(&self.degrees)
            .map(|(f, &d)| RationalFn::new(f.conjugate(), &n2.pow(d)).unwrap())
            .collect();
        let total = self
            .fs
            .iter()
            .zip(&parts)
            .fold(RationalFn::zero(), |acc, (f, c)| &acc + &c.mul_poly(f));
        parts.iter().map(|c| c.div(&total).unwrap()).collect()
    }

    /// Numeric `σ` at `ζ`; errors on `X`.
    pub fn eval_sigma(&self, zeta: &[Complex64]) -> Result<Vec<Complex64>> {
        let pt = Point::zeta_z(zeta, &[]);
        let n2: f64 = zeta.iter().map(|c| c.norm_sqr()).sum();
        let vals: Vec<Complex64> = self
            .fs
            .iter()
            .map(|f| f.evaluate(&pt))
            .collect::<Result<_>>()?;
        let scaled: Vec<Complex64> = vals
            .iter()
            .zip(&self.degrees)
            .map(|(v, &d)| v.conj() / n2.powi(d as i32))
            .collect();
        let norm: f64 = vals
            .iter()
            .zip(&scaled)
            .map(|(v, s)| (v * s).re)
            .sum();
        if norm.sqrt() < 1e-12 {
            return Err(Error::PointOnX);
        }
        Ok(scaled.into_iter().map(|s| s / norm).collect())
    }

    fn koszul_hefer_scalars(&self) -> Vec<HeferScalar> {
        self.fs
            .iter()
            .map(|f| hefer_decompose(f, self.n).expect("validated"))
            .collect()
    }

    /// Koszul Hefer forms `H^0_J` for `|J| ≤ p` and `H^1_1`.
    pub fn koszul_hefer(&self) -> KoszulHefer {
        let n = self.n;
        let k0 = self.kappa0() as u32;
        let hh: Vec<FormExpr> = self
            .koszul_hefer_scalars()
            .iter()
            .map(|h| -&tau_star(h))
            .collect();
        let p = self.p();
        let mut h0 = BTreeMap::new();
        for mask in 1u32..(1 << p) {
            let idx: Vec<usize> = (0..p).filter(|i| mask >> i & 1 == 1).collect();
            let k = idx.len();
            let dj: u32 = idx.iter().map(|&i| self.degrees[i]).sum();
            let mut acc = alpha_power_form(n, k0 - dj);
            for &i in &idx {
                acc = acc.wedge_bounded(&hh[i], n);
            }
            if (k * (k - 1) / 2) % 2 == 1 {
                acc = -&acc;
            }
            h0.insert(idx, acc);
        }
        let h1 = self
            .degrees
            .iter()
            .map(|&d| alpha_power_form(n, k0 - d))
            .collect();
        KoszulHefer {
            kappa0: k0,
            h0,
            h1_1: h1,
            h00: alpha_power_form(n, k0),
        }
    }
}

/// Assembled Koszul Hefer forms. `h0[J]` maps `e_J` to `E_0`; `h1_1[j]` is
/// the diagonal entry of `H^1_1` on `e_j`.
#[derive(Clone, Debug)]
pub struct KoszulHefer {
    pub kappa0: u32,
    pub h00: FormExpr,
    pub h0: BTreeMap<Vec<usize>, FormExpr>,
    pub h1_1: Vec<FormExpr>,
}

impl KoszulHefer {
    pub fn component(&self, j: &[usize]) -> Result<&FormExpr> {
        self.h0
            .get(j)
            .ok_or_else(|| Error::UnsupportedRank(format!("no component {j:?}")))
    }

    /// Residual of `∇_η H^0_j = H^0_0 f_j(ζ) − f_j(z) H^1_j` at `(k, ℓ) = (1, 0)`.
    pub fn hrel_residual(&self, data: &KoszulData, j: usize) -> Result<FormExpr> {
        let h = self.component(&[j])?;
        let fz: RationalFn = in_z(&data.fs[j]).into();
        let fzeta: RationalFn = data.fs[j].clone().into();
        let rhs = &self.h00.scale(&fzeta) - &self.h1_1[j].scale(&fz);
        Ok(&h.nabla_eta() - &rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_poly, Universe};

    fn poly(s: &str) -> MultiPoly {
        parse_poly(s, Universe::new(3)).unwrap()
    }

    #[test]
    fn fermat_matches_display() {
        let f = poly("zeta0^3 + zeta1^3 + zeta2^3");
        assert_eq!(hefer_decompose(&f, 2).unwrap(), fermat_displayed());
    }

    #[test]
    fn product_of_two() {
        let h = hefer_decompose(&poly("zeta0*zeta1"), 2).unwrap();
        assert_eq!(h.h[0], &poly("w1") * &MultiPoly::pi(-1));
        assert_eq!(h.h[1], &poly("z0") * &MultiPoly::pi(-1));
        assert!(h.h[2].is_zero());
    }

    #[test]
    fn cusp_variants_signs() {
        let v = cusp_variants();
        assert!(v[0].satisfies_for_f);
        assert!(!v[1].satisfies_for_f);
        assert!(v[1].hefer.identity_residual().is_zero());
        assert_eq!(v[1].hefer.f, -&cusp_polynomial());
    }

    #[test]
    fn ledger_plane_cubic() {
        let d = KoszulData::new(2, vec![poly("zeta0^3 + zeta1^3 + zeta2^3")]).unwrap();
        let l = d.degree_ledger(1, 0);
        assert_eq!((l.kappa0, l.kappa, l.reg, l.threshold), (3, 0, 3, 1));
        assert!(l.solvable);
        assert!(!d.degree_ledger(0, 0).solvable);
    }

    #[test]
    fn sigma_at_base_point() {
        let d = KoszulData::new(2, vec![poly("zeta0^3 + zeta1^3 + zeta2^3")]).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let s = d.eval_sigma(&[one, zero, zero]).unwrap();
        assert!((s[0] - one).norm() < 1e-15);
        let w = Complex64::from_polar(1.0, std::f64::consts::PI / 3.0);
        assert_eq!(d.eval_sigma(&[one, w, zero]), Err(Error::PointOnX));
    }

    #[test]
    fn tau_star_fermat() {
        let h = fermat_displayed();
        let t = tau_star(&h);
        let pr = t.is_projective();
        assert!(pr.projective, "{:?}", pr.failures);
        assert_eq!(pr.bundle, Some((0, 3)));
        assert!(tau_star_naturality_residual(&h).is_zero());
    }

    #[test]
    fn hefer_relation_plane_curves() {
        for f in ["zeta0^3 + zeta1^3 + zeta2^3", "zeta1^3 - zeta2^2*zeta0"] {
            let d = KoszulData::new(2, vec![poly(f)]).unwrap();
            let kh = d.koszul_hefer();
            assert!(kh.hrel_residual(&d, 0).unwrap().is_zero(), "{f}");
        }
    }
}
