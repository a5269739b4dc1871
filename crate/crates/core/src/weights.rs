//! The forms `b`, `B`, the weights `α`, `β`, the form `τ` and the two
//! γ-families, with exact verification.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::algebra::{Family, GaussianRational, MultiPoly, RationalFn, Var};
use crate::forms::{DbarFamily, DiffFamily, FormExpr, VectorField};

/// `Σ_j a_j b_j` for two variable families.
pub fn dot(a: Family, b: Family, n: usize) -> MultiPoly {
    (0..=n).fold(MultiPoly::zero(), |acc, j| {
        &acc + &(&MultiPoly::var(Var::new(a, j)) * &MultiPoly::var(Var::new(b, j)))
    })
}

/// `|v|² = Σ v_j v̄_j`.
pub fn norm2(fam: Family, n: usize) -> MultiPoly {
    dot(fam, fam.conj(), n)
}

/// `Σ_j c_j dζ_j` with `c_j` the variables of `fam`.
pub fn dzeta_pairing(fam: Family, n: usize) -> FormExpr {
    let coeffs: Vec<RationalFn> = (0..=n).map(|j| RationalFn::var(Var::new(fam, j))).collect();
    FormExpr::one_form(n, DiffFamily::DZeta, &coeffs)
}

/// `|ζ|²|z|² − |ζ̄·z|²`.
pub fn b_denominator(n: usize) -> MultiPoly {
    &(&norm2(Family::Zeta, n) * &norm2(Family::Z, n))
        - &(&dot(Family::ZetaBar, Family::Z, n) * &dot(Family::Zeta, Family::ZBar, n))
}

/// `b = (|ζ|² z̄·dζ − (z̄·ζ) ζ̄·dζ) / (2πi (|ζ|²|z|² − |ζ̄·z|²))`.
pub fn build_b(n: usize) -> FormExpr {
    let num = &dzeta_pairing(Family::ZBar, n).multiply_poly(&norm2(Family::Zeta, n))
        - &dzeta_pairing(Family::ZetaBar, n).multiply_poly(&dot(Family::ZBar, Family::Zeta, n));
    let c = RationalFn::pi(-1)
        .div_poly(&b_denominator(n))
        .expect("nonzero denominator");
    num.scale(&c).with_bundle((0, 0))
}

/// `(b, B)` with `B = Σ_{k=1}^N b ∧ (∂̄b)^{k−1}`.
pub fn build_b_big(n: usize) -> (FormExpr, FormExpr) {
    let b = build_b(n);
    let db = b.dbar(DbarFamily::Both);
    let mut big = b.clone();
    let mut term = b.clone();
    for _ in 1..n {
        term = term.wedge_bounded(&db, n);
        big = &big + &term;
    }
    (b, big)
}

/// Result of an exact weight check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub identity: String,
    pub passed: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Weight {
    pub form: FormExpr,
    pub bundle: (i32, i32),
    pub certificate: Vec<Certificate>,
}

impl Weight {
    pub fn verified(&self) -> bool {
        self.certificate.iter().all(|c| c.passed)
    }
}

fn first_term(f: &FormExpr) -> Option<String> {
    f.terms()
        .next()
        .map(|(m, c)| format!("{} · {}", f.mask_name(m), c))
}

/// Checks `∇_η g = 0` and `g₀,₀ = 1` on the diagonal. Failures carry a
/// witness term; the first failing identity comes first.
pub fn verify_weight(g: &FormExpr, bundle: (i32, i32)) -> Vec<Certificate> {
    let mut out = Vec::new();
    let ng = g.nabla_eta();
    out.push(Certificate {
        identity: "∇_η g = 0".into(),
        passed: ng.is_zero(),
        witness: first_term(&ng),
    });
    let g00 = FormExpr::scalar(g.n(), g.scalar_part());
    let diag = g00
        .restrict_diagonal()
        .map(|d| &d - &FormExpr::one(g.n()));
    out.push(match diag {
        Ok(d) => Certificate {
            identity: "g₀,₀|Δ = 1".into(),
            passed: d.is_zero(),
            witness: first_term(&d),
        },
        Err(e) => Certificate {
            identity: "g₀,₀|Δ = 1".into(),
            passed: false,
            witness: Some(e.to_string()),
        },
    });
    let proj = g.is_projective();
    let bundle_ok = proj.projective && proj.bundle == Some(bundle);
    out.push(Certificate {
        identity: format!("projective with bundle {bundle:?}"),
        passed: bundle_ok,
        witness: if bundle_ok {
            None
        } else {
            Some(
                proj.failures
                    .first()
                    .cloned()
                    .unwrap_or_else(|| format!("bundle {:?}", proj.bundle)),
            )
        },
    });
    out
}

fn binomial(n: u32, k: u32) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// `α₀,₀ = z·ζ̄/|ζ|²`.
pub fn alpha00(n: usize) -> RationalFn {
    RationalFn::new(dot(Family::Z, Family::ZetaBar, n), &norm2(Family::Zeta, n)).unwrap()
}

/// `α₁,₁ = −∂̄(ζ̄·dζ / (2πi|ζ|²))`.
pub fn alpha11(n: usize) -> FormExpr {
    let c = RationalFn::pi(-1)
        .div_poly(&norm2(Family::Zeta, n))
        .unwrap();
    -&dzeta_pairing(Family::ZetaBar, n)
        .scale(&c)
        .dbar(DbarFamily::ZetaBar)
}

/// `α^ρ = Σ_{k ≤ min(ρ, N)} C(ρ,k) α₀^{ρ−k} α₁,₁^k`.
pub fn alpha_power_form(n: usize, rho: u32) -> FormExpr {
    let a0 = alpha00(n);
    let a11 = alpha11(n);
    let mut out = FormExpr::zero(n);
    let mut a11k = FormExpr::one(n);
    for k in 0..=rho.min(n as u32) {
        if k > 0 {
            a11k = a11k.wedge_bounded(&a11, n);
        }
        let c = a0.pow(rho - k).scale(&GaussianRational::from_int(binomial(rho, k)));
        out = &out + &a11k.scale(&c);
    }
    out.with_bundle((-(rho as i32), rho as i32))
}

/// `τ = Σ_j dz̄_j ∧ dζ_j / (2πi |z|²)`.
pub fn build_tau(n: usize) -> FormExpr {
    let c = RationalFn::pi(-1).div_poly(&norm2(Family::Z, n)).unwrap();
    let mut t = FormExpr::zero(n);
    for j in 0..=n {
        let g = FormExpr::gen(n, DiffFamily::DZBar, j).wedge(&FormExpr::gen(n, DiffFamily::DZeta, j));
        t = &t + &g.scale(&c);
    }
    t.with_bundle((0, 0))
}

/// `δ_z̄τ / (1 − τ) = δ_z̄τ ∧ Σ_{k=0}^{N} τ^k`.
pub fn build_x(n: usize) -> FormExpr {
    let tau = build_tau(n);
    let dz = tau.contract(&VectorField::euler(n, DiffFamily::DZBar));
    let mut series = FormExpr::one(n).with_bundle((0, 0));
    let mut tk = FormExpr::one(n).with_bundle((0, 0));
    for _ in 1..=n {
        tk = tk.wedge(&tau);
        series = &series + &tk;
    }
    dz.wedge(&series)
}

/// `β = 2πi δ_ζ[δ_z̄τ/(1−τ)]`.
pub fn build_beta_form(n: usize) -> FormExpr {
    build_x(n)
        .contract(&VectorField::euler(n, DiffFamily::DZeta))
        .scale(&RationalFn::pi(1))
        .with_bundle((1, -1))
}

/// `β^m`.
pub fn beta_power_form(n: usize, m: u32) -> FormExpr {
    build_beta_form(n).pow(m).with_bundle((m as i32, -(m as i32)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightKind {
    Alpha,
    Beta,
}

type CacheKey = (usize, WeightKind, u32);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<Weight>>> {
    static C: OnceLock<Mutex<HashMap<CacheKey, Arc<Weight>>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(key: CacheKey, build: impl FnOnce() -> Weight) -> Arc<Weight> {
    if let Some(w) = cache().lock().unwrap().get(&key) {
        return w.clone();
    }
    let w = Arc::new(build());
    cache().lock().unwrap().entry(key).or_insert(w).clone()
}

/// `α^ρ` with its certificate.
pub fn build_alpha(n: usize, rho: u32) -> Arc<Weight> {
    cached((n, WeightKind::Alpha, rho), || {
        let form = alpha_power_form(n, rho);
        let bundle = (-(rho as i32), rho as i32);
        Weight {
            certificate: verify_weight(&form, bundle),
            form,
            bundle,
        }
    })
}

/// `β^m` with its certificate, together with `τ`.
pub fn build_beta(n: usize, m: u32) -> (Arc<Weight>, FormExpr) {
    let w = cached((n, WeightKind::Beta, m), || {
        let form = beta_power_form(n, m);
        let bundle = (m as i32, -(m as i32));
        Weight {
            certificate: verify_weight(&form, bundle),
            form,
            bundle,
        }
    });
    (w, build_tau(n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaVariant {
    Alpha,
    Beta,
}

/// `γ^α_j = dζ_j − (ζ̄·dζ/|ζ|²) ζ_j` or `γ^β_j = δ_ζ[(δ_z̄τ/(1−τ)) ∧ dζ_j]`.
pub fn build_gamma(n: usize, variant: GammaVariant, j: usize) -> FormExpr {
    assert!(j <= n);
    match variant {
        GammaVariant::Alpha => {
            let c = RationalFn::var(Var::zeta(j))
                .div_poly(&norm2(Family::Zeta, n))
                .unwrap();
            (&FormExpr::gen(n, DiffFamily::DZeta, j)
                - &dzeta_pairing(Family::ZetaBar, n).scale(&c))
                .with_bundle((0, 1))
        }
        GammaVariant::Beta => build_x(n)
            .wedge(&FormExpr::gen(n, DiffFamily::DZeta, j).with_bundle((1, 0)))
            .contract(&VectorField::euler(n, DiffFamily::DZeta))
            .with_bundle((1, 0)),
    }
}

/// The expected value of `∇_η γ_j`: `2πi(z_j − αζ_j)` or `βz_j − ζ_j`.
pub fn gamma_nabla_target(n: usize, variant: GammaVariant, j: usize) -> FormExpr {
    match variant {
        GammaVariant::Alpha => {
            let a = alpha_power_form(n, 1).scale(&RationalFn::var(Var::zeta(j)));
            (&FormExpr::scalar(n, RationalFn::var(Var::z(j))) - &a).scale(&RationalFn::pi(1))
        }
        GammaVariant::Beta => {
            let b = build_beta_form(n).scale(&RationalFn::var(Var::z(j)));
            &b - &FormExpr::scalar(n, RationalFn::var(Var::zeta(j)))
        }
    }
}

/// True if no coefficient of `f` involves ζ̄.
pub fn is_holomorphic_in_zeta(f: &FormExpr) -> bool {
    f.terms()
        .all(|(_, c)| !c.depends_on_family(Family::ZetaBar))
        && f.terms().all(|(m, _)| f.layout().degree(m, DiffFamily::DZetaBar) == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_eta_b_is_one() {
        for n in 1..=3 {
            assert_eq!(build_b(n).delta_eta(), FormExpr::one(n));
        }
    }

    #[test]
    fn big_b_identity_n1_n2() {
        for n in 1..=2 {
            let (_, big) = build_b_big(n);
            assert!((&big.nabla_eta() - &FormExpr::one(n)).is_zero(), "N = {n}");
        }
    }

    #[test]
    fn alpha_is_weight() {
        for n in 1..=2 {
            let w = build_alpha(n, 1);
            assert!(w.verified(), "{:?}", w.certificate);
        }
        assert!(build_alpha(1, 3).verified());
    }

    #[test]
    fn beta_is_weight() {
        for n in 1..=2 {
            let (w, _) = build_beta(n, 1);
            assert!(w.verified(), "{:?}", w.certificate);
            assert!(is_holomorphic_in_zeta(&w.form));
        }
    }

    #[test]
    fn gamma_identities() {
        for n in 1..=2 {
            for j in 0..=n {
                for v in [GammaVariant::Alpha, GammaVariant::Beta] {
                    let g = build_gamma(n, v, j);
                    assert!(g.is_projective().projective, "{v:?} {j}: {:?}", g.is_projective());
                    assert_eq!(g.nabla_eta(), gamma_nabla_target(n, v, j), "{v:?} j={j}");
                }
            }
        }
    }

    #[test]
    fn b_is_not_a_weight() {
        let c = verify_weight(&build_b(1), (0, 0));
        assert!(!c[0].passed);
        assert!(c[0].witness.is_some());
    }
}
