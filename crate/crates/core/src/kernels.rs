//! Explicit kernels: the plane-curve solution and projection kernels, the
//! principal/remainder split, closed-form references, ambient `P^N` kernels
//! and the general formula for curves in `P^N`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::{Family, MultiPoly, RationalFn, Var, TWO_PI_I};
use crate::curves::{pullback, Chart, CurveSample, PlaneCurve, RationalParam, SampleSource};
use crate::forms::{DiffFamily, FormExpr, GenLayout, Multivector, VectorField};
use crate::hefer::{hefer_decompose, tau_star, HeferScalar, KoszulData};
use crate::numeric::{CompiledForm, CompiledPoly, CompiledRational, Env};
use crate::weights::{alpha00, alpha_power_form, beta_power_form, build_b_big};
use crate::{Error, Result};

type C = Complex64;

fn norm2(v: &[C]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// `α₀,₀ = z·ζ̄/|ζ|²`.
pub fn alpha_value(zeta: &[C], z: &[C]) -> C {
    let s: C = z.iter().zip(zeta).map(|(a, b)| a * b.conj()).sum();
    s / norm2(zeta)
}

/// `ζ1 z0 − ζ0 z1`.
pub fn diagonal_factor(zeta: &[C], z: &[C]) -> C {
    zeta[1] * z[0] - zeta[0] * z[1]
}

/// Fiber variable used to normalize forms at `sample`.
pub fn sample_fiber(sample: &CurveSample) -> usize {
    match sample.source {
        SampleSource::Chart { fiber, .. } => fiber,
        SampleSource::Param { .. } => 2,
    }
}

fn check_fiber_derivative(sample: &CurveSample) -> Result<C> {
    let scale = sample.zeta.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    let fi = sample.fiber_derivative;
    if fi.norm() <= 1e-12 * scale || !fi.is_finite() {
        return Err(Error::FiberDerivativeVanishes);
    }
    Ok(fi)
}

/// `du`-coefficient of `(ζ0dζ1 − ζ1dζ0)/(∂f/∂ζ2)` at `sample`. On the curve
/// this equals `(ζ_a dζ_b − ζ_b dζ_a)/(∂f/∂ζ_i)` for cyclic `(i, a, b)`, which
/// is used with the fiber `i` of the sample.
pub fn residue_coefficient(sample: &CurveSample) -> Result<C> {
    let fi = check_fiber_derivative(sample)?;
    let i = sample_fiber(sample);
    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
    let (z, j) = (&sample.zeta, &sample.jacobian);
    Ok((z[a] * j[b] - z[b] * j[a]) / fi)
}

/// The plane-curve kernel `k(ζ, z) = S(ζ, z)·(ζ0dζ1 − ζ1dζ0)/(∂f/∂ζ2)` with
/// `S = α^κ [h_2(αζ, z) − (ζ̄2/|ζ|²) Σ_j h_j(αζ, z) ζ_j] / (ζ1z0 − ζ0z1)`,
/// together with the projection kernel `δ_A(α^κ ∧ τ*h̃)_2`.
#[derive(Clone, Debug)]
pub struct KernelEval {
    curve: PlaneCurve,
    hefer: HeferScalar,
    s: i64,
    kappa: u32,
    h: [CompiledPoly; 3],
    symbolic: FormExpr,
    projection: CompiledForm,
}

pub fn assemble_plane_kernel(curve: &PlaneCurve, s: i64) -> Result<KernelEval> {
    let h = hefer_decompose(curve.f(), 2)?;
    KernelEval::with_hefer(curve, s, h)
}

struct Parts {
    ak: C,
    h: [C; 3],
    sum: C,
    n2: f64,
}

impl KernelEval {
    pub fn with_hefer(curve: &PlaneCurve, s: i64, hefer: HeferScalar) -> Result<Self> {
        if hefer.f != *curve.f() || hefer.n != 2 {
            return Err(Error::InvalidInput("Hefer form does not belong to the curve".into()));
        }
        let kappa = s - curve.degree() as i64 + 2;
        if kappa < 0 {
            return Err(Error::TwistBelowThreshold(format!(
                "s = {s}, κ₀ − N = {}",
                curve.degree() as i64 - 2
            )));
        }
        let kappa = kappa as u32;
        let symbolic = alpha_power_form(2, kappa).wedge_bounded(&tau_star(&hefer), 2);
        let projection = CompiledForm::new(&symbolic.extract(2, None, None));
        let h = [0, 1, 2].map(|l| CompiledPoly::new(&hefer.h[l]));
        Ok(Self {
            curve: curve.clone(),
            hefer,
            s,
            kappa,
            h,
            symbolic,
            projection,
        })
    }

    pub fn curve(&self) -> &PlaneCurve {
        &self.curve
    }

    pub fn hefer(&self) -> &HeferScalar {
        &self.hefer
    }

    pub fn twist(&self) -> i64 {
        self.s
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// `α^κ ∧ τ*h̃` with the full weight.
    pub fn symbolic(&self) -> &FormExpr {
        &self.symbolic
    }

    /// `δ_{ζ2}(α^κ ∧ τ*h̃)_1`.
    pub fn bracket_form(&self) -> FormExpr {
        self.symbolic
            .extract(1, None, None)
            .contract(&VectorField::single(2, DiffFamily::DZeta, 2, RationalFn::one()))
    }

    fn parts(&self, zeta: &[C; 3], z: &[C; 3]) -> Parts {
        let n2 = norm2(zeta);
        let alpha = alpha_value(zeta, z);
        let w = zeta.map(|c| alpha * c);
        let mut env = Env::new();
        env.set_family(Family::W, &w).set_family(Family::Z, z);
        let h = [0, 1, 2].map(|l| self.h[l].eval(&env));
        let sum = (0..3).map(|l| h[l] * zeta[l]).sum();
        Parts {
            ak: alpha.powu(self.kappa),
            h,
            sum,
            n2,
        }
    }

    /// `S(ζ, z)`.
    pub fn scalar(&self, zeta: &[C; 3], z: &[C; 3]) -> C {
        let p = self.parts(zeta, z);
        p.ak * (p.h[2] - zeta[2].conj() / p.n2 * p.sum) / diagonal_factor(zeta, z)
    }

    /// The same kernel written with the fiber variable `i`:
    /// `α^κ [h_i − (ζ̄_i/|ζ|²) Σ h_j ζ_j] / (ζ_b z_a − ζ_a z_b)` multiplying
    /// `(ζ_a dζ_b − ζ_b dζ_a)/(∂f/∂ζ_i)`, `(i, a, b)` cyclic.
    pub fn scalar_for_fiber(&self, zeta: &[C; 3], z: &[C; 3], i: usize) -> C {
        let p = self.parts(zeta, z);
        let (a, b) = ((i + 1) % 3, (i + 2) % 3);
        p.ak * (p.h[i] - zeta[i].conj() / p.n2 * p.sum) / (zeta[b] * z[a] - zeta[a] * z[b])
    }

    /// Principal part `α^κ h_2(αζ, z)/(ζ1z0 − ζ0z1)` of `S`.
    pub fn principal(&self, zeta: &[C; 3], z: &[C; 3]) -> C {
        let p = self.parts(zeta, z);
        p.ak * p.h[2] / diagonal_factor(zeta, z)
    }

    /// `S` minus its principal part.
    pub fn remainder(&self, zeta: &[C; 3], z: &[C; 3]) -> C {
        let p = self.parts(zeta, z);
        -p.ak * zeta[2].conj() / p.n2 * p.sum / diagonal_factor(zeta, z)
    }

    /// `K` with `k = K·(ζ0dζ1 − ζ1dζ0)`.
    pub fn k_scalar(&self, zeta: &[C; 3], z: &[C; 3]) -> Result<C> {
        let f2 = self.curve.grad_at(zeta)[2];
        let scale = zeta.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        if f2.norm() <= 1e-12 * self.curve.coefficient_scale() * scale.powi(self.curve.degree() as i32 - 1) {
            return Err(Error::FiberDerivativeVanishes);
        }
        Ok(self.scalar(zeta, z) / f2)
    }

    /// `du`-coefficient of `k(·, z)` on the chart of `sample`.
    pub fn chart_kernel(&self, sample: &CurveSample, z: &[C; 3]) -> Result<C> {
        Ok(self.scalar(&sample.zeta, z) * residue_coefficient(sample)?)
    }

    /// `k(ζ, z)` as an ambient form in `dζ`.
    pub fn kernel_form(&self, zeta: &[C; 3], z: &[C; 3]) -> Result<Multivector> {
        let k = self.k_scalar(zeta, z)?;
        let l = GenLayout::new(2);
        let mut mv = Multivector::zero(2);
        mv.add(l.bit(DiffFamily::DZeta, 1), k * zeta[0]);
        mv.add(l.bit(DiffFamily::DZeta, 0), -k * zeta[1]);
        Ok(mv)
    }

    /// `δ_A(α^κ ∧ τ*h̃)_2` with `A = (2πi/(∂f/∂ζ_i)) ∂/∂ζ_i`.
    pub fn projection_form(&self, zeta: &[C; 3], z: &[C; 3], fiber: usize) -> Result<Multivector> {
        let fi = self.curve.grad_at(zeta)[fiber];
        if fi.norm() == 0.0 {
            return Err(Error::FiberDerivativeVanishes);
        }
        let mut a = [C::zero(); 3];
        a[fiber] = TWO_PI_I / fi;
        let env = Env::zeta_z(zeta, z);
        Ok(self.projection.eval(&env).contract(DiffFamily::DZeta, &a))
    }

    /// `du∧dū`-coefficient of the projection kernel on the chart of `sample`.
    pub fn projection_density(&self, sample: &CurveSample, z: &[C; 3]) -> Result<C> {
        check_fiber_derivative(sample)?;
        let mv = self.projection_form(&sample.zeta, z, sample_fiber(sample))?;
        Ok(pullback(sample, &mv)?.du_dubar)
    }

    /// `dτ`-coefficient of `k` in the chart `[1:τ]` of a parametrization.
    pub fn param_kernel(&self, param: &RationalParam, tau: C, t: C) -> Result<C> {
        let sample = param.sample(Chart::A, tau, 0);
        let z = param.point(C::one(), t);
        let z = [z[0], z[1], z[2]];
        self.chart_kernel(&sample, &z)
    }
}

/// Principal/remainder split for a smooth curve.
pub fn principal_remainder_split(curve: &PlaneCurve, s: i64) -> Result<KernelEval> {
    if !curve.is_smooth() {
        return Err(Error::NotSmooth);
    }
    assemble_plane_kernel(curve, s)
}

/// The displayed closed form of the Fermat kernel: the coefficient of
/// `ζ0dζ1 − ζ1dζ0` in
/// `α^κ/(2πi) [z2² + αz2ζ2 + α²ζ2² − (ζ̄2/|ζ|²)(Σ z_j²ζ_j + α Σ z_jζ_j²)] / ((ζ1z0 − ζ0z1) 3ζ2²)`.
pub fn fermat_display_scalar(kappa: u32, zeta: &[C; 3], z: &[C; 3]) -> C {
    let a = alpha_value(zeta, z);
    let q: C = (0..3).map(|j| z[j] * z[j] * zeta[j]).sum();
    let r: C = (0..3).map(|j| z[j] * zeta[j] * zeta[j]).sum();
    let bracket = z[2] * z[2] + a * z[2] * zeta[2] + a * a * zeta[2] * zeta[2] - zeta[2].conj() / norm2(zeta) * (q + a * r);
    a.powu(kappa) * bracket / (TWO_PI_I * diagonal_factor(zeta, z) * 3.0 * zeta[2] * zeta[2])
}

/// `k_lead(τ, t) = (1/2πi)(τ⁶ − t⁶)/((τ² − t²)(τ³ − t³)τ²)`, the `dτ`-coefficient
/// of the leading cusp kernel.
pub fn cusp_leading_reference(tau: C, t: C) -> C {
    (tau.powu(6) - t.powu(6)) / ((tau * tau - t * t) * (tau.powu(3) - t.powu(3)) * tau * tau * TWO_PI_I)
}

/// Weight used for the ambient `P^N` kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PnWeight {
    Alpha,
    Beta,
}

impl PnWeight {
    pub fn default_for(n: usize, ell: i64) -> Self {
        if ell >= -(n as i64) {
            PnWeight::Alpha
        } else {
            PnWeight::Beta
        }
    }
}

/// Koppelman kernels on `P^N` for `O(ℓ)`: `K` from `(α^{ℓ+N} ∧ B)_N` or
/// `(B ∧ β^{−N−ℓ})_N`, and `P` from `g_N`.
#[derive(Clone, Debug)]
pub struct PnKernel {
    pub n: usize,
    pub ell: i64,
    pub weight: PnWeight,
    pub g: FormExpr,
    pub solution: FormExpr,
    pub projection: FormExpr,
}

pub fn assemble_pn_kernel(n: usize, ell: i64, weight: PnWeight) -> Result<PnKernel> {
    let ni = n as i64;
    let g = match weight {
        PnWeight::Alpha if ell >= -ni => alpha_power_form(n, (ell + ni) as u32),
        PnWeight::Beta if ell <= -ni => beta_power_form(n, (-ni - ell) as u32),
        PnWeight::Alpha => {
            return Err(Error::InvalidTwist(format!("alpha weight needs ℓ ≥ −N, got ℓ = {ell}, N = {n}")))
        }
        PnWeight::Beta => {
            return Err(Error::InvalidTwist(format!("beta weight needs ℓ ≤ −N, got ℓ = {ell}, N = {n}")))
        }
    };
    let (_, big) = build_b_big(n);
    let solution = match weight {
        PnWeight::Alpha => g.wedge_bounded(&big, n),
        PnWeight::Beta => big.wedge_bounded(&g, n),
    }
    .extract(n as u32, None, None);
    let projection = g.extract(n as u32, None, None);
    Ok(PnKernel {
        n,
        ell,
        weight,
        g,
        solution,
        projection,
    })
}

impl PnKernel {
    /// The part of `K` paired with `(0, q)`-forms.
    pub fn solution_part(&self, q: usize) -> FormExpr {
        let n = self.n as u32;
        match n.checked_sub(q as u32) {
            Some(r) => self.solution.extract(n, Some(r), None),
            None => FormExpr::zero(self.n),
        }
    }

    /// The part of `g_N` paired with `(0, q)`-forms.
    pub fn projection_part(&self, q: usize) -> FormExpr {
        let n = self.n as u32;
        match n.checked_sub(q as u32) {
            Some(r) => self.projection.extract(n, Some(r), None),
            None => FormExpr::zero(self.n),
        }
    }

    pub fn projection_vanishes(&self, q: usize) -> bool {
        self.projection_part(q).is_zero()
    }

    pub fn compile(&self, q: usize) -> (CompiledForm, CompiledForm) {
        (
            CompiledForm::new(&self.solution_part(q)),
            CompiledForm::new(&self.projection_part(q)),
        )
    }
}

/// `∫_{P^N} α₁,₁^N = (−1)^N`; integrals over `P^N` are multiplied by this
/// sign so that `P 1 = 1`.
pub fn orientation_sign(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn poly_det(m: &[Vec<MultiPoly>]) -> MultiPoly {
    match m.len() {
        0 => MultiPoly::one(),
        1 => m[0][0].clone(),
        n => {
            let mut acc = MultiPoly::zero();
            for c in 0..n {
                let minor: Vec<Vec<MultiPoly>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, x)| x.clone()).collect())
                    .collect();
                let t = &m[0][c] * &poly_det(&minor);
                acc = if c % 2 == 0 { &acc + &t } else { &acc - &t };
            }
            acc
        }
    }
}

fn minor_columns(data: &KoszulData) -> Vec<usize> {
    let set: BTreeSet<usize> = data.a_field.iter().copied().collect();
    set.into_iter().collect()
}

/// Vector fields `A_j` with `df_i(A_j) = 2πi δ_ij` and the form
/// `ω′ = δ_{A_p} ⋯ δ_{A_1} Ω`.
#[derive(Clone, Debug)]
pub struct StructureFormRep {
    pub fields: Vec<VectorField>,
    pub omega_prime: FormExpr,
}

pub fn structure_form_rep(data: &KoszulData) -> Result<StructureFormRep> {
    let n = data.n;
    let p = data.p();
    let cols = minor_columns(data);
    let m: Vec<Vec<MultiPoly>> = data
        .fs
        .iter()
        .map(|f| cols.iter().map(|&c| f.differentiate(Var::zeta(c))).collect())
        .collect();
    let det = poly_det(&m);
    if det.is_zero() {
        return Err(Error::MinorDegenerate);
    }
    let mut fields = Vec::with_capacity(p);
    for j in 0..p {
        let mut comps = vec![RationalFn::zero(); n + 1];
        for (k, &c) in cols.iter().enumerate() {
            let sub: Vec<Vec<MultiPoly>> = (0..p)
                .filter(|&r| r != j)
                .map(|r| (0..p).filter(|&q| q != k).map(|q| m[r][q].clone()).collect())
                .collect();
            let mut cof = poly_det(&sub);
            if (j + k) % 2 == 1 {
                cof = -&cof;
            }
            comps[c] = RationalFn::pi(1).mul_poly(&cof).div_poly(&det)?;
        }
        fields.push(VectorField::new(DiffFamily::DZeta, comps));
    }
    let mut omega_prime = FormExpr::omega(n);
    for a in &fields {
        omega_prime = omega_prime.contract(a);
    }
    Ok(StructureFormRep { fields, omega_prime })
}

impl StructureFormRep {
    /// `df_1 ∧ ⋯ ∧ df_p ∧ δ_A(dζ_0 ∧ ⋯ ∧ dζ_N) − (2πi)^p dζ_0 ∧ ⋯ ∧ dζ_N`.
    pub fn normalization_residual(&self, data: &KoszulData) -> FormExpr {
        let n = data.n;
        let vol = FormExpr::term(n, GenLayout::new(n).family_mask(DiffFamily::DZeta), RationalFn::one());
        let mut da = vol.clone();
        for a in &self.fields {
            da = da.contract(a);
        }
        let mut lhs = FormExpr::one(n);
        for f in &data.fs {
            let partials: Vec<RationalFn> = (0..=n).map(|j| f.differentiate(Var::zeta(j)).into()).collect();
            lhs = lhs.wedge(&FormExpr::one_form(n, DiffFamily::DZeta, &partials));
        }
        let lhs = lhs.wedge(&da);
        &lhs - &vol.scale(&RationalFn::pi(data.p() as i32))
    }
}

/// The kernel `k = (1/2πi) δ_{ζ2}⋯δ_{ζN}(α^κ ∧ h)_{N−1}/(ζ1z0 − ζ0z1) · δ_AΩ`
/// for a complete-intersection curve in `P^N`.
#[derive(Clone, Debug)]
pub struct CurveKernelPn {
    data: KoszulData,
    s: i64,
    kappa: u32,
    pub contracted: RationalFn,
    compiled: CompiledRational,
    minor: Vec<Vec<CompiledPoly>>,
    cols: Vec<usize>,
    omega: CompiledForm,
}

pub fn assemble_pn_curve_kernel(data: &KoszulData, s: i64) -> Result<CurveKernelPn> {
    let n = data.n;
    let p = data.p();
    if p + 1 != n {
        return Err(Error::UnsupportedRank(format!("a curve in P^{n} needs p = N − 1 equations, got {p}")));
    }
    let kappa = data.kappa(s);
    if kappa < 0 {
        return Err(Error::TwistBelowThreshold(format!("s = {s}, κ₀ − N = {}", data.kappa0() - n as i64)));
    }
    let kh = data.koszul_hefer();
    let all: Vec<usize> = (0..p).collect();
    let h = kh.component(&all)?;
    let mut form = alpha_power_form(n, kappa as u32)
        .wedge_bounded(h, n)
        .extract(p as u32, None, None);
    for j in (2..=n).rev() {
        form = form.contract(&VectorField::single(n, DiffFamily::DZeta, j, RationalFn::one()));
    }
    if form.terms().any(|(m, _)| m != 0) {
        return Err(Error::InvalidInput("contracted kernel has residual differentials".into()));
    }
    let contracted = form.scalar_part();
    let cols = minor_columns(data);
    let minor = data
        .fs
        .iter()
        .map(|f| cols.iter().map(|&c| CompiledPoly::new(&f.differentiate(Var::zeta(c)))).collect())
        .collect();
    Ok(CurveKernelPn {
        data: data.clone(),
        s,
        kappa: kappa as u32,
        compiled: CompiledRational::new(&contracted),
        contracted,
        minor,
        cols,
        omega: CompiledForm::new(&FormExpr::omega(n)),
    })
}

impl CurveKernelPn {
    pub fn twist(&self) -> i64 {
        self.s
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn data(&self) -> &KoszulData {
        &self.data
    }

    /// `(1/2πi) δ_{ζ2}⋯δ_{ζN}(α^κ ∧ h)_{N−1}/(ζ1z0 − ζ0z1)`.
    pub fn scalar(&self, zeta: &[C], z: &[C]) -> C {
        let env = Env::zeta_z(zeta, z);
        self.compiled.eval(&env) / (TWO_PI_I * diagonal_factor(zeta, z))
    }

    /// `δ_AΩ` at `ζ` with the fields built from the Jacobian minor.
    pub fn structure_form(&self, zeta: &[C]) -> Result<Multivector> {
        let p = self.data.p();
        let mut env = Env::new();
        env.set_family(Family::Zeta, zeta);
        let m = DMatrix::from_fn(p, p, |r, c| self.minor[r][c].eval(&env));
        let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let det = m.determinant();
        if det.norm() <= 1e-12 * scale.powi(p as i32) || scale == 0.0 {
            return Err(Error::MinorDegenerate);
        }
        let inv = m.try_inverse().ok_or(Error::MinorDegenerate)?;
        let mut mv = self.omega.eval(&env);
        for j in 0..p {
            let mut comps = vec![C::zero(); self.data.n + 1];
            for (k, &c) in self.cols.iter().enumerate() {
                comps[c] = TWO_PI_I * inv[(k, j)];
            }
            mv = mv.contract(DiffFamily::DZeta, &comps);
        }
        Ok(mv)
    }

    pub fn kernel_form(&self, zeta: &[C], z: &[C]) -> Result<Multivector> {
        let k = self.scalar(zeta, z);
        let mut mv = self.structure_form(zeta)?;
        let terms: Vec<(u64, C)> = mv.terms().collect();
        mv = Multivector::zero(self.data.n);
        for (m, c) in terms {
            mv.add(m, c * k);
        }
        Ok(mv)
    }
}

/// `δ_η(α^κ ∧ B ∧ τ*h̃)_2 − (α^κ ∧ τ*h̃)_1 + α₀,₀^κ b (f(z) − α₀,₀^d f(ζ))`
/// on the part free of `dζ̄` and `dz̄`; the last term vanishes on `X × X`.
pub fn koppargruva_residual(hefer: &HeferScalar, kappa: u32) -> FormExpr {
    let n = 2;
    let ak = alpha_power_form(n, kappa).without_bundle();
    let h = tau_star(hefer).without_bundle();
    let (b, big) = build_b_big(n);
    let lhs = ak
        .wedge_bounded(&big.without_bundle(), n)
        .wedge_bounded(&h, n)
        .extract(2, Some(0), Some(0))
        .delta_eta();
    let akh = ak.wedge_bounded(&h, n).extract(1, Some(0), Some(0));
    let a0 = alpha00(n);
    let fz: RationalFn = crate::hefer::in_z(&hefer.f).into();
    let fzeta: RationalFn = hefer.f.clone().into();
    let defect = &fz - &(&a0.pow(hefer.degree) * &fzeta);
    let corr = b.without_bundle().scale(&(&a0.pow(kappa) * &defect));
    &(&lhs - &akh) + &corr
}

/// Relative defect of `M*F(λζ, μz) = λ^a μ^b F(ζ, z)`, where `M*` rescales
/// `dζ`, `dζ̄`, `dz̄` by `λ`, `λ̄`, `μ̄`.
pub fn scaling_defect(
    f: impl Fn(&[C], &[C]) -> Multivector,
    zeta: &[C],
    z: &[C],
    lambda: C,
    mu: C,
    a: i32,
    b: i32,
) -> f64 {
    let lz: Vec<C> = zeta.iter().map(|c| lambda * c).collect();
    let mz: Vec<C> = z.iter().map(|c| mu * c).collect();
    let base = f(zeta, z);
    let scaled = f(&lz, &mz);
    let layout = base.layout();
    let factor = lambda.powi(a) * mu.powi(b);
    let masks: BTreeSet<u64> = base.terms().chain(scaled.terms()).map(|(m, _)| m).collect();
    let mut diff: f64 = 0.0;
    for m in masks {
        let mut g = C::one();
        for (fam, _) in layout.names(m) {
            g *= match fam {
                DiffFamily::DZeta => lambda,
                DiffFamily::DZetaBar => lambda.conj(),
                DiffFamily::DZBar => mu.conj(),
                DiffFamily::DW => C::one(),
            };
        }
        diff = diff.max((scaled.get(m) * g - base.get(m) * factor).norm());
    }
    let size = base.max_abs() * factor.norm();
    if size == 0.0 {
        diff
    } else {
        diff / size
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_poly, Universe};
    use crate::curves::{chart_sample, GridSpec, Projection};
    use crate::hefer::{cusp_polynomial, cusp_variants, fermat_displayed};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly(s: &str, n: usize) -> MultiPoly {
        parse_poly(s, Universe { n }).unwrap()
    }

    fn fermat() -> PlaneCurve {
        PlaneCurve::new(poly("zeta0^3 + zeta1^3 + zeta2^3", 2)).unwrap()
    }

    fn rc(rng: &mut ChaCha8Rng) -> C {
        C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn fermat_point(rng: &mut ChaCha8Rng) -> [C; 3] {
        let z1 = rc(rng);
        let r = -(C::one() + z1.powu(3));
        let k = rng.gen_range(0..3) as f64;
        [C::one(), z1, r.powf(1.0 / 3.0) * C::from_polar(1.0, k * std::f64::consts::TAU / 3.0)]
    }

    fn rel(a: C, b: C) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn bracket_matches_closed_form() {
        let k = assemble_plane_kernel(&fermat(), 2).unwrap();
        let bracket = CompiledForm::new(&k.bracket_form().extract(0, Some(0), Some(0)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let zeta = [rc(&mut rng), rc(&mut rng), rc(&mut rng)];
            let z = [rc(&mut rng), rc(&mut rng), rc(&mut rng)];
            let v = bracket.eval(&Env::zeta_z(&zeta, &z)).get(0);
            let want = k.scalar(&zeta, &z) * diagonal_factor(&zeta, &z);
            assert!(rel(v, want) < 1e-12, "{v} vs {want}");
        }
    }

    #[test]
    fn fermat_matches_display() {
        let c = fermat();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in 1..=3 {
            let k = KernelEval::with_hefer(&c, s, fermat_displayed()).unwrap();
            for _ in 0..20 {
                let zeta = fermat_point(&mut rng);
                let z = [rc(&mut rng), rc(&mut rng), rc(&mut rng)];
                let got = k.k_scalar(&zeta, &z).unwrap();
                let want = fermat_display_scalar(k.kappa(), &zeta, &z);
                assert!(rel(got, want) < 1e-12, "s={s}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn split_adds_up() {
        let k = principal_remainder_split(&fermat(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zeta = fermat_point(&mut rng);
        let z = fermat_point(&mut rng);
        let sum = k.principal(&zeta, &z) + k.remainder(&zeta, &z);
        assert!(rel(sum, k.scalar(&zeta, &z)) < 1e-13);
    }

    #[test]
    fn kernel_independent_of_fiber_variable() {
        let c = fermat();
        let k = assemble_plane_kernel(&c, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = fermat_point(&mut rng);
        let grid = GridSpec::square(4);
        let mut checked = 0;
        for fiber in 0..3 {
            let s = chart_sample(&c, Projection { fiber }, Chart::A, &grid).unwrap();
            for x in &s.samples {
                let base = k.chart_kernel(x, &z).unwrap();
                let g = c.grad_at(&x.zeta);
                for i in 0..3 {
                    if g[i].norm() < 1e-3 {
                        continue;
                    }
                    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                    let w = (x.zeta[a] * x.jacobian[b] - x.zeta[b] * x.jacobian[a]) / g[i];
                    let v = k.scalar_for_fiber(&x.zeta, &z, i) * w;
                    assert!(rel(v, base) < 1e-9, "{v} vs {base}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn kernel_is_contraction_of_weighted_form() {
        let c = fermat();
        let k = assemble_plane_kernel(&c, 2).unwrap();
        let (_, big) = build_b_big(2);
        let full = alpha_power_form(2, k.kappa())
            .wedge_bounded(&big, 2)
            .wedge_bounded(&tau_star(k.hefer()), 2)
            .extract(2, Some(0), Some(0));
        let full = CompiledForm::new(&full);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = fermat_point(&mut rng);
        let s = chart_sample(&c, Projection { fiber: 2 }, Chart::A, &GridSpec::square(3)).unwrap();
        for x in &s.samples {
            let mut a = [C::zero(); 3];
            a[2] = TWO_PI_I / x.fiber_derivative;
            let mv = full.eval(&Env::zeta_z(&x.zeta, &z)).contract(DiffFamily::DZeta, &a);
            let got = pullback(x, &mv).unwrap().du;
            let want = k.chart_kernel(x, &z).unwrap();
            assert!(rel(got, want) < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn koppargruva_identity_is_exact() {
        let h = hefer_decompose(fermat().f(), 2).unwrap();
        for kappa in 0..=1 {
            assert!(koppargruva_residual(&h, kappa).is_zero());
        }
    }

    #[test]
    fn kernel_weights() {
        let c = fermat();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for s in 1..=2 {
            let k = assemble_plane_kernel(&c, s).unwrap();
            let zeta = fermat_point(&mut rng);
            let z = fermat_point(&mut rng);
            let f = |a: &[C], b: &[C]| k.kernel_form(&[a[0], a[1], a[2]], &[b[0], b[1], b[2]]).unwrap();
            let d = scaling_defect(f, &zeta, &z, C::new(0.7, 0.4), C::new(-1.1, 0.3), -(s as i32), s as i32);
            assert!(d < 1e-12, "s={s}: {d}");
            let d = scaling_defect(f, &zeta, &z, C::new(0.7, 0.4), C::new(-1.1, 0.3), -(s as i32), -(s as i32));
            assert!(d > 1e-3);
        }
    }

    #[test]
    fn twist_below_threshold() {
        assert!(matches!(assemble_plane_kernel(&fermat(), -1), Err(Error::TwistBelowThreshold(_))));
    }

    #[test]
    fn cusp_kernel_has_unit_residue() {
        let f = cusp_polynomial();
        let curve = PlaneCurve::new(f.clone()).unwrap();
        let h = cusp_variants().into_iter().find(|v| v.satisfies_for_f).unwrap().hefer;
        let k = KernelEval::with_hefer(&curve, 1, h).unwrap();
        assert_eq!(k.kappa(), 0);
        let param = RationalParam::cusp();
        let t = C::new(0.4, 0.3);
        let mut prev = f64::INFINITY;
        for e in [1e-2, 1e-3, 1e-4] {
            let tau = t + C::new(e, 0.5 * e);
            let kt = k.param_kernel(&param, tau, t).unwrap();
            let kl = cusp_leading_reference(tau, t);
            assert!(rel((tau - t) * kt * TWO_PI_I, C::one()) < 50.0 * e);
            assert!(rel((tau - t) * kl * TWO_PI_I, C::one()) < 50.0 * e);
            let d = ((tau - t) * (kt - kl)).norm();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn pn_kernel_branches() {
        let k = assemble_pn_kernel(1, 0, PnWeight::Alpha).unwrap();
        assert!(!k.projection_vanishes(0));
        assert!(k.projection_vanishes(1));
        assert!(!k.solution_part(1).is_zero());
        let k = assemble_pn_kernel(1, -2, PnWeight::Beta).unwrap();
        assert!(k.projection_vanishes(0));
        assert!(!k.projection_vanishes(1));
        assert!(matches!(assemble_pn_kernel(1, -3, PnWeight::Alpha), Err(Error::InvalidTwist(_))));
        assert!(matches!(assemble_pn_kernel(2, 0, PnWeight::Beta), Err(Error::InvalidTwist(_))));
        assert_eq!(PnWeight::default_for(2, -2), PnWeight::Alpha);
        assert_eq!(PnWeight::default_for(2, -3), PnWeight::Beta);
    }

    fn quadrics() -> KoszulData {
        KoszulData::new(
            3,
            vec![
                poly("zeta0^2 + zeta1^2 + zeta2^2 + zeta3^2", 3),
                poly("zeta0^2 + 2*zeta1^2 + 3*zeta2^2 + 4*zeta3^2", 3),
            ],
        )
        .unwrap()
    }

    fn quadric_point(rng: &mut ChaCha8Rng) -> [C; 4] {
        let (a, b) = (C::one(), rc(rng));
        // x = ζ2², y = ζ3²: x + y = −a² − b², 3x + 4y = −a² − 2b².
        let (r1, r2) = (-a * a - b * b, -a * a - 2.0 * b * b);
        let y = r2 - 3.0 * r1;
        let x = r1 - y;
        [a, b, x.sqrt(), -y.sqrt()]
    }

    #[test]
    fn structure_form_normalized() {
        let data = quadrics();
        let rep = structure_form_rep(&data).unwrap();
        assert!(rep.normalization_residual(&data).is_zero());
    }

    #[test]
    fn general_formula_reduces_to_plane_kernel() {
        let c = fermat();
        let plane = assemble_plane_kernel(&c, 2).unwrap();
        let data = KoszulData::new(2, vec![c.f().clone()]).unwrap();
        let general = assemble_pn_curve_kernel(&data, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let zeta = fermat_point(&mut rng);
            let z = fermat_point(&mut rng);
            let a = plane.kernel_form(&zeta, &z).unwrap();
            let b = general.kernel_form(&zeta, &z).unwrap();
            assert!(a.sub(&b).max_abs() < 1e-10 * a.max_abs());
        }
    }

    #[test]
    fn space_curve_kernel_weights_and_pole() {
        let data = quadrics();
        let k = assemble_pn_curve_kernel(&data, 1).unwrap();
        assert_eq!(k.kappa(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let zeta = quadric_point(&mut rng);
        let z = quadric_point(&mut rng);
        let f = |a: &[C], b: &[C]| k.kernel_form(a, b).unwrap();
        let d = scaling_defect(f, &zeta, &z, C::new(0.8, -0.2), C::new(0.5, 0.9), -1, 1);
        assert!(d < 1e-12, "{d}");
        assert!(assemble_pn_curve_kernel(&data, -2).is_err());
    }
}
