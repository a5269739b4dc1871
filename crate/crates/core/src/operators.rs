//! The integral operators `K` and `P` by quadrature on plane curves and on
//! `P¹`, residual and obstruction checks, sign calibration and reports.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{parse_rational, Family, Universe};
use crate::curves::{pullback, Chart, GridSpec, PlaneCurve, Projection};
use crate::forms::{DbarFamily, DiffFamily, FormExpr, GenLayout, Multivector};
use crate::hefer::KoszulData;
use crate::kernels::{assemble_plane_kernel, assemble_pn_kernel, orientation_sign, KernelEval, PnKernel, PnWeight};
use crate::numeric::{least_squares, CompiledForm, Env};
use crate::quadrature::{CurveGrid, LineGrid, LineSample};
use crate::{Error, Result};

type C = Complex64;

/// Sign of `K` on curves: `u = Kφ` solves `∂̄u = φ` with this sign.
pub const K_SIGN: f64 = 1.0;

/// Sign of the projection kernel `±δ_A(α^κ∧h)_N`, fixed by
/// [`koppelman_selftest`].
pub const GLOBAL_SIGN: f64 = -1.0;

pub type NumericForm = Arc<dyn Fn(&[C]) -> Multivector + Send + Sync>;

#[derive(Clone)]
enum SectionData {
    Symbolic { form: FormExpr, compiled: CompiledForm },
    Numeric(NumericForm),
}

/// A `(0, q)`-form with values in `O(s)`, represented on the cone.
#[derive(Clone)]
pub struct SectionRep {
    pub n: usize,
    pub q: usize,
    pub twist: i64,
    pub holomorphic: bool,
    pub dbar_closed: bool,
    data: SectionData,
}

impl std::fmt::Debug for SectionRep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.data {
            SectionData::Symbolic { form, .. } => format!("{form:?}"),
            SectionData::Numeric(_) => "numeric".into(),
        };
        f.debug_struct("SectionRep")
            .field("n", &self.n)
            .field("q", &self.q)
            .field("twist", &self.twist)
            .field("data", &kind)
            .finish()
    }
}

impl SectionRep {
    /// Validates a form in `dζ̄` only: it must be projective.
    pub fn symbolic(form: FormExpr) -> Result<Self> {
        let n = form.n();
        let l = GenLayout::new(n);
        let mut q = None;
        for (m, _) in form.terms() {
            if m & !l.family_mask(DiffFamily::DZetaBar) != 0 {
                return Err(Error::InvalidInput("section representatives take dζ̄ generators only".into()));
            }
            let d = l.degree(m, DiffFamily::DZetaBar) as usize;
            if *q.get_or_insert(d) != d {
                return Err(Error::InvalidInput("section representative of mixed degree".into()));
            }
        }
        let pr = form.is_projective();
        if !pr.projective {
            return Err(Error::InvalidInput(format!("not a projective form: {}", pr.failures.join("; "))));
        }
        let twist = pr.bundle.map_or(0, |b| i64::from(b.0));
        let q = q.unwrap_or(0);
        Ok(Self::from_form(form, q, twist))
    }

    fn from_form(form: FormExpr, q: usize, twist: i64) -> Self {
        let holomorphic = q == 0 && form.terms().all(|(_, c)| !c.depends_on_family(Family::ZetaBar));
        let dbar_closed = form.dbar(DbarFamily::ZetaBar).is_zero();
        Self {
            n: form.n(),
            q,
            twist,
            holomorphic,
            dbar_closed,
            data: SectionData::Symbolic {
                compiled: CompiledForm::new(&form),
                form,
            },
        }
    }

    /// A function `ψ(ζ, ζ̄)` given as a rational expression.
    pub fn parse_function(expr: &str, n: usize) -> Result<Self> {
        let r = parse_rational(expr, Universe { n })?;
        Self::symbolic(FormExpr::scalar(n, r))
    }

    pub fn numeric(n: usize, q: usize, twist: i64, f: NumericForm) -> Self {
        Self {
            n,
            q,
            twist,
            holomorphic: false,
            dbar_closed: false,
            data: SectionData::Numeric(f),
        }
    }

    pub fn zero(n: usize, q: usize, twist: i64) -> Self {
        let mut z = Self::from_form(FormExpr::zero(n), q, twist);
        z.holomorphic = q == 0;
        z
    }

    pub fn form(&self) -> Option<&FormExpr> {
        match &self.data {
            SectionData::Symbolic { form, .. } => Some(form),
            SectionData::Numeric(_) => None,
        }
    }

    /// `∂̄` of a symbolic representative.
    pub fn dbar(&self) -> Result<Self> {
        let form = self
            .form()
            .ok_or_else(|| Error::InvalidInput("∂̄ needs a symbolic representative".into()))?;
        let mut d = Self::from_form(form.dbar(DbarFamily::ZetaBar), self.q + 1, self.twist);
        d.dbar_closed = true;
        Ok(d)
    }

    pub fn scaled(&self, c: C) -> Self {
        let inner = self.clone();
        let f: NumericForm = Arc::new(move |z: &[C]| {
            let v = inner.eval(z);
            let mut out = Multivector::zero(v.layout().n);
            for (m, x) in v.terms() {
                out.add(m, c * x);
            }
            out
        });
        Self {
            data: SectionData::Numeric(f),
            ..self.clone()
        }
    }

    pub fn eval(&self, zeta: &[C]) -> Multivector {
        match &self.data {
            SectionData::Symbolic { compiled, .. } => {
                let mut env = Env::new();
                env.set_family(Family::Zeta, zeta);
                compiled.eval(&env)
            }
            SectionData::Numeric(f) => f(zeta),
        }
    }

    /// Scalar value of a `(0,0)` representative.
    pub fn value(&self, zeta: &[C]) -> C {
        self.eval(zeta).get(0)
    }
}

/// Integral operators on a smooth plane curve.
pub struct CurveOperators {
    pub kernel: KernelEval,
    pub grid: CurveGrid,
}

fn finite(v: C) -> Result<C> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::FiberDerivativeVanishes)
    }
}

impl CurveOperators {
    pub fn new(curve: &PlaneCurve, s: i64, spec: GridSpec) -> Result<Self> {
        let kernel = assemble_plane_kernel(curve, s)?;
        let grid = CurveGrid::new(curve, spec)?;
        Ok(Self { kernel, grid })
    }

    pub fn curve(&self) -> &PlaneCurve {
        self.kernel.curve()
    }

    fn check_twist(&self, phi: &SectionRep) -> Result<()> {
        if phi.twist != self.kernel.twist() {
            return Err(Error::InvalidInput(format!(
                "section has twist {}, operator expects {}",
                phi.twist,
                self.kernel.twist()
            )));
        }
        Ok(())
    }

    /// `Kφ(z) = ∫_X k(ζ, z) ∧ φ(ζ)` for a `(0,1)` input and `z ∈ X`.
    pub fn apply_k(&self, phi: &SectionRep, z: &[C; 3]) -> Result<C> {
        self.check_twist(phi)?;
        if phi.q != 1 {
            return Err(Error::InvalidInput(format!("K on a curve takes (0,1)-forms, got q = {}", phi.q)));
        }
        let patch = self.grid.patch(self.curve(), z)?;
        let v = self.grid.integrate(Some(&patch), 1, |s| {
            let k = self.kernel.chart_kernel(s, z);
            let f = pullback(s, &phi.eval(&s.zeta));
            match (k, f) {
                (Ok(k), Ok(f)) => vec![k * f.dubar],
                _ => vec![C::new(f64::NAN, 0.0)],
            }
        })[0];
        finite(K_SIGN * v)
    }

    /// `Pφ(z)` with an explicit sign; `z` may lie off the curve.
    pub fn apply_p_signed(&self, phi: &SectionRep, z: &[C; 3], sign: f64) -> Result<C> {
        self.check_twist(phi)?;
        if phi.q >= 1 {
            // The projection kernel carries no dz̄, so it pairs with functions only.
            return Ok(C::zero());
        }
        let v = self.grid.integrate(None, 1, |s| match self.kernel.projection_density(s, z) {
            Ok(p) => vec![p * phi.value(&s.zeta)],
            Err(_) => vec![C::new(f64::NAN, 0.0)],
        })[0];
        finite(sign * v)
    }

    pub fn apply_p(&self, phi: &SectionRep, z: &[C; 3]) -> Result<C> {
        self.apply_p_signed(phi, z, GLOBAL_SIGN)
    }
}

/// A target point on a curve, in chart A of the fiber projection.
#[derive(Clone, Debug)]
pub struct CurveTarget {
    pub t: C,
    pub sheet: usize,
    pub zeta: [C; 3],
}

/// `count` deterministic targets `t = 0.45 e^{iθ_k}` on varying sheets.
pub fn curve_targets(curve: &PlaneCurve, count: usize) -> Result<Vec<CurveTarget>> {
    let p = Projection { fiber: curve.fiber() };
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let th = std::f64::consts::TAU * k as f64 / count as f64 + 0.3;
        let t = C::from_polar(0.45, th);
        if curve.discriminant_distance(p, Chart::A, t) < 0.05 {
            return Err(Error::TargetNearDiscriminant);
        }
        let mut roots = curve.fiber_roots(p, Chart::A.base(t));
        roots.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        let sheet = k % roots.len();
        out.push(CurveTarget {
            t,
            sheet,
            zeta: p.lift(Chart::A.base(t), roots[sheet]),
        });
    }
    Ok(out)
}

fn neighbours(curve: &PlaneCurve, target: &CurveTarget, h: f64) -> Result<[[C; 3]; 4]> {
    let p = Projection { fiber: curve.fiber() };
    let x0 = target.zeta[p.fiber];
    let steps = [C::new(h, 0.0), C::new(-h, 0.0), C::new(0.0, h), C::new(0.0, -h)];
    let mut out = [[C::zero(); 3]; 4];
    for (o, d) in out.iter_mut().zip(steps) {
        let u = target.t + d;
        let x = curve
            .track_sheet(p, Chart::A, target.t, x0, &[u])
            .ok_or_else(|| Error::ContinuationBreak("finite-difference stencil".into()))?[0];
        *o = p.lift(Chart::A.base(u), x);
    }
    Ok(out)
}

/// `∂u/∂t̄ ≈ [(u(t+h) − u(t−h)) + i(u(t+ih) − u(t−ih))]/(4h)`.
pub fn wirtinger_dbar(vals: [C; 4], h: f64) -> C {
    ((vals[0] - vals[1]) + C::i() * (vals[2] - vals[3])) / (4.0 * h)
}

/// `u = Kφ` at the targets and its `∂̄`-residual.
#[derive(Clone, Debug, Serialize)]
pub struct CurveSolution {
    pub grid: GridSpec,
    pub targets: Vec<C>,
    pub u: Vec<C>,
    /// `max |∂̄u − φ|` by finite differences with step `h`.
    pub dbar_residual: f64,
    pub step: f64,
}

/// Solves `∂̄u = φ` on a smooth plane curve with `u = Kφ`.
pub fn solve_dbar_curve(curve: &PlaneCurve, s: i64, phi: &SectionRep, spec: GridSpec, n_targets: usize) -> Result<CurveSolution> {
    let data = KoszulData::new(2, vec![curve.f().clone()])?;
    let ledger = data.degree_ledger(s, 1);
    if !ledger.solvable {
        return Err(Error::TwistBelowThreshold(format!("s = {s}, κ₀ − N = {}", ledger.threshold)));
    }
    if phi.q != 1 {
        return Err(Error::InvalidInput("solve takes a (0,1)-form".into()));
    }
    if let Some(form) = phi.form() {
        if !form.dbar(DbarFamily::ZetaBar).is_zero() {
            return Err(Error::InvalidInput("φ is not ∂̄-closed".into()));
        }
    }
    let ops = CurveOperators::new(curve, s, spec)?;
    let targets = curve_targets(curve, n_targets)?;
    let h = 1.0 / spec.nodes_radial as f64;
    let p = Projection { fiber: curve.fiber() };
    let rows: Vec<Result<(C, f64)>> = targets
        .par_iter()
        .map(|t| {
            let u = ops.apply_k(phi, &t.zeta)?;
            let nb = neighbours(curve, t, h)?;
            let mut vals = [C::zero(); 4];
            for (v, z) in vals.iter_mut().zip(&nb) {
                *v = ops.apply_k(phi, z)?;
            }
            let sample = curve.sample_at(p, Chart::A, t.t, t.zeta[p.fiber], 0, t.sheet);
            let want = pullback(&sample, &phi.eval(&t.zeta))?.dubar;
            Ok((u, (wirtinger_dbar(vals, h) - want).norm()))
        })
        .collect();
    let mut u = Vec::new();
    let mut res: f64 = 0.0;
    for r in rows {
        let (v, e) = r?;
        u.push(v);
        res = res.max(e);
    }
    Ok(CurveSolution {
        grid: spec,
        targets: targets.iter().map(|t| t.t).collect(),
        u,
        dbar_residual: res,
        step: h,
    })
}

/// `max |K(∂̄ψ) + σPψ − ψ|` over targets, for both signs `σ = ±1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KoppelmanLevel {
    pub grid: GridSpec,
    pub residual_plus: f64,
    pub residual_minus: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub sign: f64,
    pub levels: Vec<KoppelmanLevel>,
    pub slope: f64,
}

impl CalibrationRecord {
    pub fn winning_residuals(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| if self.sign > 0.0 { l.residual_plus } else { l.residual_minus })
            .collect()
    }
}

/// One level of the `q = 0` Koppelman identity on a curve.
pub fn koppelman_level(curve: &PlaneCurve, s: i64, psi: &SectionRep, spec: GridSpec, n_targets: usize) -> Result<KoppelmanLevel> {
    let ops = CurveOperators::new(curve, s, spec)?;
    let phi = psi.dbar()?;
    let targets = curve_targets(curve, n_targets)?;
    let vals: Vec<Result<(C, C, C)>> = targets
        .par_iter()
        .map(|t| {
            let k = if phi.form().is_some_and(|f| f.is_zero()) {
                C::zero()
            } else {
                ops.apply_k(&phi, &t.zeta)?
            };
            Ok((k, ops.apply_p_signed(psi, &t.zeta, 1.0)?, psi.value(&t.zeta)))
        })
        .collect();
    let (mut plus, mut minus) = (0.0f64, 0.0f64);
    for v in vals {
        let (k, p, x) = v?;
        plus = plus.max((k + p - x).norm());
        minus = minus.max((k - p - x).norm());
    }
    Ok(KoppelmanLevel {
        grid: spec,
        residual_plus: plus,
        residual_minus: minus,
    })
}

/// Runs the `q = 0` identity on refining grids and selects the sign of `P`.
pub fn koppelman_selftest(
    curve: &PlaneCurve,
    s: i64,
    psi: &SectionRep,
    specs: &[GridSpec],
    tol: f64,
) -> Result<CalibrationRecord> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("no grid levels".into()));
    }
    let levels = specs
        .iter()
        .map(|g| koppelman_level(curve, s, psi, *g, 6))
        .collect::<Result<Vec<_>>>()?;
    let last = levels.last().expect("non-empty").clone();
    let sign = if last.residual_plus <= last.residual_minus { 1.0 } else { -1.0 };
    let rec = CalibrationRecord {
        sign,
        slope: 0.0,
        levels,
    };
    let res = rec.winning_residuals();
    let slope = if res.len() >= 2 {
        let series: Vec<(usize, f64)> = rec.levels.iter().map(|l| l.grid.nodes_radial).zip(res.iter().copied()).collect();
        convergence_slope(&series)?.slope
    } else {
        0.0
    };
    let best = *res.last().expect("non-empty");
    if !(best <= tol) {
        return Err(Error::CalibrationFailed(format!(
            "residuals {:.3e} (+) and {:.3e} (−) above {tol:e}",
            last.residual_plus, last.residual_minus
        )));
    }
    Ok(CalibrationRecord { slope, ..rec })
}

/// Monomial exponents of degree `s` in `n + 1` variables.
pub fn monomials(n: usize, s: u32) -> Vec<Vec<u32>> {
    fn rec(k: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == 0 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(k - 1, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, s, &mut Vec::new(), &mut out);
    out
}

fn monomial_value(z: &[C], e: &[u32]) -> C {
    z.iter().zip(e).map(|(x, &k)| x.powu(k)).product()
}

#[derive(Clone, Debug, Serialize)]
pub struct Extension {
    pub grid: GridSpec,
    pub exponents: Vec<Vec<u32>>,
    pub coefficients: Vec<C>,
    /// Relative least-squares residual of the monomial fit.
    pub fit_residual: f64,
    /// `max |Pφ − φ|` at points of the curve.
    pub on_curve_agreement: f64,
}

impl Extension {
    pub fn eval(&self, z: &[C]) -> C {
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(e, c)| c * monomial_value(z, e))
            .sum()
    }
}

/// Points of `P²` off the curve used to fit `Pφ`.
fn off_curve_points(count: usize) -> Vec<[C; 3]> {
    (0..count)
        .map(|k| {
            let a = 0.7 * k as f64 + 0.2;
            [
                C::one(),
                C::from_polar(0.3 + 0.05 * (k % 7) as f64, a),
                C::from_polar(0.6 - 0.04 * (k % 5) as f64, 2.3 * a + 1.0),
            ]
        })
        .collect()
}

/// Extends a holomorphic section on the curve to a degree-`s` form with `P`.
pub fn extend_section(curve: &PlaneCurve, s: i64, phi: &SectionRep, spec: GridSpec, tol: f64) -> Result<Extension> {
    if phi.q != 0 {
        return Err(Error::InvalidInput("extension takes a (0,0) section".into()));
    }
    if let Some(form) = phi.form() {
        if !form.dbar(DbarFamily::ZetaBar).is_zero() {
            return Err(Error::InvalidInput("section is not holomorphic".into()));
        }
    }
    let ops = CurveOperators::new(curve, s, spec)?;
    let exps = monomials(2, s as u32);
    let on: Vec<[C; 3]> = curve_targets(curve, 8)?.into_iter().map(|t| t.zeta).collect();
    let mut pts = on.clone();
    pts.extend(off_curve_points(2 * exps.len() + 4));
    let vals = pts
        .par_iter()
        .map(|z| ops.apply_p(phi, z))
        .collect::<Result<Vec<C>>>()?;
    let agreement = on
        .iter()
        .zip(&vals)
        .map(|(z, v)| (v - phi.value(z)).norm())
        .fold(0.0, f64::max);
    let a = DMatrix::from_fn(pts.len(), exps.len(), |r, c| monomial_value(&pts[r], &exps[c]));
    let b = DVector::from_vec(vals.clone());
    let (x, _) = least_squares(&a, &b);
    let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let fit = (&a * &x - &b).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let fit_residual = if scale > 0.0 { fit / scale } else { fit };
    let ext = Extension {
        grid: spec,
        exponents: exps,
        coefficients: x.iter().copied().collect(),
        fit_residual,
        on_curve_agreement: agreement,
    };
    if !(fit_residual <= tol) {
        return Err(Error::ExtensionFitFailed(format!(
            "relative fit residual {fit_residual:.3e} > {tol:e}, on-curve agreement {agreement:.3e}, grid {}×{}",
            spec.nodes_radial, spec.nodes_angular
        )));
    }
    Ok(ext)
}

/// Pulls back the `ζ`-part of an ambient form on `P¹ × P¹` to the chart of
/// the sample; the result is indexed by the `dz̄`-monomial.
fn line_fiber_integrand(mv: &Multivector, s: &LineSample) -> Vec<C> {
    let l = mv.layout();
    let zbar = l.family_mask(DiffFamily::DZBar);
    let unit = l.bit(DiffFamily::DZBar, 0);
    let mut out = vec![C::zero(); 4];
    for (m, c) in mv.terms() {
        let names = l.names(m & !zbar);
        if let [(DiffFamily::DZeta, a), (DiffFamily::DZetaBar, b)] = names.as_slice() {
            out[((m & zbar) / unit) as usize] += c * s.jacobian[*a] * s.jacobian[*b].conj();
        }
    }
    out
}

fn line_result(v: &[C], sign: f64) -> Multivector {
    let l = GenLayout::new(1);
    let unit = l.bit(DiffFamily::DZBar, 0);
    let mut mv = Multivector::zero(1);
    for (i, c) in v.iter().enumerate() {
        if *c != C::zero() {
            mv.add(i as u64 * unit, sign * c);
        }
    }
    mv
}

/// `K` and `P` on `P¹` for `O(ℓ)` acting on `(0, q)`-forms.
pub struct LineOperators {
    pub kernel: PnKernel,
    pub q: usize,
    pub grid: LineGrid,
    solution: CompiledForm,
    projection: CompiledForm,
}

impl LineOperators {
    pub fn new(ell: i64, q: usize, weight: PnWeight, spec: GridSpec) -> Result<Self> {
        let kernel = assemble_pn_kernel(1, ell, weight)?;
        let (solution, projection) = kernel.compile(q);
        Ok(Self {
            kernel,
            q,
            grid: LineGrid::new(spec),
            solution,
            projection,
        })
    }

    fn check(&self, phi: &SectionRep) -> Result<()> {
        if phi.n != 1 || phi.q != self.q || phi.twist != self.kernel.ell {
            return Err(Error::InvalidInput(format!(
                "expected a (0,{}) form on P¹ with values in O({}), got (0,{}) in O({})",
                self.q, self.kernel.ell, phi.q, phi.twist
            )));
        }
        Ok(())
    }

    /// `Kφ(z)` as a form in `dz̄`.
    pub fn apply_k(&self, phi: &SectionRep, z: &[C; 2]) -> Result<Multivector> {
        self.check(phi)?;
        let patch = self.grid.patch(z);
        let v = self.grid.integrate(Some(&patch), 4, |s| {
            let k = self.solution.eval(&Env::zeta_z(&s.zeta, z));
            line_fiber_integrand(&k.wedge(&phi.eval(&s.zeta)), s)
        });
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Pole);
        }
        Ok(line_result(&v, orientation_sign(1)))
    }

    /// `Pφ(z)`; identically zero when the projection part vanishes.
    pub fn apply_p(&self, phi: &SectionRep, z: &[C; 2]) -> Result<Multivector> {
        self.check(phi)?;
        if self.kernel.projection_vanishes(self.q) {
            return Ok(Multivector::zero(1));
        }
        let v = self.grid.integrate(None, 4, |s| {
            let p = self.projection.eval(&Env::zeta_z(&s.zeta, z));
            line_fiber_integrand(&p.wedge(&phi.eval(&s.zeta)), s)
        });
        Ok(line_result(&v, orientation_sign(1)))
    }
}

/// Targets `[1 : 0.5 e^{iθ_k}]` on `P¹`.
pub fn line_targets(count: usize) -> Vec<C> {
    (0..count)
        .map(|k| C::from_polar(0.5, std::f64::consts::TAU * k as f64 / count as f64 + 0.3))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LineSolution {
    pub grid: GridSpec,
    pub targets: Vec<C>,
    pub u: Vec<C>,
    /// `max |Kφ + Pψ − ψ|` when `φ = ∂̄ψ` is manufactured.
    pub koppelman_residual: Option<f64>,
    /// `max |∂̄(Kφ) − φ|` by finite differences.
    pub dbar_residual: f64,
    /// `max |Pφ|` over the targets.
    pub obstruction_term: f64,
}

fn pn_chart_component(phi: &SectionRep, z: &[C; 2]) -> C {
    // Chart [1:t]: dζ̄0 = 0, dζ̄1 = dt̄.
    let l = GenLayout::new(1);
    phi.eval(z).get(l.bit(DiffFamily::DZetaBar, 1))
}

/// Solves `∂̄u = φ` on `P^N`; `psi`, if given, is the manufactured potential.
pub fn pn_solve(
    n: usize,
    ell: i64,
    q: usize,
    phi: &SectionRep,
    psi: Option<&SectionRep>,
    weight: Option<PnWeight>,
    spec: GridSpec,
) -> Result<LineSolution> {
    if n != 1 {
        return Err(Error::UnsupportedRank(format!("the numeric solver covers P¹, got N = {n}")));
    }
    if q != 1 {
        return Err(Error::InvalidInput("pn-solve takes (0,1)-forms on P¹".into()));
    }
    let weight = weight.unwrap_or_else(|| PnWeight::default_for(n, ell));
    let ops = LineOperators::new(ell, q, weight, spec)?;
    let p0 = match psi {
        Some(_) => Some(LineOperators::new(ell, 0, weight, spec)?),
        None => None,
    };
    let targets = line_targets(6);
    let h = 1.0 / spec.nodes_radial as f64;
    let steps = [C::new(h, 0.0), C::new(-h, 0.0), C::new(0.0, h), C::new(0.0, -h)];
    let rows: Vec<Result<(C, Option<f64>, f64, f64)>> = targets
        .par_iter()
        .map(|&t| {
            let z = [C::one(), t];
            let u = ops.apply_k(phi, &z)?.get(0);
            let mut vals = [C::zero(); 4];
            for (v, d) in vals.iter_mut().zip(steps) {
                *v = ops.apply_k(phi, &[C::one(), t + d])?.get(0);
            }
            let fd = (wirtinger_dbar(vals, h) - pn_chart_component(phi, &z)).norm();
            let kopp = match (psi, &p0) {
                (Some(psi), Some(p0)) => Some((u + p0.apply_p(psi, &z)?.get(0) - psi.value(&z)).norm()),
                _ => None,
            };
            let obstruction = ops.apply_p(phi, &z)?.max_abs();
            Ok((u, kopp, fd, obstruction))
        })
        .collect();
    let mut out = LineSolution {
        grid: spec,
        targets: targets.clone(),
        u: Vec::new(),
        koppelman_residual: psi.map(|_| 0.0),
        dbar_residual: 0.0,
        obstruction_term: 0.0,
    };
    for r in rows {
        let (u, k, fd, ob) = r?;
        out.u.push(u);
        if let (Some(acc), Some(k)) = (out.koppelman_residual.as_mut(), k) {
            *acc = acc.max(k);
        }
        out.dbar_residual = out.dbar_residual.max(fd);
        out.obstruction_term = out.obstruction_term.max(ob);
    }
    Ok(out)
}

/// `∫ ζ^m Ω ∧ φ` over the monomials `ζ^m` of degree `−ℓ − N − 1`.
pub fn pn_obstruction(n: usize, ell: i64, phi: &SectionRep, spec: GridSpec) -> Result<Vec<C>> {
    if n != 1 {
        return Err(Error::UnsupportedRank(format!("the numeric obstruction covers P¹, got N = {n}")));
    }
    let deg = -ell - n as i64 - 1;
    if deg < 0 {
        return Err(Error::InvalidTwist(format!("the obstruction needs ℓ ≤ −N − 1, got ℓ = {ell}")));
    }
    if phi.n != 1 || phi.q != n || phi.twist != ell {
        return Err(Error::InvalidInput(format!("expected a (0,{n}) form with values in O({ell})")));
    }
    let grid = LineGrid::new(spec);
    let omega = CompiledForm::new(&FormExpr::omega(1));
    let exps = monomials(n, deg as u32);
    let len = exps.len();
    let v = grid.integrate(None, len, |s| {
        let mut env = Env::new();
        env.set_family(Family::Zeta, &s.zeta);
        let w = omega.eval(&env).wedge(&phi.eval(&s.zeta));
        let top = line_fiber_integrand(&w, s)[0];
        exps.iter().map(|e| top * monomial_value(&s.zeta, e)).collect()
    });
    Ok(v)
}

/// Least-squares convergence order of a refinement series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// `−d log(residual) / d log(n)`.
    pub slope: f64,
    pub converging: bool,
}

pub const MIN_CONVERGENCE_SLOPE: f64 = 0.5;

pub fn convergence_slope(series: &[(usize, f64)]) -> Result<Convergence> {
    if series.len() < 2 {
        return Err(Error::InvalidInput("convergence needs at least two refinement levels".into()));
    }
    let floor = f64::MIN_POSITIVE;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .map(|&(n, r)| ((n as f64).ln(), r.max(floor).ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = -sxy / sxx;
    Ok(Convergence {
        slope,
        converging: slope >= MIN_CONVERGENCE_SLOPE,
    })
}

/// Writes `grid,residual` rows and returns the fitted slope.
pub fn emit_convergence<W: Write>(series: &[(usize, f64)], w: W) -> Result<Convergence> {
    let conv = convergence_slope(series)?;
    let io = |e: csv::Error| Error::InvalidInput(format!("csv output: {e}"));
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["grid", "residual"]).map_err(io)?;
    for (n, r) in series {
        wr.write_record([n.to_string(), format!("{r:e}")]).map_err(io)?;
    }
    wr.flush().map_err(|e| Error::InvalidInput(format!("csv output: {e}")))?;
    Ok(conv)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub grid: Option<GridSpec>,
    pub value: f64,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeRecord {
    pub name: String,
    pub grids: Vec<GridSpec>,
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub converging: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub grid: Vec<GridSpec>,
    pub residuals: Vec<Measurement>,
    pub slopes: Vec<SlopeRecord>,
    pub sign: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub passed: bool,
}

impl Report {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            passed: true,
            ..Self::default()
        }
    }

    /// Records a value and fails the report if it exceeds `tol`.
    pub fn check(&mut self, name: impl Into<String>, grid: Option<GridSpec>, value: f64, tol: Option<f64>) -> bool {
        let ok = tol.is_none_or(|t| value <= t);
        self.passed &= ok;
        if let Some(g) = grid {
            if !self.grid.contains(&g) {
                self.grid.push(g);
            }
        }
        self.residuals.push(Measurement {
            name: name.into(),
            grid,
            value,
            tolerance: tol,
        });
        ok
    }

    pub fn slope(&mut self, name: impl Into<String>, grids: &[GridSpec], residuals: &[f64]) -> Result<Convergence> {
        let series: Vec<(usize, f64)> = grids.iter().map(|g| g.nodes_radial).zip(residuals.iter().copied()).collect();
        let c = convergence_slope(&series)?;
        let name = name.into();
        if !c.converging {
            self.warnings.push(format!("{name}: no convergence (slope {:.2})", c.slope));
        }
        self.slopes.push(SlopeRecord {
            name,
            grids: grids.to_vec(),
            residuals: residuals.to_vec(),
            slope: c.slope,
            converging: c.converging,
        });
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_poly;

    fn fermat() -> PlaneCurve {
        PlaneCurve::new(parse_poly("zeta0^3 + zeta1^3 + zeta2^3", Universe { n: 2 }).unwrap()).unwrap()
    }

    #[test]
    fn section_validation() {
        let psi = SectionRep::parse_function("zeta0^2*Zeta0/(zeta0*Zeta0 + zeta1*Zeta1 + zeta2*Zeta2)", 2).unwrap();
        assert_eq!((psi.q, psi.twist), (0, 1));
        assert!(!psi.holomorphic);
        let phi = psi.dbar().unwrap();
        assert_eq!((phi.q, phi.twist), (1, 1));
        assert!(phi.dbar_closed);
        assert!(SectionRep::parse_function("zeta0*Zeta0", 2).is_err());
        assert!(SectionRep::parse_function("zeta0", 2).unwrap().holomorphic);
    }

    #[test]
    fn convergence_examples() {
        let c = convergence_slope(&[(16, 1e-2), (32, 5e-3), (64, 2.5e-3)]).unwrap();
        assert!((c.slope - 1.0).abs() < 1e-12 && c.converging);
        let c = convergence_slope(&[(16, 1e-2), (32, 1e-2), (64, 1e-2)]).unwrap();
        assert!(c.slope.abs() < 1e-12 && !c.converging);
        assert!(convergence_slope(&[]).is_err());
        let mut out = Vec::new();
        emit_convergence(&[(8, 1.0), (16, 0.25)], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "grid,residual\n8,1e0\n16,2.5e-1\n");
    }

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(2, 1).len(), 3);
        assert_eq!(monomials(2, 2).len(), 6);
        assert_eq!(monomials(1, 0), vec![vec![0, 0]]);
    }

    #[test]
    fn zero_input_gives_zero() {
        let ops = CurveOperators::new(&fermat(), 1, GridSpec::square(8)).unwrap();
        let t = &curve_targets(ops.curve(), 1).unwrap()[0];
        let zero = SectionRep::zero(2, 1, 1);
        assert_eq!(ops.apply_k(&zero, &t.zeta).unwrap(), C::zero());
        assert_eq!(ops.apply_p(&SectionRep::zero(2, 0, 1), &t.zeta).unwrap(), C::zero());
    }

    #[test]
    fn k_is_linear() {
        let ops = CurveOperators::new(&fermat(), 1, GridSpec::square(8)).unwrap();
        let psi = SectionRep::parse_function("zeta0^2*Zeta0/(zeta0*Zeta0 + zeta1*Zeta1 + zeta2*Zeta2)", 2).unwrap();
        let phi = psi.dbar().unwrap();
        let t = &curve_targets(ops.curve(), 1).unwrap()[0];
        let a = ops.apply_k(&phi, &t.zeta).unwrap();
        let lam = C::new(0.3, -1.7);
        let b = ops.apply_k(&phi.scaled(lam), &t.zeta).unwrap();
        assert!((b - lam * a).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn projection_vanishes_on_one_forms() {
        let ops = CurveOperators::new(&fermat(), 1, GridSpec::square(8)).unwrap();
        let psi = SectionRep::parse_function("zeta0^2*Zeta0/(zeta0*Zeta0 + zeta1*Zeta1 + zeta2*Zeta2)", 2).unwrap();
        let z = [C::one(), C::new(0.2, 0.1), C::new(0.3, 0.0)];
        assert_eq!(ops.apply_p(&psi.dbar().unwrap(), &z).unwrap(), C::zero());
    }

    #[test]
    fn line_constant_is_reproduced() {
        let ops = LineOperators::new(0, 0, PnWeight::Alpha, GridSpec::square(16)).unwrap();
        let one = SectionRep::parse_function("1", 1).unwrap();
        let v = ops.apply_p(&one, &[C::one(), C::new(0.2, 0.4)]).unwrap().get(0);
        assert!((v - 1.0).norm() < 1e-10, "{v}");
    }

    #[test]
    fn unit_moment() {
        let u = Universe { n: 1 };
        let c = |e: &str| parse_rational(e, u).unwrap();
        let den = "(-pi2i*(zeta0*Zeta0 + zeta1*Zeta1)^2)";
        let form = FormExpr::one_form(1, DiffFamily::DZetaBar, &[c(&format!("-Zeta1/{den}")), c(&format!("Zeta0/{den}"))]);
        let phi = SectionRep::symbolic(form).unwrap();
        assert_eq!((phi.q, phi.twist), (1, -2));
        let m = pn_obstruction(1, -2, &phi, GridSpec::square(16)).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0] - 1.0).norm() < 1e-10, "{}", m[0]);
    }
}

