//! Plane projective curves: validation, discriminant data, sheeted sampling
//! over the charts of a base `P¹`, rational parametrizations and pullback.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{One, Zero};
use rayon::prelude::*;
use smallvec::SmallVec;
use serde::{Deserialize, Serialize};

use crate::algebra::{Family, GaussianRational, Grading, MultiPoly, Var};
use crate::forms::{DiffFamily, Multivector};
use crate::numeric::{gauss_legendre, poly_roots, resultant, CompiledPoly, Env, UPoly};
use crate::{Error, Result};

pub type C = Complex64;

/// Sampling grid on a closed unit disk: Gauss–Legendre in the radius,
/// uniform in the angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nodes_radial: usize,
    pub nodes_angular: usize,
    #[serde(default = "default_exclusion")]
    pub exclusion_radius: f64,
}

fn default_exclusion() -> f64 {
    1e-3
}

impl GridSpec {
    pub fn square(n: usize) -> Self {
        Self {
            nodes_radial: n,
            nodes_angular: n,
            exclusion_radius: default_exclusion(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarNode {
    pub u: C,
    /// `r dr dθ` quadrature weight.
    pub area: f64,
    pub ray: usize,
    pub radial: usize,
}

/// Nodes of a polar rule on the disk `|u − center| ≤ radius`, ordered ray by
/// ray with increasing radius.
pub fn polar_nodes(center: C, r0: f64, r1: f64, n_r: usize, n_theta: usize) -> Vec<PolarNode> {
    let (rs, ws) = gauss_legendre(n_r, r0, r1);
    let dth = 2.0 * PI / n_theta as f64;
    let mut out = Vec::with_capacity(n_r * n_theta);
    for k in 0..n_theta {
        let th = (k as f64 + 0.5) * dth;
        let e = C::from_polar(1.0, th);
        for (i, (&r, &w)) in rs.iter().zip(&ws).enumerate() {
            out.push(PolarNode {
                u: center + e * r,
                area: w * r * dth,
                ray: k,
                radial: i,
            });
        }
    }
    out
}

/// The two affine charts of a base `P¹` with homogeneous coordinates `[a:b]`:
/// `[1:u]` and `[u:1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    A,
    B,
}

impl Chart {
    pub fn base(self, u: C) -> [C; 2] {
        match self {
            Chart::A => [C::one(), u],
            Chart::B => [u, C::one()],
        }
    }

    /// Chart coordinate of a homogeneous base point, if it lies in the chart.
    pub fn coordinate(self, p: [C; 2]) -> Option<C> {
        let (num, den) = match self {
            Chart::A => (p[1], p[0]),
            Chart::B => (p[0], p[1]),
        };
        (den.norm() > 1e-300).then(|| num / den)
    }
}

/// Linear projection from the coordinate point `e_fiber` onto the line of
/// the two remaining coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Projection {
    pub fiber: usize,
}

impl Projection {
    pub fn base_indices(self) -> (usize, usize) {
        match self.fiber {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }

    /// Homogeneous base coordinates of `ζ`.
    pub fn project(self, zeta: &[C; 3]) -> [C; 2] {
        let (j, k) = self.base_indices();
        [zeta[j], zeta[k]]
    }

    pub fn lift(self, base: [C; 2], x: C) -> [C; 3] {
        let (j, k) = self.base_indices();
        let mut z = [C::zero(); 3];
        z[j] = base[0];
        z[k] = base[1];
        z[self.fiber] = x;
        z
    }
}

fn zeta_vars() -> [Var; 3] {
    [Var::zeta(0), Var::zeta(1), Var::zeta(2)]
}

fn env_of(zeta: &[C; 3]) -> Env {
    let mut e = Env::new();
    e.set_family(Family::Zeta, zeta);
    e
}

fn l1_coeffs(p: &MultiPoly) -> f64 {
    p.terms().map(|(_, c)| c.to_complex().norm()).sum()
}

fn max_abs(z: &[C]) -> f64 {
    z.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Projective distance between two points of `P²` (chordal, in `[0, 1]`).
pub fn chordal(a: &[C; 3], b: &[C; 3]) -> f64 {
    let na: f64 = a.iter().map(|c| c.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum();
    let ip: C = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    (1.0 - ip.norm_sqr() / (na * nb)).max(0.0).sqrt()
}

#[derive(Clone, Debug)]
struct ProjectionData {
    degenerate: bool,
    /// Compiled coefficients `g_e` of `f = Σ ζ_i^e g_e`.
    coeffs: Vec<CompiledPoly>,
    discriminant: Vec<[C; 2]>,
}

#[derive(Clone, Debug)]
pub struct PlaneCurve {
    f: MultiPoly,
    degree: u32,
    grad: [MultiPoly; 3],
    cf: CompiledPoly,
    cgrad: [CompiledPoly; 3],
    scale: f64,
    fiber: usize,
    smooth: bool,
    singular: Vec<[C; 3]>,
    proj: [ProjectionData; 3],
}

const TEST_LINES: [([i64; 3], [i64; 3]); 4] = [
    ([1, 2, -1], [3, -1, 2]),
    ([2, -3, 5], [-1, 4, 1]),
    ([1, 1, 1], [1, -2, 3]),
    ([-2, 1, 3], [5, 2, -7]),
];

fn restrict_to_line(f: &MultiPoly, a: [i64; 3], b: [i64; 3]) -> UPoly {
    let t = Var::t(0);
    let bind: HashMap<Var, MultiPoly> = (0..3)
        .map(|j| {
            let p = &MultiPoly::int(a[j]) + &MultiPoly::var(t).scale(&GaussianRational::from_int(b[j]));
            (Var::zeta(j), p)
        })
        .collect();
    UPoly::from_multipoly(&f.substitute(&bind), t).expect("univariate after substitution")
}

/// Coefficients of `f(ζ_j = a, ζ_k = t, ζ_i = x)` as polynomials in `t`,
/// listed by increasing power of `x`, for `a ∈ {0, 1}` given by `chart_b`.
fn fiber_coeffs_exact(f: &MultiPoly, p: Projection, chart_b: bool) -> Vec<UPoly> {
    let (j, k) = p.base_indices();
    let t = Var::t(0);
    let (vj, vk) = if chart_b {
        (MultiPoly::var(t), MultiPoly::one())
    } else {
        (MultiPoly::one(), MultiPoly::var(t))
    };
    let bind: HashMap<Var, MultiPoly> = [(Var::zeta(j), vj), (Var::zeta(k), vk)].into_iter().collect();
    let g = f.substitute(&bind);
    let xi = Var::zeta(p.fiber);
    let mut by_power: Vec<MultiPoly> = Vec::new();
    for (m, c) in g.terms() {
        let (e, rest) = m.split_var(xi);
        let e = e as usize;
        if by_power.len() <= e {
            by_power.resize(e + 1, MultiPoly::zero());
        }
        by_power[e].add_term(rest, c.clone());
    }
    by_power
        .iter()
        .map(|q| UPoly::from_multipoly(q, t).expect("depends on t only"))
        .collect()
}

fn squarefree_part(p: &UPoly) -> UPoly {
    let g = p.gcd(&p.derivative());
    if g.degree().unwrap_or(0) == 0 {
        p.clone()
    } else {
        p.div_rem(&g).0
    }
}

impl PlaneCurve {
    /// Validates `f` and computes discriminant and singularity data, choosing
    /// the fiber variable `ζ2`, or `ζ1`, `ζ0` if `ζ2` is degenerate.
    pub fn new(f: MultiPoly) -> Result<Self> {
        Self::build(f, None)
    }

    pub fn with_fiber(f: MultiPoly, fiber: usize) -> Result<Self> {
        Self::build(f, Some(fiber))
    }

    fn build(f: MultiPoly, fiber: Option<usize>) -> Result<Self> {
        let only_zeta = f
            .terms()
            .all(|(m, _)| m.pi_exp() == 0 && m.vars().all(|(v, _)| v.family == Family::Zeta && v.index() <= 2));
        let degree = match f.homogeneity(Grading::Family(Family::Zeta)) {
            Some(d) if d >= 1 && only_zeta && !f.is_zero() => d as u32,
            _ => {
                return Err(Error::InvalidInput(
                    "curve polynomial must be homogeneous of degree ≥ 1 in zeta0, zeta1, zeta2".into(),
                ))
            }
        };
        let mut repeated = 0;
        let mut tried = 0;
        for (a, b) in TEST_LINES {
            let r = restrict_to_line(&f, a, b);
            if r.degree() != Some(degree as usize) {
                continue;
            }
            tried += 1;
            if r.gcd(&r.derivative()).degree().unwrap_or(0) > 0 {
                repeated += 1;
            }
        }
        if tried > 0 && repeated == tried {
            return Err(Error::RepeatedFactor);
        }
        let grad = zeta_vars().map(|v| f.differentiate(v));
        let cgrad = [0, 1, 2].map(|i| CompiledPoly::new(&grad[i]));
        let proj = [0, 1, 2].map(|i| Self::projection_data(&f, &grad[i], Projection { fiber: i }));
        let fiber = match fiber {
            Some(i) if i > 2 => return Err(Error::InvalidInput(format!("fiber index {i} out of range"))),
            Some(i) if proj[i].degenerate => return Err(Error::FiberDegenerate),
            Some(i) => i,
            None => [2, 1, 0]
                .into_iter()
                .find(|&i| !proj[i].degenerate)
                .ok_or(Error::FiberDegenerate)?,
        };
        let mut curve = Self {
            cf: CompiledPoly::new(&f),
            scale: l1_coeffs(&f),
            f,
            degree,
            grad,
            cgrad,
            fiber,
            smooth: true,
            singular: Vec::new(),
            proj,
        };
        curve.singular = curve.find_singular_points();
        curve.smooth = curve.singular.is_empty();
        Ok(curve)
    }

    fn projection_data(f: &MultiPoly, fi: &MultiPoly, p: Projection) -> ProjectionData {
        let xi = Var::zeta(p.fiber);
        let mut coeffs: Vec<MultiPoly> = Vec::new();
        for (m, c) in f.terms() {
            let (e, rest) = m.split_var(xi);
            let e = e as usize;
            if coeffs.len() <= e {
                coeffs.resize(e + 1, MultiPoly::zero());
            }
            coeffs[e].add_term(rest, c.clone());
        }
        let coeffs_c = coeffs.iter().map(CompiledPoly::new).collect();
        let mut data = ProjectionData {
            degenerate: fi.is_zero(),
            coeffs: coeffs_c,
            discriminant: Vec::new(),
        };
        if data.degenerate {
            return data;
        }
        let fa = fiber_coeffs_exact(f, p, false);
        let dfa: Vec<UPoly> = fa
            .iter()
            .enumerate()
            .skip(1)
            .map(|(e, c)| c.mul(&UPoly::constant(GaussianRational::from_int(e as i64))))
            .collect();
        let res = resultant(&fa, &dfa);
        if res.is_zero() {
            data.degenerate = true;
            return data;
        }
        let sq = squarefree_part(&res);
        for u in poly_roots(&sq.to_complex()) {
            data.discriminant.push([C::one(), u]);
        }
        // The point [0:1] of the base, outside chart A.
        let fb = fiber_coeffs_exact(f, p, true);
        let at0: Vec<GaussianRational> = fb
            .iter()
            .map(|c| c.coeffs().first().cloned().unwrap_or_else(GaussianRational::zero))
            .collect();
        let g0 = UPoly::new(at0);
        if g0.is_zero() {
            data.degenerate = true;
            return data;
        }
        let drops = g0.degree() != Some(fa.len() - 1);
        if drops || g0.gcd(&g0.derivative()).degree().unwrap_or(0) > 0 {
            data.discriminant.push([C::zero(), C::one()]);
        }
        data
    }

    fn find_singular_points(&self) -> Vec<[C; 3]> {
        let p = Projection { fiber: self.fiber };
        let mut out: Vec<[C; 3]> = Vec::new();
        let mut candidates: Vec<[C; 3]> = Vec::new();
        for base in &self.proj[self.fiber].discriminant {
            for x in self.fiber_roots(p, *base) {
                candidates.push(p.lift(*base, x));
            }
        }
        let mut e = [C::zero(); 3];
        e[self.fiber] = C::one();
        if self.eval(&e).norm() <= 1e-12 * self.scale {
            candidates.push(e);
        }
        for c in candidates {
            let Some(z) = self.refine_singular(c) else { continue };
            if !out.iter().any(|o| chordal(o, &z) < 1e-6) {
                out.push(z);
            }
        }
        out
    }

    /// Gauss–Newton on `∇f = 0` in the affine chart of the largest coordinate.
    fn refine_singular(&self, start: [C; 3]) -> Option<[C; 3]> {
        let piv = (0..3).max_by(|&a, &b| start[a].norm().total_cmp(&start[b].norm()))?;
        let mut z = start.map(|c| c / start[piv]);
        let free: Vec<usize> = (0..3).filter(|&i| i != piv).collect();
        let second: Vec<Vec<MultiPoly>> = (0..3)
            .map(|i| zeta_vars().iter().map(|&v| self.grad[i].differentiate(v)).collect())
            .collect();
        let tol = 1e-8 * self.scale.max(1.0);
        for _ in 0..30 {
            let env = env_of(&z);
            let r = DVector::from_iterator(3, (0..3).map(|i| self.cgrad[i].eval(&env)));
            if r.norm() <= 1e-14 * self.scale.max(1.0) {
                break;
            }
            let jac = DMatrix::from_fn(3, 2, |i, k| CompiledPoly::new(&second[i][free[k]]).eval(&env));
            let svd = jac.svd(true, true);
            let Ok(step) = svd.solve(&r, 1e-12) else { break };
            for (k, &i) in free.iter().enumerate() {
                z[i] -= step[k];
            }
            if step.norm() < 1e-15 {
                break;
            }
        }
        let g = self.grad_at(&z);
        let n = max_abs(&z).powi(self.degree as i32 - 1);
        (max_abs(&g) <= tol * n && self.eval(&z).norm() <= tol * n * max_abs(&z)).then_some(z)
    }

    pub fn f(&self) -> &MultiPoly {
        &self.f
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn singular_points(&self) -> &[[C; 3]] {
        &self.singular
    }

    pub fn gradient(&self) -> &[MultiPoly; 3] {
        &self.grad
    }

    pub fn is_degenerate(&self, p: Projection) -> bool {
        self.proj[p.fiber].degenerate
    }

    /// Base points of `p` over which two fiber roots collide.
    pub fn discriminant(&self, p: Projection) -> &[[C; 2]] {
        &self.proj[p.fiber].discriminant
    }

    /// Sum of absolute values of the coefficients.
    pub fn coefficient_scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, zeta: &[C; 3]) -> C {
        self.cf.eval(&env_of(zeta))
    }

    pub fn grad_at(&self, zeta: &[C; 3]) -> [C; 3] {
        let env = env_of(zeta);
        [0, 1, 2].map(|i| self.cgrad[i].eval(&env))
    }

    /// `|f(ζ)|` relative to the size of its terms.
    pub fn normalized_residual(&self, zeta: &[C; 3]) -> f64 {
        self.eval(zeta).norm() / (self.scale * max_abs(zeta).powi(self.degree as i32))
    }

    /// Numeric coefficients of `x ↦ f(lift(base, x))`, lowest power first.
    pub fn fiber_polynomial(&self, p: Projection, base: [C; 2]) -> Vec<C> {
        let (j, k) = p.base_indices();
        let mut env = Env::new();
        env.set(Var::zeta(j), base[0]).set(Var::zeta(k), base[1]);
        self.proj[p.fiber].coeffs.iter().map(|c| c.eval(&env)).collect()
    }

    pub fn fiber_roots(&self, p: Projection, base: [C; 2]) -> Vec<C> {
        poly_roots(&self.fiber_polynomial(p, base))
    }

    /// Distance in chart coordinates from `u` to the nearest discriminant
    /// point of `p` in `chart`.
    pub fn discriminant_distance(&self, p: Projection, chart: Chart, u: C) -> f64 {
        self.proj[p.fiber]
            .discriminant
            .iter()
            .filter_map(|b| chart.coordinate(*b))
            .map(|v| (v - u).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// `dζ/du` along the curve in the given chart of `p` at the point `ζ`.
    pub fn chart_jacobian(&self, p: Projection, chart: Chart, zeta: &[C; 3]) -> ([C; 3], C) {
        let g = self.grad_at(zeta);
        let (j, k) = p.base_indices();
        let moving = match chart {
            Chart::A => k,
            Chart::B => j,
        };
        let fi = g[p.fiber];
        let mut jac = [C::zero(); 3];
        jac[moving] = C::one();
        jac[p.fiber] = -g[moving] / fi;
        (jac, fi)
    }

    /// Continues the fiber root nearest `x0` over `u0` along the segment to
    /// `u1`, tracking all sheets so that labels cannot jump.
    pub fn continue_root(&self, p: Projection, chart: Chart, u0: C, x0: C, u1: C) -> Option<C> {
        let roots = self.fiber_roots(p, chart.base(u0));
        let k = (0..roots.len()).min_by(|&a, &b| (roots[a] - x0).norm().total_cmp(&(roots[b] - x0).norm()))?;
        let tr = Tracker { curve: self, p, chart };
        tr.step(&roots, u0, u1, 0).map(|xs| xs[k])
    }

    /// Follows the root nearest `x0` over `u0` through the points `us` in
    /// order; `None` if the continuation breaks.
    pub fn track_sheet(&self, p: Projection, chart: Chart, u0: C, x0: C, us: &[C]) -> Option<Vec<C>> {
        let roots = self.fiber_roots(p, chart.base(u0));
        let k = (0..roots.len()).min_by(|&a, &b| (roots[a] - x0).norm().total_cmp(&(roots[b] - x0).norm()))?;
        let tr = Tracker { curve: self, p, chart };
        let mut xs = roots;
        let mut prev = u0;
        let mut out = Vec::with_capacity(us.len());
        for &u in us {
            xs = tr.step(&xs, prev, u, 0)?;
            out.push(xs[k]);
            prev = u;
        }
        Some(out)
    }

    pub fn sample_at(&self, p: Projection, chart: Chart, u: C, x: C, node: usize, sheet: usize) -> CurveSample {
        let zeta = p.lift(chart.base(u), x);
        let (jacobian, fd) = self.chart_jacobian(p, chart, &zeta);
        CurveSample {
            source: SampleSource::Chart { fiber: p.fiber, chart },
            base: u,
            node,
            sheet,
            residual: self.normalized_residual(&zeta),
            zeta,
            fiber_derivative: fd,
            jacobian,
        }
    }
}

fn newton_fiber(c: &[C], mut x: C) -> Option<C> {
    for _ in 0..40 {
        let (mut p, mut dp) = (C::zero(), C::zero());
        for k in c.iter().rev() {
            dp = dp * x + p;
            p = p * x + k;
        }
        if dp.norm() == 0.0 || !p.is_finite() {
            return None;
        }
        let step = p / dp;
        x -= step;
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            return Some(x);
        }
    }
    x.is_finite().then_some(x)
}

fn min_separation(xs: &[C]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            m = m.min((xs[i] - xs[j]).norm());
        }
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SampleSource {
    Chart { fiber: usize, chart: Chart },
    Param { chart: Chart },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveSample {
    pub source: SampleSource,
    /// Chart coordinate of the base point (or parameter).
    pub base: C,
    pub node: usize,
    pub sheet: usize,
    /// Chart-normalized representative.
    pub zeta: [C; 3],
    /// `∂f/∂ζ_i` at `ζ` for the fiber variable `i` (for parametrized samples,
    /// `∂f/∂ζ2`).
    pub fiber_derivative: C,
    /// `dζ/du` along the curve.
    pub jacobian: [C; 3],
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedNode {
    pub node: usize,
    pub base: C,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct ChartSampling {
    pub projection: Projection,
    pub chart: Chart,
    pub nodes: Vec<PolarNode>,
    pub samples: Vec<CurveSample>,
    pub skipped: Vec<SkippedNode>,
}

struct Tracker<'a> {
    curve: &'a PlaneCurve,
    p: Projection,
    chart: Chart,
}

impl Tracker<'_> {
    fn coeffs(&self, u: C) -> Vec<C> {
        self.curve.fiber_polynomial(self.p, self.chart.base(u))
    }

    fn slope(&self, u: C, x: C) -> C {
        let z = self.p.lift(self.chart.base(u), x);
        self.curve.chart_jacobian(self.p, self.chart, &z).0[self.p.fiber]
    }

    /// Tracks all sheets from `ua` to `ub`, subdividing on failure.
    fn step(&self, xs: &[C], ua: C, ub: C, depth: u32) -> Option<Vec<C>> {
        let sep = min_separation(xs);
        let c = self.coeffs(ub);
        let mut out = Vec::with_capacity(xs.len());
        let mut ok = true;
        for &x in xs {
            let pred = x + self.slope(ua, x) * (ub - ua);
            match newton_fiber(&c, pred) {
                Some(y) if (y - pred).norm() < 0.25 * sep => out.push(y),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && min_separation(&out) > 1e-9 * (1.0 + max_abs(&out)) {
            return Some(out);
        }
        if depth >= 18 {
            return None;
        }
        let mid = 0.5 * (ua + ub);
        let xm = self.step(xs, ua, mid, depth + 1)?;
        self.step(&xm, mid, ub, depth + 1)
    }

    /// Fresh roots at `u` matched to `prev` by the cheapest permutation.
    fn rematch(&self, prev: &[C], u: C) -> Option<Vec<C>> {
        let roots = self.curve.fiber_roots(self.p, self.chart.base(u));
        if roots.len() != prev.len() {
            return None;
        }
        let mut idx: Vec<usize> = (0..roots.len()).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        permute(&mut idx, 0, &mut |perm| {
            let cost: f64 = perm.iter().enumerate().map(|(s, &r)| (roots[r] - prev[s]).norm_sqr()).sum();
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, perm.to_vec()));
            }
        });
        best.map(|(_, perm)| perm.iter().map(|&r| roots[r]).collect())
    }
}

fn permute(v: &mut [usize], k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

fn sorted_roots(mut xs: Vec<C>) -> Vec<C> {
    xs.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
    xs
}

/// Samples every fiber root over the polar grid of one chart of the base of
/// `p`, labelling sheets by continuation along the rays of the grid.
pub fn chart_sample(curve: &PlaneCurve, p: Projection, chart: Chart, grid: &GridSpec) -> Result<ChartSampling> {
    if curve.is_degenerate(p) {
        return Err(Error::FiberDegenerate);
    }
    let nodes = polar_nodes(C::zero(), 0.0, 1.0, grid.nodes_radial, grid.nodes_angular);
    let tr = Tracker { curve, p, chart };
    let d = curve.fiber_polynomial(p, chart.base(C::zero())).len() - 1;
    let center_near = curve.discriminant_distance(p, chart, C::zero()) < grid.exclusion_radius;
    let center = sorted_roots(curve.fiber_roots(p, chart.base(C::zero())));
    let guard = 10.0 * grid.exclusion_radius;
    let rays: Vec<Result<(Vec<CurveSample>, Vec<SkippedNode>)>> = (0..grid.nodes_angular)
        .into_par_iter()
        .map(|ray| {
            let mut samples = Vec::new();
            let mut skipped = Vec::new();
            let mut xs = center.clone();
            let mut u_prev = C::zero();
            let mut fresh = center_near;
            for i in 0..grid.nodes_radial {
                let id = ray * grid.nodes_radial + i;
                let u = nodes[id].u;
                let dist = curve.discriminant_distance(p, chart, u);
                if dist < grid.exclusion_radius {
                    skipped.push(SkippedNode {
                        node: id,
                        base: u,
                        reason: "near-discriminant node".into(),
                    });
                    fresh = true;
                    continue;
                }
                let next = if fresh {
                    tr.rematch(&xs, u)
                } else {
                    tr.step(&xs, u_prev, u, 0).or_else(|| {
                        let near = curve.discriminant_distance(p, chart, 0.5 * (u + u_prev)) < guard || dist < guard;
                        if near {
                            tr.rematch(&xs, u)
                        } else {
                            None
                        }
                    })
                };
                let Some(next) = next.filter(|v| v.len() == d) else {
                    return Err(Error::ContinuationBreak(format!(
                        "projection from ζ{}, chart {:?}, base {:.6}{:+.6}i",
                        p.fiber, chart, u.re, u.im
                    )));
                };
                fresh = false;
                xs = next;
                u_prev = u;
                for (sheet, &x) in xs.iter().enumerate() {
                    samples.push(curve.sample_at(p, chart, u, x, id, sheet));
                }
            }
            Ok((samples, skipped))
        })
        .collect();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for r in rays {
        let (s, k) = r?;
        samples.extend(s);
        skipped.extend(k);
    }
    Ok(ChartSampling {
        projection: p,
        chart,
        nodes,
        samples,
        skipped,
    })
}

/// `t ↦ [P⁰(t):…:P^N(t)]` with `f∘P ≡ 0`.
#[derive(Clone, Debug)]
pub struct RationalParam {
    polys: Vec<MultiPoly>,
    degree: u32,
    image: MultiPoly,
    compiled: Vec<CompiledPoly>,
    d0: Vec<CompiledPoly>,
    d1: Vec<CompiledPoly>,
    image_grad: Vec<CompiledPoly>,
}

impl RationalParam {
    pub fn new(polys: Vec<MultiPoly>, image: MultiPoly) -> Result<Self> {
        let t_only = |p: &MultiPoly| p.terms().all(|(m, _)| m.pi_exp() == 0 && m.vars().all(|(v, _)| v.family == Family::T));
        let degs: Vec<Option<i32>> = polys.iter().map(|p| p.homogeneity(Grading::Family(Family::T))).collect();
        let degree = match degs.first() {
            Some(Some(d)) if *d >= 1 && degs.iter().all(|x| *x == Some(*d)) && polys.iter().all(t_only) => *d as u32,
            _ => {
                return Err(Error::InvalidInput(
                    "parametrization must be homogeneous polynomials of a common degree in t0, t1".into(),
                ))
            }
        };
        let bind: HashMap<Var, MultiPoly> = polys.iter().enumerate().map(|(j, p)| (Var::zeta(j), p.clone())).collect();
        if !image.substitute(&bind).is_zero() {
            return Err(Error::InvalidInput("f∘P does not vanish identically".into()));
        }
        let n = polys.len();
        Ok(Self {
            compiled: polys.iter().map(CompiledPoly::new).collect(),
            d0: polys.iter().map(|p| CompiledPoly::new(&p.differentiate(Var::t(0)))).collect(),
            d1: polys.iter().map(|p| CompiledPoly::new(&p.differentiate(Var::t(1)))).collect(),
            image_grad: (0..n).map(|j| CompiledPoly::new(&image.differentiate(Var::zeta(j)))).collect(),
            polys,
            degree,
            image,
        })
    }

    /// `[t0³ : t1²t0 : t1³]` onto `ζ1³ − ζ2²ζ0`.
    pub fn cusp() -> Self {
        let t0 = MultiPoly::var(Var::t(0));
        let t1 = MultiPoly::var(Var::t(1));
        let polys = vec![t0.pow(3), &t1.pow(2) * &t0, t1.pow(3)];
        Self::new(polys, crate::hefer::cusp_polynomial()).expect("cusp parametrization is exact")
    }

    pub fn polys(&self) -> &[MultiPoly] {
        &self.polys
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn image(&self) -> &MultiPoly {
        &self.image
    }

    fn env(t0: C, t1: C) -> Env {
        let mut e = Env::new();
        e.set(Var::t(0), t0).set(Var::t(1), t1);
        e
    }

    pub fn point(&self, t0: C, t1: C) -> Vec<C> {
        let e = Self::env(t0, t1);
        self.compiled.iter().map(|p| p.eval(&e)).collect()
    }

    /// Sample at chart coordinate `u` (`[1:u]` or `[u:1]`).
    pub fn sample(&self, chart: Chart, u: C, node: usize) -> CurveSample {
        let [t0, t1] = chart.base(u);
        let e = Self::env(t0, t1);
        let zeta: Vec<C> = self.compiled.iter().map(|p| p.eval(&e)).collect();
        let der = match chart {
            Chart::A => &self.d1,
            Chart::B => &self.d0,
        };
        let jac: Vec<C> = der.iter().map(|p| p.eval(&e)).collect();
        let mut ze = Env::new();
        ze.set_family(Family::Zeta, &zeta);
        let fd = self.image_grad.last().map(|g| g.eval(&ze)).unwrap_or_default();
        let z3 = [0, 1, 2].map(|j| zeta.get(j).copied().unwrap_or_default());
        let j3 = [0, 1, 2].map(|j| jac.get(j).copied().unwrap_or_default());
        CurveSample {
            source: SampleSource::Param { chart },
            base: u,
            node,
            sheet: 0,
            zeta: z3,
            fiber_derivative: fd,
            jacobian: j3,
            residual: 0.0,
        }
    }
}

/// Samples a rationally parametrized curve over the polar grids of both
/// charts of the parameter line.
pub fn rational_param_sample(param: &RationalParam, grid: &GridSpec) -> Vec<CurveSample> {
    let nodes = polar_nodes(C::zero(), 0.0, 1.0, grid.nodes_radial, grid.nodes_angular);
    let mut out = Vec::with_capacity(2 * nodes.len());
    for chart in [Chart::A, Chart::B] {
        out.extend(nodes.iter().enumerate().map(|(i, n)| param.sample(chart, n.u, i)));
    }
    out
}

/// Coefficients of a form restricted to a curve chart: `c + a du + b dū +
/// e du∧dū`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChartForm {
    pub scalar: C,
    pub du: C,
    pub dubar: C,
    pub du_dubar: C,
}

/// Restricts a numeric form in `dζ`, `dζ̄` to the chart of `sample`.
pub fn pullback(sample: &CurveSample, mv: &Multivector) -> Result<ChartForm> {
    if let SampleSource::Chart { .. } = sample.source {
        let scale = sample.zeta.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if sample.fiber_derivative.norm() <= 1e-12 * scale.max(1.0) || !sample.jacobian.iter().all(|c| c.is_finite()) {
            return Err(Error::FiberDerivativeVanishes);
        }
    }
    pullback_jacobian(mv, &sample.jacobian)
}

/// Restricts a numeric form in `dζ`, `dζ̄` along `u ↦ ζ(u)` with `dζ/du = jac`.
pub fn pullback_jacobian(mv: &Multivector, jac: &[C]) -> Result<ChartForm> {
    let layout = mv.layout();
    let mut out = ChartForm::default();
    for (mask, c) in mv.terms() {
        let mut parts: SmallVec<[(C, C); 4]> = SmallVec::new();
        for (fam, j) in layout.names(mask) {
            let jj = jac.get(j).copied().unwrap_or_default();
            parts.push(match fam {
                DiffFamily::DZeta => (jj, C::zero()),
                DiffFamily::DZetaBar => (C::zero(), jj.conj()),
                _ => {
                    return Err(Error::InvalidInput(
                        "pullback to a curve chart takes forms in dζ, dζ̄ only".into(),
                    ))
                }
            });
        }
        match parts.as_slice() {
            [] => out.scalar += c,
            [(a, b)] => {
                out.du += c * a;
                out.dubar += c * b;
            }
            [(a1, b1), (a2, b2)] => out.du_dubar += c * (a1 * b2 - b1 * a2),
            _ => {}
        }
    }
    Ok(out)
}

/// Writes samples as CSV (`base_re, base_im, sheet, zeta…, residual`).
pub fn write_samples_csv<W: Write>(samples: &[CurveSample], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::InvalidInput(format!("csv output: {e}"));
    wr.write_record([
        "source", "base_re", "base_im", "sheet", "zeta0_re", "zeta0_im", "zeta1_re", "zeta1_im", "zeta2_re",
        "zeta2_im", "residual",
    ])
    .map_err(io)?;
    for s in samples {
        let src = match s.source {
            SampleSource::Chart { fiber, chart } => format!("fiber{fiber}-{chart:?}"),
            SampleSource::Param { chart } => format!("param-{chart:?}"),
        };
        let mut rec = vec![src, s.base.re.to_string(), s.base.im.to_string(), s.sheet.to_string()];
        for z in s.zeta {
            rec.push(z.re.to_string());
            rec.push(z.im.to_string());
        }
        rec.push(format!("{:e}", s.residual));
        wr.write_record(&rec).map_err(io)?;
    }
    wr.flush().map_err(|e| Error::InvalidInput(format!("csv output: {e}")))?;
    Ok(())
}

/// Normalizes a projective point so that its largest coordinate is 1.
pub fn normalize(z: &[C; 3]) -> [C; 3] {
    let piv = (0..3).max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm())).unwrap_or(0);
    z.map(|c| c / z[piv])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_poly, Universe};

    fn poly(s: &str) -> MultiPoly {
        parse_poly(s, Universe { n: 2 }).unwrap()
    }

    fn fermat() -> PlaneCurve {
        PlaneCurve::new(poly("zeta0^3 + zeta1^3 + zeta2^3")).unwrap()
    }

    #[test]
    fn fermat_is_smooth() {
        let c = fermat();
        assert!(c.is_smooth());
        assert_eq!(c.fiber(), 2);
        // Branch points of [ζ0:ζ1]: 1 + t³ = 0.
        let disc = c.discriminant(Projection { fiber: 2 });
        assert_eq!(disc.len(), 3);
        for b in disc {
            let t = b[1] / b[0];
            assert!((t.powu(3) + 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn cusp_singular_point() {
        let c = PlaneCurve::new(poly("zeta1^3 - zeta2^2*zeta0")).unwrap();
        assert!(!c.is_smooth());
        assert_eq!(c.singular_points().len(), 1);
        let s = normalize(&c.singular_points()[0]);
        assert!((s[0] - 1.0).norm() < 1e-10 && s[1].norm() < 1e-8 && s[2].norm() < 1e-8);
    }

    #[test]
    fn repeated_factor_rejected() {
        assert_eq!(PlaneCurve::new(poly("zeta0^2*zeta1")).unwrap_err(), Error::RepeatedFactor);
    }

    #[test]
    fn degenerate_fiber_rejected() {
        assert_eq!(PlaneCurve::with_fiber(poly("zeta0^2 + zeta1^2"), 2).unwrap_err(), Error::FiberDegenerate);
        assert_eq!(PlaneCurve::new(poly("zeta0*zeta1")).unwrap_err(), Error::FiberDegenerate);
    }

    #[test]
    fn fermat_sheets_at_origin() {
        let c = fermat();
        let roots = c.fiber_roots(Projection { fiber: 2 }, [C::one(), C::zero()]);
        assert_eq!(roots.len(), 3);
        let w = C::from_polar(1.0, 2.0 * PI / 3.0);
        for target in [-C::one(), -w, -w * w] {
            assert!(roots.iter().any(|r| (r - target).norm() < 1e-14));
        }
    }

    #[test]
    fn chart_sampling_is_polished_and_complete() {
        let c = fermat();
        let grid = GridSpec::square(12);
        for fiber in 0..3 {
            for chart in [Chart::A, Chart::B] {
                let s = chart_sample(&c, Projection { fiber }, chart, &grid).unwrap();
                assert_eq!(s.samples.len() + 3 * s.skipped.len(), 3 * s.nodes.len());
                assert!(s.samples.iter().all(|x| x.residual <= 1e-12));
            }
        }
    }

    #[test]
    fn sheet_labels_are_continuous_along_rays() {
        let c = fermat();
        let s = chart_sample(&c, Projection { fiber: 2 }, Chart::A, &GridSpec::square(24)).unwrap();
        let mut by: HashMap<(usize, usize), C> = HashMap::new();
        for x in &s.samples {
            by.insert((x.node, x.sheet), x.zeta[2]);
        }
        for x in &s.samples {
            let n = s.nodes[x.node];
            if n.radial > 0 {
                let prev = by[&(x.node - 1, x.sheet)];
                let others = (0..3).filter(|&k| k != x.sheet).map(|k| (by[&(x.node - 1, k)] - x.zeta[2]).norm());
                let closest_other = others.fold(f64::INFINITY, f64::min);
                assert!((prev - x.zeta[2]).norm() < closest_other);
            }
        }
    }

    #[test]
    fn cusp_parametrization() {
        let p = RationalParam::cusp();
        let one = C::one();
        assert_eq!(p.point(one, one), vec![one, one, one]);
        assert_eq!(p.point(one, C::new(2.0, 0.0)), vec![one, C::new(4.0, 0.0), C::new(8.0, 0.0)]);
        let bad = RationalParam::new(p.polys().to_vec(), poly("zeta1^3 + zeta2^2*zeta0"));
        assert!(bad.is_err());
    }

    #[test]
    fn cusp_chart_matches_parametrization() {
        let c = PlaneCurve::new(poly("zeta1^3 - zeta2^2*zeta0")).unwrap();
        let param = RationalParam::cusp();
        for &t in &[C::new(0.7, 0.2), C::new(-0.4, 0.9), C::new(1.3, -0.5)] {
            let zp = param.sample(Chart::A, t, 0).zeta;
            // Base [ζ0:ζ1] = [1:t²].
            let roots = c.fiber_roots(Projection { fiber: 2 }, [one(), t * t]);
            let best = roots
                .iter()
                .map(|&x| {
                    let z = [one(), t * t, x];
                    let (a, b) = (normalize(&z), normalize(&zp));
                    (0..3).map(|k| (a[k] - b[k]).norm()).fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10);
        }
    }

    fn one() -> C {
        C::one()
    }

    #[test]
    fn pullback_examples() {
        let c = fermat();
        let p = Projection { fiber: 2 };
        let t = C::new(0.3, -0.2);
        let x = c.fiber_roots(p, [one(), t])[0];
        let s = c.sample_at(p, Chart::A, t, x, 0, 0);
        // ζ0 dζ1 − ζ1 dζ0.
        let l = crate::forms::GenLayout::new(2);
        let mut mv = Multivector::zero(2);
        mv.add(l.bit(DiffFamily::DZeta, 1), s.zeta[0]);
        mv.add(l.bit(DiffFamily::DZeta, 0), -s.zeta[1]);
        assert!((pullback(&s, &mv).unwrap().du - 1.0).norm() < 1e-15);

        let s0 = c.sample_at(p, Chart::A, C::zero(), -one(), 0, 0);
        let mut d2 = Multivector::zero(2);
        d2.add(l.bit(DiffFamily::DZeta, 2), one());
        assert!(pullback(&s0, &d2).unwrap().du.norm() < 1e-15);

        let (p1, p2) = (C::new(0.4, 0.1), C::new(-1.2, 0.7));
        let mut bar = Multivector::zero(2);
        bar.add(l.bit(DiffFamily::DZetaBar, 1), p1);
        bar.add(l.bit(DiffFamily::DZetaBar, 2), p2);
        let got = pullback(&s, &bar).unwrap().dubar;
        assert!((got - (p1 + p2 * s.jacobian[2].conj())).norm() < 1e-14);
    }

    #[test]
    fn pullback_fails_at_branch_point() {
        let c = fermat();
        let p = Projection { fiber: 2 };
        let t = C::from_polar(1.0, PI / 3.0);
        let s = c.sample_at(p, Chart::A, t, C::zero(), 0, 0);
        let mut mv = Multivector::zero(2);
        mv.add(crate::forms::GenLayout::new(2).bit(DiffFamily::DZeta, 2), one());
        assert_eq!(pullback(&s, &mv).unwrap_err(), Error::FiberDerivativeVanishes);
    }
}
