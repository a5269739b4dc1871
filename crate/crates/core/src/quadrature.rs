//! Quadrature on plane curves and on `P¹`: a smooth partition of unity over
//! the chart cover, plus a polar patch centred on each singular target.

use num_complex::Complex64;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::curves::{chart_sample, chordal, Chart, CurveSample, GridSpec, PlaneCurve, Projection};
use crate::numeric::gauss_legendre;
use crate::{Error, Result};

type C = Complex64;

/// `∫ c du∧dū = −2i ∫ c dA`.
pub const AREA_FACTOR: C = C::new(0.0, -2.0);

pub const PATCH_LEVELS: usize = 3;
pub const ANGULAR_OVERSAMPLING: usize = 8;
pub const PARTITION_POWER: i32 = 4;
pub const MAX_PATCH_RADIUS: f64 = 0.8;

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(xs: &[C]) -> C {
    if xs.len() <= 8 {
        return xs.iter().fold(C::zero(), |a, b| a + b);
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn bump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Smooth cutoff, 1 at `r = 0` and 0 for `r ≥ ρ`.
pub fn cutoff(r: f64, rho: f64) -> f64 {
    let x = (rho - r) / rho;
    if x >= 1.0 {
        return 1.0;
    }
    let (a, b) = (bump(x), bump(1.0 - x));
    a / (a + b)
}

/// Radii, weights (`r dr`) of the dyadic radial rule on `[0, ρ]`.
fn patch_radii(rho: f64, n_r: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(PATCH_LEVELS * n_r);
    let mut edges = vec![0.0];
    for l in (0..PATCH_LEVELS).rev() {
        edges.push(rho / f64::from(1u32 << l));
    }
    for w in edges.windows(2) {
        let (rs, ws) = gauss_legendre(n_r, w[0], w[1]);
        out.extend(rs.into_iter().zip(ws).map(|(r, w)| (r, w * r)));
    }
    out
}

#[derive(Clone, Debug)]
pub struct WeightedSample {
    pub sample: CurveSample,
    pub weight: f64,
}

/// Global nodes: every non-degenerate projection, both charts, weighted by
/// `|∂f/∂ζ_i|^{2m} / Σ_j |∂f/∂ζ_j|^{2m}`.
#[derive(Clone, Debug)]
pub struct CurveGrid {
    pub spec: GridSpec,
    pub projections: Vec<Projection>,
    pub nodes: Vec<WeightedSample>,
    pub skipped: usize,
}

/// Polar refinement around a target point on its own sheet.
#[derive(Clone, Debug)]
pub struct TargetPatch {
    /// Chart-normalized target.
    pub z: [C; 3],
    pub projection: Projection,
    pub chart: Chart,
    pub center: C,
    pub radius: f64,
    pub nodes: Vec<WeightedSample>,
    /// Global node index and the factor `1 − χ_T` applied to it.
    pub modifiers: Vec<(usize, f64)>,
}

impl CurveGrid {
    pub fn new(curve: &PlaneCurve, spec: GridSpec) -> Result<Self> {
        let projections: Vec<Projection> = (0..3)
            .map(|fiber| Projection { fiber })
            .filter(|p| !curve.is_degenerate(*p))
            .collect();
        let mut nodes = Vec::new();
        let mut skipped = 0;
        for &p in &projections {
            for chart in [Chart::A, Chart::B] {
                let s = chart_sample(curve, p, chart, &spec)?;
                skipped += s.skipped.len();
                for sample in s.samples {
                    let chi = partition_weight(curve, &projections, p, &sample.zeta);
                    if chi < 1e-16 {
                        continue;
                    }
                    nodes.push(WeightedSample {
                        weight: s.nodes[sample.node].area * chi,
                        sample,
                    });
                }
            }
        }
        Ok(Self {
            spec,
            projections,
            nodes,
            skipped,
        })
    }

    /// Builds the polar patch for `z ∈ X`.
    pub fn patch(&self, curve: &PlaneCurve, z: &[C; 3]) -> Result<TargetPatch> {
        let g = curve.grad_at(z);
        let p = *self
            .projections
            .iter()
            .max_by(|a, b| g[a.fiber].norm().total_cmp(&g[b.fiber].norm()))
            .ok_or(Error::FiberDegenerate)?;
        let base = p.project(z);
        let (chart, scale) = if base[0].norm() >= base[1].norm() {
            (Chart::A, base[0])
        } else {
            (Chart::B, base[1])
        };
        let zn = z.map(|c| c / scale);
        let t = chart.coordinate(p.project(&zn)).ok_or(Error::PointOnX)?;
        let rho = (0.5 * curve.discriminant_distance(p, chart, t)).min(MAX_PATCH_RADIUS);
        if rho < 1e-3 {
            return Err(Error::TargetNearDiscriminant);
        }
        let x_t = zn[p.fiber];
        let radii = patch_radii(rho, self.spec.nodes_radial);
        let n_theta = ANGULAR_OVERSAMPLING * self.spec.nodes_angular;
        let dth = std::f64::consts::TAU / n_theta as f64;
        let rays: Vec<Result<Vec<WeightedSample>>> = (0..n_theta)
            .into_par_iter()
            .map(|k| {
                let e = C::from_polar(1.0, (k as f64 + 0.5) * dth);
                let us: Vec<C> = radii.iter().map(|&(r, _)| t + e * r).collect();
                let xs = curve.track_sheet(p, chart, t, x_t, &us).ok_or_else(|| {
                    Error::ContinuationBreak(format!("target patch ray {k} at {:.6}{:+.6}i", t.re, t.im))
                })?;
                Ok(radii
                    .iter()
                    .zip(us.iter().zip(xs))
                    .enumerate()
                    .map(|(i, (&(r, w), (&u, x)))| WeightedSample {
                        sample: curve.sample_at(p, chart, u, x, k * radii.len() + i, 0),
                        weight: w * dth * cutoff(r, rho),
                    })
                    .collect())
            })
            .collect();
        let mut nodes = Vec::with_capacity(n_theta * radii.len());
        for r in rays {
            nodes.extend(r?);
        }
        let modifiers = self
            .nodes
            .par_iter()
            .enumerate()
            .filter_map(|(idx, node)| {
                let u = chart.coordinate(p.project(&node.sample.zeta))?;
                let r = (u - t).norm();
                if r >= rho {
                    return None;
                }
                let x = curve.track_sheet(p, chart, t, x_t, &[u])?[0];
                let on = p.lift(chart.base(u), x);
                (chordal(&on, &node.sample.zeta) < 1e-6).then(|| (idx, 1.0 - cutoff(r, rho)))
            })
            .collect();
        Ok(TargetPatch {
            z: zn,
            projection: p,
            chart,
            center: t,
            radius: rho,
            nodes,
            modifiers,
        })
    }

    /// `∫_X F du∧dū` for the `du∧dū`-coefficients returned by `f`, with the
    /// patch replacing the global nodes near its target.
    pub fn integrate<F>(&self, patch: Option<&TargetPatch>, len: usize, f: F) -> Vec<C>
    where
        F: Fn(&CurveSample) -> Vec<C>,
    {
        let mut terms: Vec<Vec<C>> = vec![Vec::with_capacity(self.nodes.len()); len];
        let mods: &[(usize, f64)] = patch.map_or(&[], |p| &p.modifiers);
        let mut m = 0;
        for (idx, node) in self.nodes.iter().enumerate() {
            let mut w = node.weight;
            if m < mods.len() && mods[m].0 == idx {
                w *= mods[m].1;
                m += 1;
            }
            if w == 0.0 {
                continue;
            }
            push_terms(&mut terms, w, f(&node.sample));
        }
        if let Some(p) = patch {
            for node in &p.nodes {
                if node.weight != 0.0 {
                    push_terms(&mut terms, node.weight, f(&node.sample));
                }
            }
        }
        terms.iter().map(|t| AREA_FACTOR * pairwise_sum(t)).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

fn push_terms(terms: &mut [Vec<C>], w: f64, vals: Vec<C>) {
    for (t, v) in terms.iter_mut().zip(vals) {
        t.push(v * w);
    }
}

/// `χ_i(ζ)` of the partition of unity subordinate to the projections.
pub fn partition_weight(curve: &PlaneCurve, projections: &[Projection], p: Projection, zeta: &[C; 3]) -> f64 {
    let g = curve.grad_at(zeta);
    let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let m = |i: usize| (g[i].norm() / scale).powi(2 * PARTITION_POWER);
    let total: f64 = projections.iter().map(|q| m(q.fiber)).sum();
    m(p.fiber) / total
}

/// A point of `P¹` in one of the charts `[1:u]`, `[u:1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSample {
    pub chart: Chart,
    pub u: C,
    pub zeta: [C; 2],
    /// `dζ/du`.
    pub jacobian: [C; 2],
}

impl LineSample {
    pub fn new(chart: Chart, u: C) -> Self {
        let (zeta, jacobian) = match chart {
            Chart::A => ([C::one(), u], [C::zero(), C::one()]),
            Chart::B => ([u, C::one()], [C::one(), C::zero()]),
        };
        Self { chart, u, zeta, jacobian }
    }

    /// The chart in which `|u| ≤ 1`, with the normalized representative.
    pub fn of_point(z: &[C; 2]) -> Self {
        if z[0].norm() >= z[1].norm() {
            Self::new(Chart::A, z[1] / z[0])
        } else {
            Self::new(Chart::B, z[0] / z[1])
        }
    }
}

#[derive(Clone, Debug)]
pub struct LineWeighted {
    pub sample: LineSample,
    pub weight: f64,
}

/// Unit disks in both charts of `P¹`.
#[derive(Clone, Debug)]
pub struct LineGrid {
    pub spec: GridSpec,
    pub nodes: Vec<LineWeighted>,
}

#[derive(Clone, Debug)]
pub struct LinePatch {
    pub target: LineSample,
    pub radius: f64,
    pub nodes: Vec<LineWeighted>,
    pub modifiers: Vec<(usize, f64)>,
}

impl LineGrid {
    pub fn new(spec: GridSpec) -> Self {
        let mut nodes = Vec::new();
        for chart in [Chart::A, Chart::B] {
            for n in crate::curves::polar_nodes(C::zero(), 0.0, 1.0, spec.nodes_radial, spec.nodes_angular) {
                nodes.push(LineWeighted {
                    sample: LineSample::new(chart, n.u),
                    weight: n.area,
                });
            }
        }
        Self { spec, nodes }
    }

    pub fn patch(&self, z: &[C; 2]) -> LinePatch {
        let target = LineSample::of_point(z);
        let (t, chart) = (target.u, target.chart);
        let rho = MAX_PATCH_RADIUS;
        let radii = patch_radii(rho, self.spec.nodes_radial);
        let n_theta = ANGULAR_OVERSAMPLING * self.spec.nodes_angular;
        let dth = std::f64::consts::TAU / n_theta as f64;
        let mut nodes = Vec::with_capacity(n_theta * radii.len());
        for k in 0..n_theta {
            let e = C::from_polar(1.0, (k as f64 + 0.5) * dth);
            for &(r, w) in &radii {
                nodes.push(LineWeighted {
                    sample: LineSample::new(chart, t + e * r),
                    weight: w * dth * cutoff(r, rho),
                });
            }
        }
        let modifiers = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(idx, n)| {
                let u = if n.sample.chart == chart {
                    n.sample.u
                } else if n.sample.u.norm() > 1e-300 {
                    n.sample.u.inv()
                } else {
                    return None;
                };
                let r = (u - t).norm();
                (r < rho).then(|| (idx, 1.0 - cutoff(r, rho)))
            })
            .collect();
        LinePatch {
            target,
            radius: rho,
            nodes,
            modifiers,
        }
    }

    pub fn integrate<F>(&self, patch: Option<&LinePatch>, len: usize, f: F) -> Vec<C>
    where
        F: Fn(&LineSample) -> Vec<C>,
    {
        let mut terms: Vec<Vec<C>> = vec![Vec::with_capacity(self.nodes.len()); len];
        let mods: &[(usize, f64)] = patch.map_or(&[], |p| &p.modifiers);
        let mut m = 0;
        for (idx, node) in self.nodes.iter().enumerate() {
            let mut w = node.weight;
            if m < mods.len() && mods[m].0 == idx {
                w *= mods[m].1;
                m += 1;
            }
            if w == 0.0 {
                continue;
            }
            push_terms(&mut terms, w, f(&node.sample));
        }
        if let Some(p) = patch {
            for node in &p.nodes {
                if node.weight != 0.0 {
                    push_terms(&mut terms, node.weight, f(&node.sample));
                }
            }
        }
        terms.iter().map(|t| AREA_FACTOR * pairwise_sum(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_poly, Universe};

    fn fermat() -> PlaneCurve {
        PlaneCurve::new(parse_poly("zeta0^3 + zeta1^3 + zeta2^3", Universe { n: 2 }).unwrap()).unwrap()
    }

    /// `∂_u∂_ū log|ζ(u)|²` for a holomorphic curve `u ↦ ζ(u)`.
    fn fs_density(zeta: &[C], jac: &[C]) -> f64 {
        let n2: f64 = zeta.iter().map(|c| c.norm_sqr()).sum();
        let j2: f64 = jac.iter().map(|c| c.norm_sqr()).sum();
        let ip: C = zeta.iter().zip(jac).map(|(a, b)| a.conj() * b).sum();
        (n2 * j2 - ip.norm_sqr()) / (n2 * n2)
    }

    #[test]
    fn cutoff_is_a_smooth_step() {
        assert_eq!(cutoff(0.0, 1.0), 1.0);
        assert_eq!(cutoff(1.0, 1.0), 0.0);
        assert!((cutoff(0.5, 1.0) - 0.5).abs() < 1e-15);
        assert!(cutoff(0.6, 1.0) > cutoff(0.7, 1.0));
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<C> = (0..1000).map(|k| C::new(k as f64, -(k as f64) * 0.5)).collect();
        let s = pairwise_sum(&xs);
        assert_eq!(s, C::new(499500.0, -249750.0));
    }

    #[test]
    fn partition_sums_to_one() {
        let c = fermat();
        let ps: Vec<Projection> = (0..3).map(|fiber| Projection { fiber }).collect();
        let zeta = [C::one(), C::new(0.3, 0.2), C::zero()];
        let x = c.fiber_roots(ps[2], [zeta[0], zeta[1]])[0];
        let zeta = [zeta[0], zeta[1], x];
        let total: f64 = ps.iter().map(|&p| partition_weight(&c, &ps, p, &zeta)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn line_area_is_fubini_study_volume() {
        // ∫_{P¹} (i/2π)∂∂̄log|ζ|² = 1.
        let g = LineGrid::new(GridSpec::square(24));
        let v = g.integrate(None, 1, |s| vec![C::new(fs_density(&s.zeta, &s.jacobian), 0.0)])[0];
        let v = v * C::new(0.0, 1.0) / std::f64::consts::TAU;
        assert!((v - 1.0).norm() < 1e-10, "{v}");
    }

    #[test]
    fn curve_degree_from_fubini_study_volume() {
        let c = fermat();
        let mut errs = Vec::new();
        for n in [16, 32] {
            let g = CurveGrid::new(&c, GridSpec::square(n)).unwrap();
            let v = g.integrate(None, 1, |s| vec![C::new(fs_density(&s.zeta, &s.jacobian), 0.0)])[0];
            let v = v * C::new(0.0, 1.0) / std::f64::consts::TAU;
            errs.push((v - 3.0).norm());
        }
        assert!(errs[1] < 1e-6, "{errs:?}");
        assert!(errs[1] < errs[0]);
    }

    #[test]
    fn patch_reproduces_smooth_integral() {
        let c = fermat();
        let g = CurveGrid::new(&c, GridSpec::square(32)).unwrap();
        let s = &g.nodes[g.nodes.len() / 3].sample;
        let z = s.zeta;
        let patch = g.patch(&c, &z).unwrap();
        assert!(!patch.modifiers.is_empty());
        let f = |s: &CurveSample| vec![C::new(fs_density(&s.zeta, &s.jacobian), 0.0)];
        let a = g.integrate(None, 1, f)[0];
        let b = g.integrate(Some(&patch), 1, f)[0];
        assert!((a - b).norm() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn line_patch_reproduces_smooth_integral() {
        let g = LineGrid::new(GridSpec::square(32));
        let p = g.patch(&[C::new(0.4, 0.1), C::new(-0.9, 0.2)]);
        let f = |s: &LineSample| vec![C::new(fs_density(&s.zeta, &s.jacobian), 0.0)];
        let a = g.integrate(None, 1, f)[0];
        let b = g.integrate(Some(&p), 1, f)[0];
        assert!((a - b).norm() < 1e-5, "{a} vs {b}");
    }
}
