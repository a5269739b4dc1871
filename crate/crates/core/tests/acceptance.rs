//! Acceptance criteria; one line per criterion, non-zero exit on failure.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::time::Instant;

use koppelman::algebra::{parse_poly, parse_rational, Universe};
use koppelman::curves::{GridSpec, PlaneCurve, RationalParam};
use koppelman::forms::{DiffFamily, FormExpr, Multivector};
use koppelman::hefer::{cusp_polynomial, cusp_variants, KoszulData};
use koppelman::kernels::{
    assemble_plane_kernel, assemble_pn_curve_kernel, assemble_pn_kernel, KernelEval, PnWeight,
};
use koppelman::numeric::Env;
use koppelman::operators::{
    extend_section, koppelman_selftest, pn_obstruction, pn_solve, solve_dbar_curve, LineOperators,
    SectionRep, GLOBAL_SIGN, MIN_CONVERGENCE_SLOPE,
};
use koppelman::suite::{fermat_point, verify_suite, FERMAT};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex64;

struct Outcome {
    passed: bool,
    detail: String,
}

fn fermat() -> PlaneCurve {
    PlaneCurve::new(parse_poly(FERMAT, Universe::new(2)).unwrap()).unwrap()
}

fn psi(s: i64) -> SectionRep {
    SectionRep::parse_function(&format!("zeta0^{}*Zeta0/(zeta0*Zeta0 + zeta1*Zeta1 + zeta2*Zeta2)", s + 1), 2).unwrap()
}

fn grids(ns: &[usize]) -> Vec<GridSpec> {
    ns.iter().map(|&n| GridSpec::square(n)).collect()
}

/// Least-squares `−d log r / d log n`.
fn slope(ns: &[usize], rs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -sxy / sxx
}

fn rc(rng: &mut ChaCha8Rng) -> C {
    C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn identities() -> Outcome {
    let r = verify_suite(3, 20, 1);
    let failed: Vec<&str> = r
        .residuals
        .iter()
        .filter(|m| m.tolerance.is_some_and(|t| m.value > t))
        .map(|m| m.name.as_str())
        .collect();
    let cusp = r.notes.iter().find(|n| n.contains("for f")).cloned().unwrap_or_default();
    Outcome {
        passed: r.passed && failed.is_empty(),
        detail: format!("{} identities, {} violated; {cusp}", r.residuals.len(), failed.len()),
    }
}

/// `α^κ/(2πi) [z2² + αz2ζ2 + α²ζ2² − (ζ̄2/|ζ|²)(Σ z_j²ζ_j + α Σ z_jζ_j²)] / ((ζ1z0 − ζ0z1) 3ζ2²)`
fn fermat_closed_form(kappa: u32, zeta: &[C; 3], z: &[C; 3]) -> C {
    let n2: f64 = zeta.iter().map(|c| c.norm_sqr()).sum();
    let a: C = (0..3).map(|j| z[j] * zeta[j].conj()).sum::<C>() / n2;
    let q: C = (0..3).map(|j| z[j] * z[j] * zeta[j]).sum();
    let r: C = (0..3).map(|j| z[j] * zeta[j] * zeta[j]).sum();
    let br = z[2] * z[2] + a * z[2] * zeta[2] + a * a * zeta[2] * zeta[2] - zeta[2].conj() / n2 * (q + a * r);
    a.powu(kappa) * br / (C::new(0.0, TAU) * (zeta[1] * z[0] - zeta[0] * z[1]) * 3.0 * zeta[2] * zeta[2])
}

fn fermat_regression() -> Outcome {
    let curve = fermat();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for s in 1..=3 {
        let k = assemble_plane_kernel(&curve, s).unwrap();
        for _ in 0..100 {
            let zeta = fermat_point(&mut rng);
            let z = fermat_point(&mut rng);
            let got = k.k_scalar(&zeta, &z).unwrap();
            let want = fermat_closed_form(k.kappa(), &zeta, &z);
            worst = worst.max((got - want).norm() / want.norm());
        }
    }
    Outcome {
        passed: worst <= 1e-12,
        detail: format!("max relative deviation {worst:.2e} over 300 pairs (s = 1..3), K sign +, P sign {GLOBAL_SIGN:+}"),
    }
}

fn koppelman_identity() -> Outcome {
    let ns = [8, 16, 32, 64];
    let mut ok = true;
    let mut parts = Vec::new();
    for s in 1..=2 {
        match koppelman_selftest(&fermat(), s, &psi(s), &grids(&ns), 1e-3) {
            Ok(rec) => {
                let res = rec.winning_residuals();
                let sl = slope(&ns, &res);
                let losing = rec.levels.last().map(|l| l.residual_plus.max(l.residual_minus)).unwrap();
                ok &= rec.sign == GLOBAL_SIGN && res[3] <= 1e-3 && sl >= 1.0 && losing > 0.1;
                parts.push(format!("s={s}: {:.2e} at 64 (slope {sl:.2}, losing sign {losing:.2})", res[3]));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("s={s}: {e}"));
            }
        }
    }
    Outcome {
        passed: ok,
        detail: parts.join("; "),
    }
}

fn dbar_solver() -> Outcome {
    let ns = [8, 16, 32, 64];
    let mut ok = true;
    let mut parts = Vec::new();
    let data = KoszulData::new(2, vec![parse_poly(FERMAT, Universe::new(2)).unwrap()]).unwrap();
    for s in 1..=2 {
        let l = data.degree_ledger(s, 1);
        let phi = psi(s).dbar().unwrap();
        let res: Vec<f64> = ns
            .iter()
            .map(|&n| solve_dbar_curve(&fermat(), s, &phi, GridSpec::square(n), 6).map_or(f64::INFINITY, |u| u.dbar_residual))
            .collect();
        let sl = slope(&ns, &res);
        ok &= l.solvable && res[3] <= 1e-2 && sl >= 1.0;
        parts.push(format!("s={s}: {:.2e} at 64 (slope {sl:.2}, reg {}, threshold {})", res[3], l.reg, l.threshold));
    }
    Outcome {
        passed: ok,
        detail: parts.join("; "),
    }
}

fn extension() -> Outcome {
    let z0 = SectionRep::parse_function("zeta0", 2).unwrap();
    match extend_section(&fermat(), 1, &z0, GridSpec::square(64), 1e-6) {
        Ok(e) => {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let fresh = (0..50)
                .map(|_| {
                    let p = fermat_point(&mut rng);
                    (e.eval(&p) - p[0]).norm() / p[0].norm()
                })
                .fold(0.0, f64::max);
            Outcome {
                passed: e.on_curve_agreement <= 1e-6 && e.fit_residual <= 1e-6 && fresh <= 1e-6,
                detail: format!(
                    "on-curve {:.2e}, fit {:.2e}, restriction to 50 fresh points {fresh:.2e}",
                    e.on_curve_agreement, e.fit_residual
                ),
            }
        }
        Err(e) => Outcome {
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn ambient_line() -> Outcome {
    let g128 = GridSpec::square(128);
    let mut parts = Vec::new();
    // (a) manufactured solve for O(0)
    let psi0 = SectionRep::parse_function("zeta0*Zeta1/(zeta0*Zeta0 + zeta1*Zeta1)", 1).unwrap();
    let a = pn_solve(1, 0, 1, &psi0.dbar().unwrap(), Some(&psi0), None, g128).unwrap();
    let ra = a.koppelman_residual.unwrap();
    let pass_a = ra <= 1e-6;
    parts.push(format!("(a) {ra:.2e}"));
    // (b) P vanishes on (0,1)-forms for the alpha weight
    let ops = LineOperators::new(0, 1, PnWeight::Alpha, GridSpec::square(16)).unwrap();
    let pv = ops.apply_p(&psi0.dbar().unwrap(), &[C::new(1.0, 0.0), C::new(0.3, 0.2)]).unwrap();
    let pass_b = ops.kernel.projection_vanishes(1) && pv.max_abs() == 0.0 && a.obstruction_term == 0.0;
    parts.push(format!("(b) P-term {}", if pass_b { "identically 0" } else { "nonzero" }));
    // (c) beta weight, ℓ = −2
    let psi2 = SectionRep::parse_function("Zeta0*Zeta1/(zeta0*Zeta0 + zeta1*Zeta1)^2", 1).unwrap();
    let phi2 = psi2.dbar().unwrap();
    let c0 = pn_solve(1, -2, 1, &phi2, Some(&psi2), None, g128).unwrap();
    let m0 = pn_obstruction(1, -2, &phi2, g128).unwrap()[0].norm();
    let u = Universe::new(1);
    let den = "(-pi2i*(zeta0*Zeta0 + zeta1*Zeta1)^2)";
    let unit = SectionRep::symbolic(FormExpr::one_form(
        1,
        DiffFamily::DZetaBar,
        &[parse_rational(&format!("-Zeta1/{den}"), u).unwrap(), parse_rational(&format!("Zeta0/{den}"), u).unwrap()],
    ))
    .unwrap();
    // In the chart [1:t] the pairing is ∫ dA/(π(1 + |t|²)²) = 1.
    let m1 = pn_obstruction(1, -2, &unit, g128).unwrap()[0];
    let ns = [16, 32, 64, 128];
    let r1: Vec<f64> = ns
        .iter()
        .map(|&n| pn_solve(1, -2, 1, &unit, None, None, GridSpec::square(n)).unwrap().dbar_residual)
        .collect();
    let s1 = slope(&ns, &r1);
    let pass_c = c0.dbar_residual <= 1e-5
        && c0.koppelman_residual.unwrap() <= 1e-5
        && m0 <= 1e-8
        && (m1 - 1.0).norm() <= 1e-8
        && m1.norm() >= 0.1
        && s1 < MIN_CONVERGENCE_SLOPE;
    parts.push(format!(
        "(c) zero moment {m0:.1e}: residual {:.2e}; unit moment {:.6}: residual {:.3} at 128, slope {s1:.2}",
        c0.dbar_residual,
        m1.norm(),
        r1[3]
    ));
    Outcome {
        passed: pass_a && pass_b && pass_c,
        detail: parts.join("; "),
    }
}

/// `(1/2πi)(τ⁶ − t⁶)/((τ² − t²)(τ³ − t³)τ²)`
fn cusp_leading(tau: C, t: C) -> C {
    (tau.powu(6) - t.powu(6)) / ((tau * tau - t * t) * (tau.powu(3) - t.powu(3)) * tau * tau * C::new(0.0, TAU))
}

fn cusp() -> Outcome {
    let curve = PlaneCurve::new(cusp_polynomial()).unwrap();
    let h = cusp_variants().into_iter().find(|v| v.satisfies_for_f).unwrap();
    let k = KernelEval::with_hefer(&curve, 1, h.hefer).unwrap();
    let param = RationalParam::cusp();
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [C::new(0.4, 0.3), C::new(-0.1, 0.05), C::new(0.0, 0.8)] {
        let dir = C::from_polar(1.0, 0.7);
        let mut prev = f64::INFINITY;
        let mut last = (0.0, 0.0);
        for e in [1e-1, 1e-2, 1e-3] {
            let tau = t + dir * e;
            let kt = k.param_kernel(&param, tau, t).unwrap();
            let kl = cusp_leading(tau, t);
            let d = ((kt - kl) * (tau - t)).norm();
            ok &= d < prev;
            prev = d;
            last = (d, (kl * (tau - t)).norm());
        }
        ok &= last.0 <= 0.1 * last.1;
        parts.push(format!("|t|={:.2}: {:.1e}/{:.1e}", t.norm(), last.0, last.1));
    }
    Outcome {
        passed: ok,
        detail: format!("variant `{}`; {}", "telescoping", parts.join(", ")),
    }
}

/// Relative defect of `F(λζ, μz) = λ^a μ^b F(ζ, z)` with differentials rescaled.
fn defect(f: impl Fn(&[C], &[C]) -> Multivector, zeta: &[C], z: &[C], a: i32, b: i32) -> f64 {
    let (l, m) = (C::new(0.8, -0.5), C::new(-0.6, 1.3));
    let lz: Vec<C> = zeta.iter().map(|c| l * c).collect();
    let mz: Vec<C> = z.iter().map(|c| m * c).collect();
    let (base, scaled) = (f(zeta, z), f(&lz, &mz));
    let lay = base.layout();
    let factor = l.powi(a) * m.powi(b);
    let masks: BTreeSet<u64> = base.terms().chain(scaled.terms()).map(|(k, _)| k).collect();
    let mut d: f64 = 0.0;
    for mask in masks {
        let g: C = lay
            .names(mask)
            .iter()
            .map(|(fam, _)| match fam {
                DiffFamily::DZeta => l,
                DiffFamily::DZetaBar => l.conj(),
                DiffFamily::DZBar => m.conj(),
                DiffFamily::DW => C::new(1.0, 0.0),
            })
            .product();
        d = d.max((scaled.get(mask) * g - base.get(mask) * factor).norm());
    }
    d / (base.max_abs() * factor.norm())
}

fn homogeneity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut record = |d: f64| {
        worst = worst.max(d);
        count += 1;
    };
    let smooth_quartic = "zeta0^4 + zeta1^4 + zeta2^4 + zeta0*zeta1*zeta2^2";
    for (f, ss) in [(FERMAT, 1..=3), (smooth_quartic, 2..=3), ("zeta1^3 - zeta2^2*zeta0", 1..=2)] {
        let curve = PlaneCurve::new(parse_poly(f, Universe::new(2)).unwrap()).unwrap();
        for s in ss {
            let k = assemble_plane_kernel(&curve, s).unwrap();
            let s = s as i32;
            let zeta = [rc(&mut rng), rc(&mut rng), rc(&mut rng)];
            let z = [rc(&mut rng), rc(&mut rng), rc(&mut rng)];
            let kf = |a: &[C], b: &[C]| k.kernel_form(&[a[0], a[1], a[2]], &[b[0], b[1], b[2]]).unwrap();
            record(defect(kf, &zeta, &z, -s, s));
            let phi = psi(s as i64).dbar().unwrap();
            let integrand = |a: &[C], b: &[C]| kf(a, b).wedge(&phi.eval(a));
            record(defect(integrand, &zeta, &z, 0, s));
        }
    }
    for (n, ell, w) in [(1, 0, PnWeight::Alpha), (1, 2, PnWeight::Alpha), (1, -2, PnWeight::Beta), (2, 0, PnWeight::Alpha), (2, -3, PnWeight::Beta)] {
        let k = assemble_pn_kernel(n, ell, w).unwrap();
        let zeta: Vec<C> = (0..=n).map(|_| rc(&mut rng)).collect();
        let z: Vec<C> = (0..=n).map(|_| rc(&mut rng)).collect();
        for q in 0..=n {
            let (sol, proj) = k.compile(q);
            for part in [&sol, &proj] {
                if part.is_empty() {
                    continue;
                }
                let f = |a: &[C], b: &[C]| part.eval(&Env::zeta_z(a, b));
                record(defect(f, &zeta, &z, -(ell as i32), ell as i32));
            }
        }
    }
    let q = |s: &str| parse_poly(s, Universe::new(3)).unwrap();
    let data = KoszulData::new(3, vec![q("zeta0^2 + zeta1^2 + zeta2^2 + zeta3^2"), q("zeta0^2 + 2*zeta1^2 + 3*zeta2^2 + 4*zeta3^2")]).unwrap();
    let k = assemble_pn_curve_kernel(&data, 1).unwrap();
    let zeta: Vec<C> = (0..4).map(|_| rc(&mut rng)).collect();
    let z: Vec<C> = (0..4).map(|_| rc(&mut rng)).collect();
    record(defect(|a, b| k.kernel_form(a, b).unwrap(), &zeta, &z, -1, 1));
    Outcome {
        passed: worst <= 1e-12,
        detail: format!("{count} kernels and integrands, max relative defect {worst:.2e}"),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("exact identity suite", identities),
        ("Fermat kernel regression", fermat_regression),
        ("Koppelman identity on the Fermat cubic", koppelman_identity),
        ("dbar-solver on the Fermat cubic", dbar_solver),
        ("extension operator", extension),
        ("ambient P1 suite", ambient_line),
        ("cusp comparison", cusp),
        ("homogeneity and descent", homogeneity),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        failures += usize::from(!o.passed);
        println!(
            "criterion {} {}: {} ({}; {:.1}s)",
            i + 1,
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
