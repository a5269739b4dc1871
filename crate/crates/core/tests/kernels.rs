use koppelman::algebra::{parse_poly, Family, Universe};
use koppelman::curves::PlaneCurve;
use koppelman::hefer::hefer_decompose;
use koppelman::kernels::{assemble_plane_kernel, cusp_leading_reference, diagonal_factor, principal_remainder_split};
use koppelman::numeric::{CompiledPoly, Env};
use koppelman::operators::monomials;
use koppelman::suite::{fermat_point, FERMAT};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex64;

const CUBIC: &str = "zeta0^3 + zeta1^3 + zeta2^3 - 2*zeta0*zeta1*zeta2";

fn rc(rng: &mut ChaCha8Rng) -> C {
    C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn curve(f: &str) -> PlaneCurve {
    PlaneCurve::new(parse_poly(f, Universe::new(2)).unwrap()).unwrap()
}

/// A point of `f = 0` with `ζ0 = 1`, `ζ1` random, by Newton in `ζ2`.
fn point_on(f: &str, rng: &mut ChaCha8Rng) -> [C; 3] {
    let c = curve(f);
    let z1 = rc(rng);
    let mut z = [C::new(1.0, 0.0), z1, rc(rng)];
    for _ in 0..100 {
        let g = c.grad_at(&z)[2];
        z[2] -= c.eval(&z) / g;
    }
    assert!(c.eval(&z).norm() < 1e-12);
    z
}

#[test]
fn hefer_diagonal_is_fiber_derivative() {
    // 2πi h_2(ζ, ζ) = ∂f/∂ζ2, against central differences of f
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for f in [FERMAT, CUBIC] {
        let p = parse_poly(f, Universe::new(2)).unwrap();
        let h = hefer_decompose(&p, 2).unwrap();
        let h2 = CompiledPoly::new(&h.h[2]);
        let fc = CompiledPoly::new(&p);
        for _ in 0..10 {
            let zeta = [rc(&mut rng), rc(&mut rng), rc(&mut rng)];
            let mut env = Env::new();
            env.set_family(Family::W, &zeta).set_family(Family::Z, &zeta);
            let got = h2.eval(&env) * C::new(0.0, std::f64::consts::TAU);
            let e = 1e-5;
            let at = |d: f64| {
                let mut env = Env::new();
                env.set_family(Family::Zeta, &[zeta[0], zeta[1], zeta[2] + d]);
                fc.eval(&env)
            };
            let want = (at(e) - at(-e)) / (2.0 * e);
            assert!((got - want).norm() < 1e-8 * (1.0 + want.norm()), "{f}: {got} vs {want}");
        }
    }
}

#[test]
fn remainder_is_holomorphic_in_z_and_bounded() {
    let c = curve(CUBIC);
    let k = principal_remainder_split(&c, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let zeta = point_on(CUBIC, &mut rng);
    let z = [C::new(1.0, 0.0), rc(&mut rng), rc(&mut rng)];
    let h = 1e-5;
    for j in 1..3 {
        let shift = |d: C| {
            let mut w = z;
            w[j] += d;
            k.remainder(&zeta, &w)
        };
        let dbar = (shift(C::new(h, 0.0)) - shift(C::new(-h, 0.0))
            + C::i() * (shift(C::new(0.0, h)) - shift(C::new(0.0, -h))))
            / (4.0 * h);
        assert!(dbar.norm() < 1e-7 * (1.0 + k.remainder(&zeta, &z).norm()), "j={j}: {dbar}");
    }
    let near: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&e| {
            let mut w = zeta;
            w[1] += e;
            w[2] = point_at(CUBIC, w[1], zeta[2]);
            k.remainder(&zeta, &w).norm()
        })
        .collect();
    let (lo, hi) = near.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi < 10.0 * lo.max(1e-12) || hi < 1.0, "{near:?}");
}

fn point_at(f: &str, z1: C, guess: C) -> C {
    let c = curve(f);
    let mut z = [C::new(1.0, 0.0), z1, guess];
    for _ in 0..100 {
        z[2] -= c.eval(&z) / c.grad_at(&z)[2];
    }
    z[2]
}

#[test]
fn kernel_times_diagonal_factor_is_continuous() {
    let c = curve(FERMAT);
    let k = assemble_plane_kernel(&c, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zeta = fermat_point(&mut rng);
    let mut prev = f64::INFINITY;
    let at = |e: f64| {
        let mut w = zeta;
        w[1] += e;
        w[2] = point_at(FERMAT, w[1], zeta[2]);
        k.scalar(&zeta, &w) * diagonal_factor(&zeta, &w)
    };
    let limit = at(1e-7);
    for e in [1e-1, 1e-2, 1e-3, 1e-4] {
        let d = (at(e) - limit).norm();
        assert!(d < prev, "{e}: {d}");
        prev = d;
    }
    assert!(prev < 1e-3 * limit.norm());
}

#[test]
fn projection_kernel_is_polynomial_in_z() {
    for s in 1..=2i64 {
        let c = curve(FERMAT);
        let k = assemble_plane_kernel(&c, s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4 + s as u64);
        let zeta = fermat_point(&mut rng);
        let exps = monomials(2, s as u32);
        let zs: Vec<[C; 3]> = (0..3 * exps.len()).map(|_| [rc(&mut rng), rc(&mut rng), rc(&mut rng)]).collect();
        let forms: Vec<_> = zs.iter().map(|z| k.projection_form(&zeta, z, 2).unwrap()).collect();
        let a = DMatrix::from_fn(zs.len(), exps.len(), |r, col| {
            (0..3).map(|j| zs[r][j].powu(exps[col][j])).product::<C>()
        });
        let masks: Vec<u64> = forms[0].terms().map(|(m, _)| m).collect();
        assert!(!masks.is_empty());
        for m in masks {
            let b = DVector::from_iterator(zs.len(), forms.iter().map(|f| f.get(m)));
            if b.norm() == 0.0 {
                continue;
            }
            let x = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
            let res = (&a * &x - &b).norm() / b.norm();
            assert!(res < 1e-10, "s={s}, mask {m}: {res}");
        }
    }
}

#[test]
fn cusp_leading_term_poles() {
    let t = C::new(0.3, 0.2);
    let i2pi = C::new(0.0, std::f64::consts::TAU);
    // finite at τ = −t
    let vals: Vec<C> = [1e-3, 1e-5, 1e-7].iter().map(|&e| cusp_leading_reference(-t + e, t)).collect();
    assert!((vals[1] - vals[2]).norm() < 1e-3 * vals[2].norm());
    // simple pole at τ = t with residue 1/2πi
    let e = 1e-6;
    assert!((cusp_leading_reference(t + e, t) * e * i2pi - 1.0).norm() < 1e-4);
    // double pole at τ = 0
    let tau2: Vec<C> = [1e-3, 1e-5].iter().map(|&e| cusp_leading_reference(C::new(e, 0.0), t) * e * e).collect();
    assert!(tau2[1].norm() > 1e-3 && (tau2[0] - tau2[1]).norm() < 1e-2 * tau2[1].norm());
}
