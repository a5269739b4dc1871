//! Fast floating-point evaluation of symbolic objects, univariate exact
//! polynomials, root finding and Gauss–Legendre rules.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use num_traits::{One, Zero};
use smallvec::SmallVec;

use crate::algebra::{Family, GaussianRational, MultiPoly, RationalFn, Var, TWO_PI_I};
use crate::forms::{FormExpr, Multivector};

const STRIDE: usize = 16;
const SLOTS: usize = STRIDE * 8;

fn slot(v: Var) -> usize {
    v.family as usize * STRIDE + v.index()
}

/// Dense variable assignment used by compiled evaluators.
#[derive(Clone, Debug)]
pub struct Env {
    vals: [Complex64; SLOTS],
}

impl Default for Env {
    fn default() -> Self {
        Self {
            vals: [Complex64::zero(); SLOTS],
        }
    }
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, v: Var, c: Complex64) -> &mut Self {
        self.vals[slot(v)] = c;
        self
    }

    /// Sets a holomorphic family and its conjugate.
    pub fn set_family(&mut self, fam: Family, vals: &[Complex64]) -> &mut Self {
        for (i, c) in vals.iter().enumerate() {
            self.vals[slot(Var::new(fam, i))] = *c;
            self.vals[slot(Var::new(fam.conj(), i))] = c.conj();
        }
        self
    }

    pub fn zeta_z(zeta: &[Complex64], z: &[Complex64]) -> Self {
        let mut e = Self::new();
        e.set_family(Family::Zeta, zeta).set_family(Family::Z, z);
        e
    }

    pub fn get(&self, v: Var) -> Complex64 {
        self.vals[slot(v)]
    }
}

#[derive(Clone, Debug, Default)]
pub struct CompiledPoly {
    terms: Vec<(Complex64, SmallVec<[(u8, u32); 6]>)>,
}

impl CompiledPoly {
    pub fn new(p: &MultiPoly) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let coeff = c.to_complex() * TWO_PI_I.powi(m.pi_exp());
                let vars = m.vars().map(|(v, e)| (slot(v) as u8, e)).collect();
                (coeff, vars)
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, env: &Env) -> Complex64 {
        let mut acc = Complex64::zero();
        for (c, vars) in &self.terms {
            let mut t = *c;
            for &(s, e) in vars {
                let x = env.vals[s as usize];
                t *= match e {
                    1 => x,
                    2 => x * x,
                    _ => x.powu(e),
                };
            }
            acc += t;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct CompiledRational {
    num: CompiledPoly,
    den: Vec<(CompiledPoly, u32)>,
}

impl CompiledRational {
    pub fn new(r: &RationalFn) -> Self {
        Self {
            num: CompiledPoly::new(r.numerator()),
            den: r
                .factors()
                .iter()
                .map(|(f, e)| (CompiledPoly::new(f), *e))
                .collect(),
        }
    }

    /// Unchecked: a vanishing denominator yields a non-finite value.
    pub fn eval(&self, env: &Env) -> Complex64 {
        let n = self.num.eval(env);
        if n.is_zero() {
            return n;
        }
        let mut d = Complex64::one();
        for (f, e) in &self.den {
            d *= f.eval(env).powu(*e);
        }
        n / d
    }
}

/// A form whose coefficients are compiled rational functions.
#[derive(Clone, Debug)]
pub struct CompiledForm {
    n: usize,
    terms: Vec<(u64, CompiledRational)>,
}

impl CompiledForm {
    pub fn new(f: &FormExpr) -> Self {
        Self {
            n: f.n(),
            terms: f
                .terms()
                .map(|(m, c)| (m, CompiledRational::new(c)))
                .collect(),
        }
    }

    pub fn eval(&self, env: &Env) -> Multivector {
        let mut mv = Multivector::zero(self.n);
        for (m, c) in &self.terms {
            mv.add(*m, c.eval(env));
        }
        mv
    }

    pub fn masks(&self) -> impl Iterator<Item = u64> + '_ {
        self.terms.iter().map(|(m, _)| *m)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Dense univariate polynomial with exact coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct UPoly {
    c: Vec<GaussianRational>,
}

impl UPoly {
    pub fn new(mut c: Vec<GaussianRational>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Self { c }
    }

    pub fn zero() -> Self {
        Self { c: Vec::new() }
    }

    pub fn constant(c: GaussianRational) -> Self {
        Self::new(vec![c])
    }

    /// Coefficients of `p` viewed as a polynomial in `v`; `p` must not depend
    /// on any other variable.
    pub fn from_multipoly(p: &MultiPoly, v: Var) -> Option<Self> {
        let mut c = Vec::new();
        for (m, k) in p.terms() {
            if m.pi_exp() != 0 || m.vars().any(|(w, _)| w != v) {
                return None;
            }
            let e = m.exp(v) as usize;
            if c.len() <= e {
                c.resize(e + 1, GaussianRational::zero());
            }
            c[e] = &c[e] + k;
        }
        Some(Self::new(c))
    }

    pub fn coeffs(&self) -> &[GaussianRational] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, x)| x * &GaussianRational::from_int(k as i64))
                .collect(),
        )
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.c.len().max(o.c.len());
        Self::new(
            (0..n)
                .map(|k| {
                    let z = GaussianRational::zero();
                    self.c.get(k).unwrap_or(&z) + o.c.get(k).unwrap_or(&z)
                })
                .collect(),
        )
    }

    pub fn neg(&self) -> Self {
        Self::new(self.c.iter().map(|x| -x).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut c = vec![GaussianRational::zero(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c.iter().enumerate() {
                c[i + j] = &c[i + j] + &(a * b);
            }
        }
        Self::new(c)
    }

    pub fn div_rem(&self, o: &Self) -> (Self, Self) {
        let dq = o.degree().expect("division by zero polynomial");
        let lead_inv = o.c[dq].inv().expect("nonzero leading coefficient");
        let mut r = self.c.clone();
        let mut q = vec![GaussianRational::zero(); r.len().saturating_sub(dq)];
        while r.len() > dq && !r.is_empty() {
            let k = r.len() - 1 - dq;
            let t = &r[r.len() - 1] * &lead_inv;
            for (j, b) in o.c.iter().enumerate() {
                r[k + j] = &r[k + j] - &(&t * b);
            }
            q[k] = t;
            r.pop();
            while r.last().is_some_and(|x| x.is_zero()) {
                r.pop();
            }
        }
        (Self::new(q), Self::new(r))
    }

    pub fn gcd(&self, o: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.c
            .iter()
            .rev()
            .fold(Complex64::zero(), |acc, k| acc * x + k.to_complex())
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.c.iter().map(|x| x.to_complex()).collect()
    }
}

/// Determinant of a matrix of univariate polynomials by fraction-free
/// elimination.
pub fn upoly_det(mut m: Vec<Vec<UPoly>>) -> UPoly {
    let n = m.len();
    let mut sign = false;
    let mut prev = UPoly::constant(GaussianRational::one());
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(i, k);
                    sign = !sign;
                }
                None => return UPoly::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = m[i][j].mul(&m[k][k]).sub(&m[i][k].mul(&m[k][j]));
                let (q, r) = num.div_rem(&prev);
                debug_assert!(r.is_zero());
                m[i][j] = q;
            }
            m[i][k] = UPoly::zero();
        }
        prev = m[k][k].clone();
    }
    if sign {
        prev.neg()
    } else {
        prev
    }
}

/// Resultant of two polynomials in `x` whose coefficients are polynomials in
/// another variable, both given lowest degree first.
pub fn resultant(a: &[UPoly], b: &[UPoly]) -> UPoly {
    let (m, n) = (a.len() - 1, b.len() - 1);
    let size = m + n;
    let mut rows = vec![vec![UPoly::zero(); size]; size];
    for i in 0..n {
        for (k, c) in a.iter().rev().enumerate() {
            rows[i][i + k] = c.clone();
        }
    }
    for i in 0..m {
        for (k, c) in b.iter().rev().enumerate() {
            rows[n + i][i + k] = c.clone();
        }
    }
    upoly_det(rows)
}

fn horner_with_derivative(c: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::zero();
    let mut dp = Complex64::zero();
    for k in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + k;
    }
    (p, dp)
}

/// Newton refinement of a root, returning the polished value.
pub fn newton_polish(c: &[Complex64], mut x: Complex64, iters: usize) -> Complex64 {
    for _ in 0..iters {
        let (p, dp) = horner_with_derivative(c, x);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        x -= step;
        if step.norm() <= 1e-16 * (1.0 + x.norm()) {
            break;
        }
    }
    x
}

/// All roots of `Σ c_k x^k` via the companion matrix, Newton-polished.
pub fn poly_roots(c: &[Complex64]) -> Vec<Complex64> {
    let mut c = c.to_vec();
    while c.last().is_some_and(|x| x.norm() == 0.0) {
        c.pop();
    }
    let deg = match c.len() {
        0 | 1 => return Vec::new(),
        n => n - 1,
    };
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    // Unshifted QR can stall on companion matrices of highly symmetric
    // polynomials, so retry with the variable translated.
    for s in [Complex64::zero(), Complex64::new(0.3141, 0.2718), Complex64::new(-0.577, 0.113)] {
        let shifted = taylor_shift(&c, s);
        let lead = shifted[deg];
        let mut m = DMatrix::<Complex64>::zeros(deg, deg);
        for i in 1..deg {
            m[(i, i - 1)] = Complex64::one();
        }
        for i in 0..deg {
            m[(i, deg - 1)] = -shifted[i] / lead;
        }
        if let Some(schur) = Schur::try_new(m, 1e-15, 500 * deg) {
            let t = schur.unpack().1;
            return (0..deg).map(|i| newton_polish(&c, t[(i, i)] + s, 8)).collect();
        }
    }
    panic!("companion eigenvalue iteration did not converge")
}

/// Coefficients of `p(x + s)` from those of `p`, lowest degree first.
fn taylor_shift(c: &[Complex64], s: Complex64) -> Vec<Complex64> {
    let mut out = c.to_vec();
    let n = out.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let hi = out[j + 1];
            out[j] += s * hi;
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on `[a, b]` (Golub–Welsch).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let beta = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k, k - 1)] = beta;
        j[(k - 1, k)] = beta;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (h, mid) = (0.5 * (b - a), 0.5 * (a + b));
    pairs
        .into_iter()
        .map(|(x, w)| (mid + h * x, h * w))
        .unzip()
}

/// Least-squares solution of `A x ≈ b` with its residual norm.
pub fn least_squares(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> (DVector<Complex64>, f64) {
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(b, 1e-13)
        .expect("thin SVD with both factors requested");
    let r = (a * &x - b).norm();
    (x, r)
}
