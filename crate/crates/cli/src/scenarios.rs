use std::fs::File;
use std::io::Write;

use koppelman::algebra::{parse_poly, parse_rational, Universe};
use koppelman::curves::{polar_nodes, Chart, GridSpec, PlaneCurve, Projection};
use koppelman::forms::{DiffFamily, FormExpr};
use koppelman::hefer::hefer_decompose;
use koppelman::kernels::assemble_plane_kernel;
use koppelman::operators::{
    emit_convergence, extend_section, koppelman_level, koppelman_selftest, pn_obstruction, pn_solve, solve_dbar_curve,
    Report, SectionRep, GLOBAL_SIGN,
};
use koppelman::suite::{fermat_kernel_regression, hefer_certificate, verify_suite, FERMAT};
use koppelman::Error;

use crate::config::{Kind, ScenarioConfig};

/// Why a scenario did not produce a report.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<Report, Failure>;

fn curve_poly(cfg: &ScenarioConfig, n: usize) -> Result<koppelman::algebra::MultiPoly, Failure> {
    Ok(parse_poly(cfg.curve.as_deref().unwrap_or(FERMAT), Universe::new(n))?)
}

fn plane_curve(cfg: &ScenarioConfig) -> Result<PlaneCurve, Failure> {
    let c = PlaneCurve::new(curve_poly(cfg, 2)?)?;
    if !c.is_smooth() {
        return Err(Error::NotSmooth.into());
    }
    Ok(c)
}

fn grids(cfg: &ScenarioConfig, default: &[usize]) -> Vec<GridSpec> {
    let sizes = if cfg.grid.is_empty() { default } else { &cfg.grid };
    sizes.iter().map(|&n| GridSpec::square(n)).collect()
}

fn default_psi(s: i64) -> String {
    format!("zeta0^{}*Zeta0/(zeta0*Zeta0 + zeta1*Zeta1 + zeta2*Zeta2)", s + 1)
}

/// The right-hand side `φ`, from `phi` or as `∂̄ψ`.
fn rhs(cfg: &ScenarioConfig, n: usize, psi: Option<&SectionRep>) -> Result<SectionRep, Failure> {
    if let Some(coeffs) = &cfg.phi {
        if coeffs.len() != n + 1 {
            return Err(Failure::Input(format!("phi needs {} coefficients", n + 1)));
        }
        let cs = coeffs
            .iter()
            .map(|c| parse_rational(c, Universe::new(n)))
            .collect::<koppelman::Result<Vec<_>>>()?;
        return Ok(SectionRep::symbolic(FormExpr::one_form(n, DiffFamily::DZetaBar, &cs))?);
    }
    match psi {
        Some(p) => Ok(p.dbar()?),
        None => Err(Failure::Input("give psi or phi".into())),
    }
}

fn write_csv(cfg: &ScenarioConfig, series: &[(usize, f64)], report: &mut Report, name: &str) -> Result<(), Failure> {
    if series.len() < 2 {
        return Ok(());
    }
    let grids: Vec<GridSpec> = series.iter().map(|&(n, _)| GridSpec::square(n)).collect();
    let values: Vec<f64> = series.iter().map(|s| s.1).collect();
    report.slope(name, &grids, &values)?;
    if let Some(path) = &cfg.outputs.csv {
        emit_convergence(series, File::create(path)?)?;
    }
    Ok(())
}

pub fn run(cfg: &ScenarioConfig) -> Outcome {
    match cfg.kind {
        Kind::VerifyIdentities => Ok(verify_suite(cfg.n.unwrap_or(3), 20, cfg.seed.unwrap_or(1))),
        Kind::Hefer => hefer(cfg),
        Kind::Kernel => kernel(cfg),
        Kind::Solve => solve(cfg),
        Kind::Extend => extend(cfg),
        Kind::PnSolve => pn(cfg),
        Kind::Selftest => selftest(cfg),
    }
}

fn hefer(cfg: &ScenarioConfig) -> Outcome {
    let n = cfg.n.unwrap_or(2);
    let h = hefer_decompose(&curve_poly(cfg, n)?, n)?;
    let mut report = Report::new("hefer");
    for (j, c) in h.h.iter().enumerate() {
        report.notes.push(format!("h_{j} = {c}"));
    }
    let c = hefer_certificate("decomposition", &h);
    report.check(c.identity, None, if c.passed { 0.0 } else { 1.0 }, Some(0.0));
    Ok(report)
}

fn kernel(cfg: &ScenarioConfig) -> Outcome {
    let curve = plane_curve(cfg)?;
    let s = cfg.twist.unwrap_or(1);
    let k = assemble_plane_kernel(&curve, s)?;
    let mut report = Report::new("kernel");
    let spec = grids(cfg, &[8])[0];
    if let Some(path) = &cfg.outputs.csv {
        let p = Projection { fiber: curve.fiber() };
        let targets = koppelman::operators::curve_targets(&curve, 4)?;
        let mut w = csv::Writer::from_writer(File::create(path)?);
        let io = |e: csv::Error| Failure::Io(e.to_string());
        w.write_record(["t_re", "t_im", "tau_re", "tau_im", "sheet_t", "sheet_tau", "re_k", "im_k"])
            .map_err(io)?;
        for node in polar_nodes(0.0.into(), 0.0, 0.9, spec.nodes_radial, spec.nodes_angular) {
            let mut roots = curve.fiber_roots(p, Chart::A.base(node.u));
            roots.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
            for (sheet, x) in roots.into_iter().enumerate() {
                let sample = curve.sample_at(p, Chart::A, node.u, x, 0, sheet);
                for t in &targets {
                    let Ok(v) = k.chart_kernel(&sample, &t.zeta) else { continue };
                    let e = |x: f64| format!("{x:e}");
                    let row = [e(t.t.re), e(t.t.im), e(node.u.re), e(node.u.im), t.sheet.to_string(), sheet.to_string(), e(v.re), e(v.im)];
                    w.write_record(row).map_err(io)?;
                }
            }
        }
        w.flush()?;
    }
    if curve.f() == &parse_poly(FERMAT, Universe::new(2))? {
        let v = fermat_kernel_regression(s, 100, cfg.seed.unwrap_or(1))?;
        report.check("Fermat kernel vs closed form (relative)", None, v, Some(cfg.tol()));
    } else {
        report.notes.push("no stored closed form for this curve".into());
    }
    Ok(report)
}

fn solve(cfg: &ScenarioConfig) -> Outcome {
    let curve = plane_curve(cfg)?;
    let s = cfg.twist.unwrap_or(1);
    let psi = match (&cfg.psi, &cfg.phi) {
        (Some(p), _) => Some(SectionRep::parse_function(p, 2)?),
        (None, None) => Some(SectionRep::parse_function(&default_psi(s), 2)?),
        (None, Some(_)) => None,
    };
    let phi = rhs(cfg, 2, psi.as_ref())?;
    let mut report = Report::new("solve");
    report.sign = Some(GLOBAL_SIGN);
    let (mut fd, mut kopp) = (Vec::new(), Vec::new());
    let levels = grids(cfg, &[16, 32, 64]);
    for (i, g) in levels.iter().enumerate() {
        let sol = solve_dbar_curve(&curve, s, &phi, *g, 6)?;
        let last = i + 1 == levels.len();
        let tol = last.then(|| cfg.tol());
        report.check("∂̄u − φ (finite differences)", Some(*g), sol.dbar_residual, tol);
        fd.push((g.nodes_radial, sol.dbar_residual));
        if let Some(psi) = &psi {
            let l = koppelman_level(&curve, s, psi, *g, 6)?;
            let r = if GLOBAL_SIGN > 0.0 { l.residual_plus } else { l.residual_minus };
            report.check("u + Pψ − ψ", Some(*g), r, tol);
            kopp.push((g.nodes_radial, r));
        }
    }
    write_csv(cfg, &fd, &mut report, "∂̄u − φ")?;
    if !kopp.is_empty() {
        let grids: Vec<GridSpec> = kopp.iter().map(|&(n, _)| GridSpec::square(n)).collect();
        let values: Vec<f64> = kopp.iter().map(|k| k.1).collect();
        if grids.len() >= 2 {
            report.slope("u + Pψ − ψ", &grids, &values)?;
        }
    }
    Ok(report)
}

fn extend(cfg: &ScenarioConfig) -> Outcome {
    let curve = plane_curve(cfg)?;
    let s = cfg.twist.unwrap_or(1);
    let section = SectionRep::parse_function(cfg.section.as_deref().unwrap_or("zeta0"), 2)?;
    let g = *grids(cfg, &[64]).last().expect("non-empty");
    let mut report = Report::new("extend");
    match extend_section(&curve, s, &section, g, cfg.tol()) {
        Ok(e) => {
            report.check("monomial fit residual", Some(g), e.fit_residual, Some(cfg.tol()));
            report.check("on-curve agreement Pφ − φ", Some(g), e.on_curve_agreement, Some(cfg.tol()));
            for (ex, c) in e.exponents.iter().zip(&e.coefficients) {
                report.notes.push(format!("ζ^{ex:?}: {c:.12}"));
            }
        }
        Err(Error::ExtensionFitFailed(m)) => {
            report.passed = false;
            report.warnings.push(format!("extension fit failed: {m}"));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(report)
}

fn pn(cfg: &ScenarioConfig) -> Outcome {
    let n = cfg.n.unwrap_or(1);
    let ell = cfg.twist.unwrap_or(0);
    let q = cfg.q.unwrap_or(1);
    let psi = cfg
        .psi
        .as_deref()
        .map(|p| SectionRep::parse_function(p, n))
        .transpose()?;
    let phi = rhs(cfg, n, psi.as_ref())?;
    let mut report = Report::new("pn-solve");
    let levels = grids(cfg, &[16, 32, 64]);
    let mut head = Vec::new();
    for (i, g) in levels.iter().enumerate() {
        let sol = pn_solve(n, ell, q, &phi, psi.as_ref(), cfg.weight, *g)?;
        let last = i + 1 == levels.len();
        let fd_tol = (last && psi.is_none()).then(|| cfg.tol());
        report.check("∂̄u − φ (finite differences)", Some(*g), sol.dbar_residual, fd_tol);
        report.check("Pφ", Some(*g), sol.obstruction_term, None);
        match sol.koppelman_residual {
            Some(r) => {
                report.check("u + Pψ − ψ", Some(*g), r, last.then(|| cfg.tol()));
                head.push((g.nodes_radial, r));
            }
            None => head.push((g.nodes_radial, sol.dbar_residual)),
        }
    }
    write_csv(cfg, &head, &mut report, "residual")?;
    if ell < -(n as i64) {
        let g = *levels.last().expect("non-empty");
        let m = pn_obstruction(n, ell, &phi, g)?;
        let size = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
        report.check("obstruction moments", Some(g), size, None);
        if size > 1e-6 {
            report.passed = false;
            report.warnings.push(format!("nonzero obstruction {size:.3e}: ∂̄u = φ has no solution"));
        }
    }
    Ok(report)
}

fn selftest(cfg: &ScenarioConfig) -> Outcome {
    let curve = plane_curve(cfg)?;
    let s = cfg.twist.unwrap_or(1);
    let psi = SectionRep::parse_function(cfg.psi.as_deref().unwrap_or(&default_psi(s)), 2)?;
    let levels = grids(cfg, &[16, 32, 64]);
    let mut report = Report::new("selftest");
    match koppelman_selftest(&curve, s, &psi, &levels, cfg.tol()) {
        Ok(rec) => {
            report.sign = Some(rec.sign);
            for l in &rec.levels {
                report.check("residual, sign +", Some(l.grid), l.residual_plus, None);
                report.check("residual, sign −", Some(l.grid), l.residual_minus, None);
            }
            if levels.len() >= 2 {
                report.slope("winning sign", &levels, &rec.winning_residuals())?;
            }
            if rec.sign != GLOBAL_SIGN {
                report.passed = false;
                report.warnings.push(format!("calibrated sign {} differs from the built-in {GLOBAL_SIGN}", rec.sign));
            }
        }
        Err(Error::CalibrationFailed(m)) => {
            report.passed = false;
            report.warnings.push(format!("calibration failed: {m}"));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(report)
}

pub fn write_report(report: &Report, cfg: &ScenarioConfig) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Failure::Io(e.to_string()))?;
    if let Some(path) = &cfg.outputs.report {
        let mut f = File::create(path)?;
        writeln!(f, "{text}")?;
    }
    println!("{text}");
    Ok(())
}
