//! `koppelman`: runs identity checks, kernel regressions and the curve and
//! `P^N` solvers, printing a JSON report.
//!
//! Exit codes: 0 pass, 1 tolerance failure, 2 input or configuration error.

mod config;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use koppelman::kernels::PnWeight;

use config::{Kind, ScenarioConfig};
use scenarios::Failure;

#[derive(Parser)]
#[command(name = "koppelman", version, about = "Koppelman kernels and ∂̄-solvers on projective curves")]
struct Cli {
    /// Square grid sizes, coarse to fine (e.g. 16,32,64).
    #[arg(long, global = true, value_delimiter = ',')]
    grid: Vec<usize>,
    /// Tolerance on the headline residual.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write the JSON report here as well as to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CSV output: kernel samples or the convergence table.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Inputs {
    /// Polynomial defining the curve.
    #[arg(long)]
    curve: Option<String>,
    /// Twist `s` (curves) or `ℓ` (P^N).
    #[arg(long, allow_hyphen_values = true)]
    twist: Option<i64>,
    /// Manufactured potential ψ; the right-hand side is ∂̄ψ.
    #[arg(long)]
    psi: Option<String>,
    /// Coefficients of dζ̄_0, …, dζ̄_N of the right-hand side.
    #[arg(long, value_delimiter = ';', allow_hyphen_values = true)]
    phi: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact identities for weights, Hefer forms and the Fermat kernel.
    VerifyIdentities {
        /// Largest ambient dimension.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Hefer decomposition of a homogeneous polynomial.
    Hefer {
        poly: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Kernel samples as CSV, with the closed-form regression for Fermat.
    Kernel {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Solve ∂̄u = φ on a smooth plane curve.
    Solve {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Extend a holomorphic section from the curve to a polynomial.
    Extend {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        section: Option<String>,
    },
    /// Solve ∂̄u = φ on P^N.
    PnSolve {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, value_enum)]
        weight: Option<WeightArg>,
    },
    /// Calibrate the sign of the projection kernel.
    Selftest {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Run a scenario from a JSON file.
    Run { config: PathBuf },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum WeightArg {
    Alpha,
    Beta,
}

fn with_inputs(kind: Kind, i: Inputs) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(kind);
    c.curve = i.curve;
    c.twist = i.twist;
    c.psi = i.psi;
    c.phi = (!i.phi.is_empty()).then_some(i.phi);
    c
}

fn build(cli: Cli) -> Result<ScenarioConfig, String> {
    let mut cfg = match cli.command {
        Command::VerifyIdentities { n, seed } => {
            let mut c = ScenarioConfig::new(Kind::VerifyIdentities);
            c.n = Some(n);
            c.seed = seed;
            c
        }
        Command::Hefer { poly, n } => {
            let mut c = ScenarioConfig::new(Kind::Hefer);
            c.curve = Some(poly);
            c.n = Some(n);
            c
        }
        Command::Kernel { inputs } => with_inputs(Kind::Kernel, inputs),
        Command::Solve { inputs } => with_inputs(Kind::Solve, inputs),
        Command::Extend { inputs, section } => {
            let mut c = with_inputs(Kind::Extend, inputs);
            c.section = section;
            c
        }
        Command::PnSolve { inputs, n, q, weight } => {
            let mut c = with_inputs(Kind::PnSolve, inputs);
            c.n = Some(n);
            c.q = Some(q);
            c.weight = weight.map(|w| match w {
                WeightArg::Alpha => PnWeight::Alpha,
                WeightArg::Beta => PnWeight::Beta,
            });
            c
        }
        Command::Selftest { inputs } => with_inputs(Kind::Selftest, inputs),
        Command::Run { config } => ScenarioConfig::load(&config)?,
    };
    if !cli.grid.is_empty() {
        cfg.grid = cli.grid;
    }
    if cli.tol.is_some() {
        cfg.tol = cli.tol;
    }
    if cli.out.is_some() {
        cfg.outputs.report = cli.out;
    }
    if cli.csv.is_some() {
        cfg.outputs.csv = cli.csv;
    }
    Ok(cfg)
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("KOPPELMAN_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| format!("KOPPELMAN_THREADS: not a count: {v}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match threads().and_then(|_| build(cli)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = scenarios::run(&cfg).and_then(|r| scenarios::write_report(&r, &cfg).map(|_| r));
    match report {
        Ok(r) if r.passed => ExitCode::SUCCESS,
        Ok(r) => {
            for w in &r.warnings {
                eprintln!("{}: {w}", cfg.kind.name());
            }
            eprintln!("{}: tolerance failure", cfg.kind.name());
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) | Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
