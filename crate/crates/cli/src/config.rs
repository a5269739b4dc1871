use std::path::{Path, PathBuf};

use koppelman::kernels::PnWeight;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    VerifyIdentities,
    Hefer,
    Kernel,
    Solve,
    Extend,
    PnSolve,
    Selftest,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::VerifyIdentities => "verify-identities",
            Kind::Hefer => "hefer",
            Kind::Kernel => "kernel",
            Kind::Solve => "solve",
            Kind::Extend => "extend",
            Kind::PnSolve => "pn-solve",
            Kind::Selftest => "selftest",
        }
    }

    /// Tolerance applied to the headline residual when none is given.
    pub fn default_tol(self) -> f64 {
        match self {
            Kind::VerifyIdentities | Kind::Hefer => 0.0,
            Kind::Kernel => 1e-12,
            Kind::Solve => 1e-2,
            Kind::Extend | Kind::PnSolve => 1e-6,
            Kind::Selftest => 1e-4,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// One scenario: a pipeline name with its inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    /// Curve or polynomial, e.g. `zeta0^3 + zeta1^3 + zeta2^3`.
    #[serde(default)]
    pub curve: Option<String>,
    /// Ambient dimension `N`.
    #[serde(default)]
    pub n: Option<usize>,
    /// `s` on curves, `ℓ` on `P^N`.
    #[serde(default)]
    pub twist: Option<i64>,
    #[serde(default)]
    pub q: Option<usize>,
    /// Manufactured potential `ψ`; the right-hand side is `∂̄ψ`.
    #[serde(default)]
    pub psi: Option<String>,
    /// Coefficients of `dζ̄_0, …, dζ̄_N` of a `(0,1)` right-hand side.
    #[serde(default)]
    pub phi: Option<Vec<String>>,
    /// Holomorphic section to extend.
    #[serde(default)]
    pub section: Option<String>,
    #[serde(default)]
    pub weight: Option<PnWeight>,
    /// Square grid sizes, coarse to fine.
    #[serde(default)]
    pub grid: Vec<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl ScenarioConfig {
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            curve: None,
            n: None,
            twist: None,
            q: None,
            psi: None,
            phi: None,
            section: None,
            weight: None,
            grid: Vec::new(),
            tol: None,
            seed: None,
            outputs: Outputs::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(self.kind.default_tol())
    }
}
