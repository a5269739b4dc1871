use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("denominator vanishes identically")]
    DenominatorVanishes,
    #[error("evaluation at pole")]
    Pole,
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("polynomial is not homogeneous")]
    Inhomogeneous,
    #[error("degree-N part not Ω-divisible")]
    NotOmegaDivisible,
    #[error("unsupported rank: {0}")]
    UnsupportedRank(String),
    #[error("point on X")]
    PointOnX,
    #[error("repeated factor")]
    RepeatedFactor,
    #[error("fiber variable degenerate")]
    FiberDegenerate,
    #[error("near-discriminant node at t = {0}")]
    NearDiscriminant(String),
    #[error("continuation break: {0}")]
    ContinuationBreak(String),
    #[error("fiber derivative vanishes")]
    FiberDerivativeVanishes,
    #[error("twist below threshold: need s ≥ κ₀ − N ({0})")]
    TwistBelowThreshold(String),
    #[error("curve not smooth")]
    NotSmooth,
    #[error("minor degenerate on X")]
    MinorDegenerate,
    #[error("target too close to excluded discriminant region")]
    TargetNearDiscriminant,
    #[error("extension fit failed: {0}")]
    ExtensionFitFailed(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("invalid twist range: {0}")]
    InvalidTwist(String),
    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
