use thiserror::Error;

use crate::isocline::Curve;

pub type Result<T> = std::result::Result<T, IslmError>;

/// Exit-code category of an error, as used by the command-line front end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// A configuration breaks one of the model's regime conditions.
    Condition,
    /// A numerical procedure failed (no root, no cycle, stiffness, ...).
    Numerical,
    /// Bad input: arguments, files, malformed documents.
    Usage,
}

#[derive(Debug, Error)]
pub enum IslmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("state outside the domain Y >= 0 (y = {y})")]
    Domain { y: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("no Kaldor interval: {0}")]
    NoKaldorInterval(String),

    #[error("no equilibrium found in the window")]
    NoEquilibrium,

    #[error("isocline {0} does not intersect the window")]
    SeedNotFound(Curve),

    #[error("expected exactly two folds, found {0}")]
    FoldCountMismatch(usize),

    #[error("arc stability requires the {expected} curve, got {got}")]
    WrongCurve { expected: Curve, got: Curve },

    #[error("fast derivative {value:e} too close to zero at sample {index} away from a fold")]
    AmbiguousSign { index: usize, value: f64 },

    #[error("step size fell below the floor {h_min:e} at t = {t}")]
    StepFloorReached { t: f64, h_min: f64 },

    #[error("step budget of {0} steps exhausted")]
    StepBudget(usize),

    #[error("trajectory left the domain Y >= 0 at t = {t} (y = {y}, r = {r})")]
    DomainExit { t: f64, y: f64, r: f64 },

    #[error("no cycle: trajectory settles at y = {y}, r = {r}")]
    NoCycle { y: f64, r: f64 },

    #[error("Poincare returns did not settle after {returns} returns")]
    NonConvergent { returns: usize },

    #[error("singular orbit cannot close: {0}")]
    NoReturnDrift(String),

    #[error("shifted configuration violates condition {condition}")]
    ConditionBroken { condition: String },

    #[error("no hysteresis: {0}")]
    NoHysteresis(String),

    #[error("quasi-static tracking did not settle at parameter {value}")]
    NotSettled { value: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("nothing to draw")]
    EmptyGeometry,

    #[error("{0}")]
    Usage(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IslmError {
    pub fn class(&self) -> ErrorClass {
        use IslmError::*;
        match self {
            InvalidConfig(_) | ConditionBroken { .. } => ErrorClass::Condition,
            Usage(_) | Parse { .. } | Io(_) => ErrorClass::Usage,
            _ => ErrorClass::Numerical,
        }
    }

    /// Short stable name of the variant, recorded in run manifests.
    pub fn kind(&self) -> &'static str {
        use IslmError::*;
        match self {
            InvalidConfig(_) => "InvalidConfig",
            Domain { .. } => "Domain",
            Grid(_) => "Grid",
            NoKaldorInterval(_) => "NoKaldorInterval",
            NoEquilibrium => "NoEquilibrium",
            SeedNotFound(_) => "SeedNotFound",
            FoldCountMismatch(_) => "FoldCountMismatch",
            WrongCurve { .. } => "WrongCurve",
            AmbiguousSign { .. } => "AmbiguousSign",
            StepFloorReached { .. } => "StepFloorReached",
            StepBudget(_) => "StepBudget",
            DomainExit { .. } => "DomainExit",
            NoCycle { .. } => "NoCycle",
            NonConvergent { .. } => "NonConvergent",
            NoReturnDrift(_) => "NoReturnDrift",
            ConditionBroken { .. } => "ConditionBroken",
            NoHysteresis(_) => "NoHysteresis",
            NotSettled { .. } => "NotSettled",
            Precondition(_) => "Precondition",
            EmptyGeometry => "EmptyGeometry",
            Usage(_) => "Usage",
            Parse { .. } => "Parse",
            Io(_) => "Io",
        }
    }
}

impl From<serde_json::Error> for IslmError {
    fn from(e: serde_json::Error) -> Self {
        IslmError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
