use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape violates the grid margin: {0}")]
    Bounds(String),

    #[error("kernel not resolved by the grid: epsilon {epsilon} < 2h = {min}")]
    Resolution { epsilon: f64, min: f64 },

    #[error("level set {level} is empty")]
    DegenerateLevel { level: f64 },

    #[error("no regular level in band ({lo}, {hi})")]
    NoRegularLevel { lo: f64, hi: f64 },

    #[error("declared divergence disagrees with finite differences at {point:?}: declared {declared}, measured {measured}")]
    DivergenceMismatch {
        point: Vec<f64>,
        declared: f64,
        measured: f64,
    },

    #[error("regions do not partition the grid: {0}")]
    Partition(String),

    #[error("atom at {point:?} lies within one cell of the region boundary")]
    AtomOnBoundary { point: Vec<f64> },

    #[error("measure has atoms in dimension {dim}; approximation diagnostics need mu << H^(N-1)")]
    AtomRejected { dim: usize },

    #[error("fatness condition fails at {point:?}, radius {radius}: exterior density {density} < c0 = {c0}")]
    FatnessViolated {
        point: Vec<f64>,
        radius: f64,
        density: f64,
        c0: f64,
    },

    #[error("super-level sets leave the set for every tested level above {threshold}")]
    InclusionFailed { threshold: f64 },

    #[error("no flux value for face {0}")]
    UnknownFace(String),

    #[error("Cauchy flux axiom ({axiom}) violated: {witness}")]
    AxiomViolation { axiom: &'static str, witness: String },

    #[error("flux is not convex; only convex scalar laws are supported")]
    NonConvexUnsupported,

    #[error("Lax entropy inequality violated by entropy '{entropy}' on box {region}: value {value}")]
    LaxViolation {
        entropy: String,
        region: String,
        value: f64,
    },

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
