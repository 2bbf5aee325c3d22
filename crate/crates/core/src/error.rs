use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("heat kernel is undefined at (t, x) = (0, 0)")]
    KernelUndefinedAtOrigin,

    #[error("kernel dimension must be >= 2, got {0}")]
    KernelDimension(usize),

    #[error("invalid time panel [{s0}, {s1}]")]
    InvalidPanel { s0: f64, s1: f64 },

    #[error("time-panel integral diverges for d = 0, s0 = 0")]
    DivergentPanelIntegral,

    #[error("degenerate tangent at parameter {theta}")]
    DegenerateTangent { theta: f64 },

    #[error("shape map fails admissibility: {0}")]
    Inadmissible(String),

    #[error("invalid grid sizes: {0}")]
    InvalidGrid(String),

    #[error("source and target curves intersect (min node distance {min_dist:.3e})")]
    CurvesIntersect { min_dist: f64 },

    #[error(
        "evaluation point ({x:.4}, {y:.4}) at t = {t:.4} is within delta_eval = {delta_eval:.4} of a boundary (distance {dist:.4})"
    )]
    TooCloseToBoundary {
        t: f64,
        x: f64,
        y: f64,
        dist: f64,
        delta_eval: f64,
    },

    #[error("singular step system at panel {panel} (condition estimate {cond:.3e})")]
    SingularStep { panel: usize, cond: f64 },

    #[error("Newton iteration failed at panel {panel}: {reason}")]
    NewtonFailure { panel: usize, reason: String },

    #[error("shape at path index {index} is not admissible: {reason}")]
    ShapePath { index: usize, reason: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
