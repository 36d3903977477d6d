use thiserror::Error;

/// Errors raised while building or querying meshes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unsupported dimension {0} (expected 2 or 3)")]
    Dimension(usize),
    #[error("resolution along axis {axis} must be at least 1")]
    Resolution { axis: usize },
    #[error("empty or inverted extent along axis {axis}")]
    Extent { axis: usize },
    #[error("cell box {index} is not aligned with the grid along axis {axis} (coordinate {value})")]
    NotGridAligned { index: usize, axis: usize, value: f64 },
    #[error("cell box {index} touches or leaves the outer boundary")]
    TouchesBoundary { index: usize },
    #[error("cell boxes {first} and {second} overlap or touch")]
    Overlap { first: usize, second: usize },
    #[error("facet {vertices:?} separates two intracellular cells (labels {first} and {second})")]
    CellsTouch {
        vertices: Vec<usize>,
        first: u32,
        second: u32,
    },
    #[error("point {point:?} is not inside the requested region")]
    PointOutside { point: Vec<f64> },
}

/// Errors raised by the discrete linear algebra.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("unsupported polynomial degree {0} (expected 1 or 2)")]
    Degree(usize),
    #[error("sparse factorization failed: {reason} (blocks: {blocks})")]
    Factorization { reason: String, blocks: String },
    #[error("relative residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("non-finite value in solution of block {block}")]
    NonFinite { block: String },
    #[error("interface dof {dof} has no trace image in the {region} space")]
    MissingTrace { dof: usize, region: &'static str },
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
}

/// Errors raised by membrane-local physics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("nonpositive concentration for {species}: intracellular {intra}, extracellular {extra}")]
    NonpositiveConcentration { species: String, intra: f64, extra: f64 },
    #[error("species {0} has zero valence")]
    ZeroValence(String),
    #[error("capacitive fractions undefined: all weighted concentrations vanish")]
    ZeroDenominator,
}

/// Top-level error for the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("instability at step {step} (t = {time_ms} ms): {detail}")]
    Instability {
        step: usize,
        time_ms: f64,
        detail: String,
    },
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Coarse error category, used for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::Geometry(_) => ErrorCategory::Config,
            Error::Solver(_) | Error::Physics(_) => ErrorCategory::Solver,
            Error::Instability { .. } => ErrorCategory::Instability,
            Error::Step { source, .. } => source.category(),
            Error::Io { .. } => ErrorCategory::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Solver,
    Instability,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Solver => 3,
            ErrorCategory::Instability => 4,
            ErrorCategory::Io => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Solver => "solver",
            ErrorCategory::Instability => "instability",
            ErrorCategory::Io => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
