//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point sets differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty sample passed to {op}")]
    EmptySample { op: &'static str },

    #[error("non-finite value encountered in {op}{}", detail.as_ref().map(|d| format!(": {d}")).unwrap_or_default())]
    NonFinite {
        op: &'static str,
        detail: Option<String>,
    },

    #[error("bandwidth must be positive, got {0}")]
    BadBandwidth(f64),

    #[error("invalid histogram range: lo={lo}, hi={hi}")]
    BadRange { lo: f64, hi: f64 },

    #[error("histogram needs at least one bin")]
    NoBins,

    #[error("matrix is not symmetric within tolerance (max asymmetry {max_dev:.3e})")]
    NotSymmetric { max_dev: f64 },

    #[error("matrix is not positive-definite even after diagonal regularization; increase the regularization")]
    NotPositiveDefinite,

    #[error("degenerate geometry in {op}: {detail}")]
    DegenerateGeometry { op: &'static str, detail: String },

    #[error("topology validation failed: {0}")]
    InvalidTopology(String),

    #[error("frame has {got} sites but topology expects {expected}")]
    FrameSizeMismatch { got: usize, expected: usize },

    #[error("dataset invariant violated: {0}")]
    InvalidDataset(String),

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: String, expected: &'static str },

    #[error("unsupported format version {got} in {path} (supported: {supported})")]
    UnsupportedVersion {
        path: String,
        got: u32,
        supported: u32,
    },

    #[error("truncated file {path}: {detail}")]
    Truncated { path: String, detail: String },

    #[error("corrupt file {path}: {detail}")]
    Corrupt { path: String, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("atoms {i} and {j} overlap (distance {dist:.3e} nm)")]
    OverlappingAtoms { i: usize, j: usize, dist: f64 },

    #[error("minimization hit a non-finite energy at iteration {iteration}")]
    MinimizationDiverged { iteration: usize },

    #[error("non-finite coordinates at step {step}; the timestep is likely too large")]
    IntegrationDiverged { step: usize },

    #[error("residue {residue} has no bead-site atom")]
    MissingBeadSite { residue: usize },

    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    TrainingDiverged { epoch: usize, batch: usize },

    #[error("time series too short: {len} frames for lag {lag}")]
    SeriesTooShort { len: usize, lag: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("benchmark observable `{name}`: {source}")]
    Observable {
        name: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}` failed in round {round}: {source}")]
    Stage {
        round: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
