use thiserror::Error;

pub type Result<T> = std::result::Result<T, KafError>;

/// Broad failure category, used to pick the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Numerical => 2,
            ErrorKind::Io => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::Numerical => "numerical",
            ErrorKind::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum KafError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("ill-conditioned dictionary Gram matrix (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("near-singular dictionary extension: residual {d2:.3e} below floor {floor:.1e}")]
    NearSingularExtension { d2: f64, floor: f64 },

    #[error("numerical degeneracy in {what}: |value| = {value:.3e}")]
    Degenerate { what: &'static str, value: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("expansion reached its cap of {cap} terms")]
    CapacityExceeded { cap: usize },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<KafError>,
    },

    #[error("tolerance breach in `{suite}` at step {step}: deviation {deviation:.3e} > {tolerance:.1e}")]
    ToleranceBreach {
        suite: String,
        step: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl KafError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        KafError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        KafError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ KafError::AtStep { .. } => e,
            e => KafError::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            KafError::DimensionMismatch { .. }
            | KafError::NonFinite(_)
            | KafError::InvalidParameter { .. }
            | KafError::Snapshot(_)
            | KafError::Json(_) => ErrorKind::Validation,
            KafError::IllConditioned { .. }
            | KafError::NearSingularExtension { .. }
            | KafError::Degenerate { .. }
            | KafError::Singular(_)
            | KafError::CapacityExceeded { .. }
            | KafError::ToleranceBreach { .. } => ErrorKind::Numerical,
            KafError::Io { .. } => ErrorKind::Io,
            KafError::AtStep { source, .. } => source.kind(),
        }
    }

    /// The offending configuration field, when the error names one.
    pub fn field(&self) -> Option<&str> {
        match self {
            KafError::InvalidParameter { field, .. } => Some(field),
            KafError::AtStep { source, .. } => source.field(),
            _ => None,
        }
    }
}
