use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("window larger than stream (window {window}, stream {samples})")]
    WindowTooLarge { window: usize, samples: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at {0}")]
    NonFinite(String),
    #[error("degenerate classifier")]
    DegenerateClassifier,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("near-singular matrix: eigenvalue {value:e} at index {index}")]
    NearSingular { index: usize, value: f64 },
    #[error("singular normal equations")]
    Singular,
    #[error("missing {0} labels")]
    MissingLabels(&'static str),
    #[error("parse error at row {row}: {detail}")]
    Parse { row: usize, detail: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("training failed in {stage} at iteration {iteration}: {source}")]
    Training {
        stage: String,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("empty ledger")]
    EmptyLedger,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Short machine-readable code used by the CLI's `ERROR <code>: <detail>` lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyInput => "empty_input",
            Error::WindowTooLarge { .. } => "window_too_large",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::DegenerateClassifier => "degenerate_classifier",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::NearSingular { .. } => "near_singular",
            Error::Singular => "singular",
            Error::MissingLabels(_) => "missing_labels",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::Training { .. } => "training",
            Error::EmptyLedger => "empty_ledger",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True when the error is a precondition/validation failure rather than a
    /// failure while doing the work.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::EmptyInput
            | Error::WindowTooLarge { .. }
            | Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::MissingLabels(_)
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::EmptyLedger
            | Error::Json(_) => true,
            Error::Io(e) => e.kind() == std::io::ErrorKind::NotFound,
            _ => false,
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
