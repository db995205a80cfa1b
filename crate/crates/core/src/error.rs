use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum NecoError {
    #[error("missing or malformed cell at row {row}, column {column}: {detail}")]
    BadCell {
        row: usize,
        column: usize,
        detail: String,
    },
    #[error("malformed panel: {0}")]
    MalformedPanel(String),
    #[error("duplicate instrument label `{0}`")]
    DuplicateLabel(String),
    #[error("dates are not strictly increasing at data row {row}")]
    NonMonotoneDates { row: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error("window plan infeasible: {0}")]
    WindowError(String),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("argument {0} outside the open unit interval")]
    DomainError(f64),
    #[error("numerical failure: {0}")]
    NumericalError(String),
    #[error("invalid initial parameters: {0}")]
    InvalidInit(String),
    #[error("fit did not converge: {0}")]
    FitError(String),
    #[error("contagion target {target} unreachable; supremum is {supremum}")]
    CalibrationError { target: f64, supremum: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, NecoError>;
