use thiserror::Error;

/// Failures raised by the sparse kernel.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SparseError {
    #[error("entry ({row},{col}) outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange { row: usize, col: usize, nrows: usize, ncols: usize },
    #[error("malformed sparse structure: {0}")]
    Malformed(&'static str),
    #[error("matrix must be square, got {nrows}x{ncols}")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("numerically singular at column {column} (pivot magnitude {pivot:e})")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Failures raised while reading or validating a case.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("case not found: {0}")]
    NotFound(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed case document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid entry {matrix}({row},{col}): {detail}")]
    InvalidEntry { matrix: String, row: usize, col: usize, detail: String },
    #[error("{matrix} has shape {found_rows}x{found_cols}, expected {rows}x{cols}")]
    Shape { matrix: String, rows: usize, cols: usize, found_rows: usize, found_cols: usize },
    #[error("{table} row {row} references unknown bus {bus}")]
    UnknownBus { table: String, row: usize, bus: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid case: {0}")]
    Invalid(String),
}

/// Failures raised by the KKT backends.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum KktError {
    #[error("time block {block}: {source}")]
    Block { block: usize, source: SparseError },
    #[error("Schur complement: {0}")]
    Schur(SparseError),
    #[error("full system: {0}")]
    Full(SparseError),
    #[error("inconsistent system: {0}")]
    Inconsistent(String),
}

impl KktError {
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            KktError::Block { source: SparseError::Singular { .. }, .. }
                | KktError::Schur(SparseError::Singular { .. })
                | KktError::Full(SparseError::Singular { .. })
        )
    }
}

/// Failures raised by the interior point solver.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence after {} iterations", .0.iterations)]
    MaxIterations(Box<crate::ipm::Solution>),
    #[error("singular KKT system at iteration {iteration}: {source}")]
    Singular { iteration: usize, source: KktError },
    #[error("step length collapsed to {alpha:e} at iteration {iteration}")]
    StepCollapse { iteration: usize, alpha: f64 },
    #[error("non-finite values at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("KKT backend failure at iteration {iteration}: {source}")]
    Kkt { iteration: usize, source: KktError },
}

/// Failures raised by the EV schedule generator.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvError {
    #[error("window of {window_h} h is shorter than the {offset_h} h stay")]
    WindowTooShort { window_h: f64, offset_h: f64 },
    #[error("invalid parameter {name}: {detail}")]
    Parameter { name: &'static str, detail: String },
}
