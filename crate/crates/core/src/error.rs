use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("{op}: {what} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        op: &'static str,
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("{op}: parameter {name} = {value} is invalid ({requirement})")]
    InvalidParameter {
        op: &'static str,
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix of {rows}x{cols} needs {expected} entries, got {found}")]
    EntryCount {
        rows: usize,
        cols: usize,
        expected: usize,
        found: usize,
    },

    #[error("SVD of a {rows}x{cols} matrix did not converge")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("X-step result is not orthonormal (‖XᵀX − I‖_F = {error:e})")]
    LostOrthogonality { error: f64 },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_positive(op: &'static str, name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            op,
            name,
            value,
            requirement: "must be finite and > 0",
        })
    }
}

pub(crate) fn check_non_negative(op: &'static str, name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            op,
            name,
            value,
            requirement: "must be finite and >= 0",
        })
    }
}
