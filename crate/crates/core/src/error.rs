use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum HierError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate covariate: {0}")]
    DegenerateCovariate(String),

    #[error("negative regularization parameter: {0}")]
    NegativeLambda(f64),

    #[error("labels must be in {{-1, +1}} or {{0, 1}}: {0}")]
    InvalidLabels(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("internal numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, HierError>;

pub(crate) fn check_finite<'a>(
    values: impl IntoIterator<Item = &'a f64>,
    what: &'static str,
) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(HierError::NonFinite(what))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda < 0.0 {
        Err(HierError::NegativeLambda(lambda))
    } else {
        Ok(())
    }
}
