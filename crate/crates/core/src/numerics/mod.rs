//! Numerical kernels shared by the estimators: symmetric eigendecomposition,
//! least squares, logistic regression, weighted quantiles and check-loss
//! quantile regression.

mod eig;
mod quantile;
mod regression;

use thiserror::Error;

use crate::linprog::{LpError, LpStatus};

pub use eig::{sym_eig, sym_pow, SymEig};
pub use quantile::{check_loss, empirical_quantile, quantile_reg_fit, weighted_quantile};
pub use regression::{
    logistic_fit, ols_fit, sigmoid, LinearModel, LogisticFit, LogisticOptions, ModelKind,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not symmetric within tolerance (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("normal equations are numerically singular; use ridge > 0")]
    SingularDesign,
    #[error("logistic fit diverged (separable data?); use ridge > 0")]
    DivergentFit,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("empty input")]
    EmptyInput,
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("linear program ended {0:?}")]
    LpNotOptimal(LpStatus),
}
