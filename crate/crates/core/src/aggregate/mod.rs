//! Shape estimation by linear programming, shrinkage calibration, and the
//! fitted prediction-interval model.

mod model;
mod pipeline;
mod shape;
mod shrink;

use thiserror::Error;

use crate::candidates::CandidateError;
use crate::dataset::DataError;
use crate::linprog::{LpError, LpStatus};
use crate::numerics::NumericsError;

pub use model::{diagnose, predict_interval, shape_at, Adapter, Diagnostics, IntervalBatch, PiModel};
pub use pipeline::{
    fit_alg1, fit_alg2, split_source, Alg1Config, Alg2Config, FitOutput, SourceBlocks, Weighting,
};
pub use shape::{
    fit_shape_cov_shift, fit_shape_source, hinge, hinge_risk, ShapeMode, ShapeModel, ShapeOptions,
};
pub use shrink::{shrink_cov_shift, shrink_source, ShrinkResult};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("shape linear program is infeasible")]
    Infeasible,
    #[error("shrink level is unbounded: {0}")]
    Unbounded(String),
    #[error("linear program ended with status {0:?}")]
    LpNotOptimal(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Candidate(#[from] CandidateError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
