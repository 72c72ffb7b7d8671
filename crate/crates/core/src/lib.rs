//! Prediction intervals under covariate and domain shift by aggregating
//! candidate variance shapes with linear programming.

pub mod aggregate;
pub mod bench;
pub mod candidates;
pub mod conformal;
pub mod dataset;
pub mod densratio;
pub mod linalg;
pub mod linprog;
pub mod numerics;
pub mod scalar;
pub mod transport;

pub type Matrix = linalg::Matrix<f64>;
pub type AffineMap = transport::AffineMap<f64>;
pub type ShapeModel = aggregate::ShapeModel<f64>;
pub type ShrinkResult = aggregate::ShrinkResult<f64>;
pub type LinearProgram = linprog::LinearProgram<f64>;
pub type LinearModel = numerics::LinearModel<f64>;
