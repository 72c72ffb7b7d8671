use serde::{Deserialize, Serialize};

use super::AggregateError;
use crate::linalg::Matrix;
use crate::linprog::{solve_lp_with, LinearProgram, LpStatus, SolverOptions};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeMode {
    /// Cover every kept source row, minimize the mean width on the target.
    CovShiftExact,
    /// Weighted hinge budget instead of hard covering constraints.
    CovShiftHinge,
    /// Cover every source row, minimize the mean width on the source.
    SourceExact,
}

/// Aggregation weights `α ≥ 0`; the fitted shape is `f̂(x) = Σ_j α_j f_j(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeModel<T> {
    pub alpha: Vec<T>,
    pub mode: ShapeMode,
    /// Hinge scale δ, in squared-response units.
    pub delta: T,
    /// Hinge budget ε on the weighted mean hinge loss.
    pub epsilon: T,
    /// Rows with weight at or below this are dropped from the constraints.
    pub support_threshold: T,
    /// Optimal LP objective (mean fitted shape over the objective rows).
    pub objective: T,
}

impl<T: Real> ShapeModel<T> {
    /// `φ·α` for a matrix of candidate evaluations.
    pub fn eval(&self, phi: &Matrix<T>) -> Vec<T> {
        phi.matvec(&self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeOptions<T> {
    pub mode: ShapeMode,
    pub delta: T,
    pub epsilon: T,
    pub support_threshold: T,
    pub feas_tol: T,
}

impl<T: Real> ShapeOptions<T> {
    pub fn exact() -> Self {
        Self {
            mode: ShapeMode::CovShiftExact,
            delta: T::zero(),
            epsilon: T::zero(),
            support_threshold: T::zero(),
            feas_tol: T::default_feas_tol(),
        }
    }

    pub fn hinge(delta: T, epsilon: T) -> Self {
        Self {
            mode: ShapeMode::CovShiftHinge,
            delta,
            epsilon,
            ..Self::exact()
        }
    }
}

/// `h_δ(t) = max{0, t/δ + 1}`.
pub fn hinge<T: Real>(t: T, delta: T) -> T {
    (t / delta + T::one()).max(T::zero())
}

/// `(1/n) Σ ŵ_i h_δ(r²_i − f̂_i)`.
pub fn hinge_risk<T: Real>(f_hat: &[T], r2: &[T], w: &[T], delta: T) -> T {
    let n = T::from_usize(r2.len()).unwrap();
    f_hat
        .iter()
        .zip(r2)
        .zip(w)
        .map(|((&f, &r), &wi)| wi * hinge(r - f, delta))
        .sum::<T>()
        / n
}

fn column_means<T: Real>(phi: &Matrix<T>) -> Result<Vec<T>, AggregateError> {
    if phi.nrows() == 0 {
        return Err(AggregateError::InvalidArgument("no rows in the objective sample".into()));
    }
    Ok(phi.column_means())
}

fn check_shapes<T: Real>(phi_source: &Matrix<T>, phi_target: &Matrix<T>, r2: &[T]) -> Result<(), AggregateError> {
    let k = phi_source.ncols();
    if k == 0 {
        return Err(AggregateError::InvalidArgument("empty candidate bank".into()));
    }
    if phi_target.ncols() != k {
        return Err(AggregateError::DimensionMismatch(format!(
            "{k} source candidates but {} target candidates",
            phi_target.ncols()
        )));
    }
    if phi_source.nrows() != r2.len() {
        return Err(AggregateError::DimensionMismatch(format!(
            "{} source rows for {} residuals",
            phi_source.nrows(),
            r2.len()
        )));
    }
    if r2.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(AggregateError::InvalidArgument("squared residuals must be finite and nonnegative".into()));
    }
    if !phi_source.all_finite() || !phi_target.all_finite() {
        return Err(AggregateError::InvalidArgument("non-finite candidate evaluation".into()));
    }
    let negative = |m: &Matrix<T>| m.as_slice().iter().any(|&v| v < T::zero());
    if negative(phi_source) || negative(phi_target) {
        return Err(AggregateError::InvalidArgument("candidate evaluations must be nonnegative".into()));
    }
    Ok(())
}

/// `min c·α` subject to `φ_i·α ≥ r²_i` on `rows`, `α ≥ 0`. The returned α is
/// rescaled, if needed, so that the covering holds in direct evaluation.
fn covering_lp<T: Real>(
    phi: &Matrix<T>,
    rows: &[usize],
    r2: &[T],
    c: Vec<T>,
    feas_tol: T,
) -> Result<(Vec<T>, T), AggregateError> {
    let k = phi.ncols();
    let active: Vec<usize> = rows.iter().copied().filter(|&i| r2[i] > T::zero()).collect();
    if active.is_empty() {
        return Ok((vec![T::zero(); k], T::zero()));
    }
    let mut lhs = Matrix::zeros(active.len(), k);
    let mut rhs = Vec::with_capacity(active.len());
    for (row, &i) in active.iter().enumerate() {
        for j in 0..k {
            lhs[(row, j)] = -phi[(i, j)];
        }
        rhs.push(-r2[i]);
    }
    let lp = LinearProgram::nonneg(c.clone(), lhs, rhs)?;
    let sol = solve_lp_with(
        &lp,
        &SolverOptions {
            feas_tol,
            ..Default::default()
        },
    )?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(AggregateError::Infeasible),
        LpStatus::Unbounded => return Err(AggregateError::LpNotOptimal(sol.status)),
    }
    let mut alpha: Vec<T> = sol.x.iter().map(|&a| a.max(T::zero())).collect();
    let mut scale = T::one();
    for &i in &active {
        let f: T = (0..k).map(|j| phi[(i, j)] * alpha[j]).sum();
        if f < r2[i] {
            if f <= T::zero() {
                return Err(AggregateError::Infeasible);
            }
            scale = scale.max(r2[i] / f);
        }
    }
    if scale > T::one() {
        let bump = scale.next_up();
        alpha.iter_mut().for_each(|a| *a = *a * bump);
    }
    let objective = c.iter().zip(&alpha).map(|(&a, &b)| a * b).sum();
    Ok((alpha, objective))
}

/// Shape estimation under covariate shift.
///
/// `phi_source` holds candidate evaluations on the shape block, `r2` its
/// squared residuals and `weights` the density ratio at those rows;
/// `phi_target` holds evaluations on the target covariates, whose column
/// means form the objective.
pub fn fit_shape_cov_shift<T: Real>(
    phi_source: &Matrix<T>,
    phi_target: &Matrix<T>,
    r2: &[T],
    weights: &[T],
    opts: &ShapeOptions<T>,
) -> Result<ShapeModel<T>, AggregateError> {
    check_shapes(phi_source, phi_target, r2)?;
    if weights.len() != r2.len() {
        return Err(AggregateError::DimensionMismatch(format!(
            "{} weights for {} rows",
            weights.len(),
            r2.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
        return Err(AggregateError::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let c = column_means(phi_target)?;
    match opts.mode {
        ShapeMode::CovShiftExact => {
            let rows: Vec<usize> = (0..r2.len()).filter(|&i| weights[i] > opts.support_threshold).collect();
            let (alpha, objective) = covering_lp(phi_source, &rows, r2, c, opts.feas_tol)?;
            Ok(ShapeModel {
                alpha,
                mode: ShapeMode::CovShiftExact,
                delta: opts.delta,
                epsilon: opts.epsilon,
                support_threshold: opts.support_threshold,
                objective,
            })
        }
        ShapeMode::CovShiftHinge => hinge_lp(phi_source, r2, weights, c, opts),
        ShapeMode::SourceExact => Err(AggregateError::InvalidArgument(
            "source_exact mode is fitted by fit_shape_source".into(),
        )),
    }
}

/// Variables `(α, s)`; rows `−φ_iα − δ s_i ≤ −r²_i − δ` for each weighted row
/// and `(1/n) Σ ŵ_i s_i ≤ ε`.
fn hinge_lp<T: Real>(
    phi: &Matrix<T>,
    r2: &[T],
    w: &[T],
    c: Vec<T>,
    opts: &ShapeOptions<T>,
) -> Result<ShapeModel<T>, AggregateError> {
    let delta = opts.delta;
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(AggregateError::InvalidArgument("hinge mode needs delta > 0".into()));
    }
    if !(opts.epsilon >= T::zero()) {
        return Err(AggregateError::InvalidArgument("hinge budget epsilon must be nonnegative".into()));
    }
    let k = phi.ncols();
    let n = T::from_usize(r2.len()).unwrap();
    // Rows with zero weight neither cost budget nor constrain α.
    let rows: Vec<usize> = (0..r2.len()).filter(|&i| w[i] > T::zero()).collect();
    let m = rows.len();
    let nv = k + m;
    let mut objective = c.clone();
    objective.resize(nv, T::zero());
    let mut lhs = Matrix::zeros(m + 1, nv);
    let mut rhs = Vec::with_capacity(m + 1);
    for (s, &i) in rows.iter().enumerate() {
        for j in 0..k {
            lhs[(s, j)] = -phi[(i, j)];
        }
        lhs[(s, k + s)] = -delta;
        rhs.push(-r2[i] - delta);
    }
    for (s, &i) in rows.iter().enumerate() {
        lhs[(m, k + s)] = w[i] / n;
    }
    rhs.push(opts.epsilon);
    let lp = LinearProgram::nonneg(objective, lhs, rhs)?;
    let sol = solve_lp_with(
        &lp,
        &SolverOptions {
            feas_tol: opts.feas_tol,
            ..Default::default()
        },
    )?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(AggregateError::Infeasible),
        LpStatus::Unbounded => return Err(AggregateError::LpNotOptimal(sol.status)),
    }
    let mut alpha: Vec<T> = sol.x[..k].iter().map(|&a| a.max(T::zero())).collect();
    // The slacks dominate the hinge values only up to the solver tolerance;
    // inflate α until the budget holds in direct evaluation.
    let budget = opts.epsilon + opts.feas_tol;
    let mut factor = T::one() + T::epsilon() * T::lit(16.0);
    for _ in 0..200 {
        let f = phi.matvec(&alpha);
        if hinge_risk(&f, r2, w, delta) <= budget {
            let objective = c.iter().zip(&alpha).map(|(&a, &b)| a * b).sum();
            return Ok(ShapeModel {
                alpha,
                mode: ShapeMode::CovShiftHinge,
                delta,
                epsilon: opts.epsilon,
                support_threshold: opts.support_threshold,
                objective,
            });
        }
        alpha.iter_mut().for_each(|a| *a = *a * factor);
        factor = factor * factor;
    }
    Err(AggregateError::Infeasible)
}

/// Shape estimation for the transport pipeline: every source row is covered
/// and the objective is the mean shape over the same rows.
pub fn fit_shape_source<T: Real>(phi_source: &Matrix<T>, r2: &[T], feas_tol: T) -> Result<ShapeModel<T>, AggregateError> {
    check_shapes(phi_source, phi_source, r2)?;
    let c = column_means(phi_source)?;
    let rows: Vec<usize> = (0..r2.len()).collect();
    let (alpha, objective) = covering_lp(phi_source, &rows, r2, c, feas_tol)?;
    Ok(ShapeModel {
        alpha,
        mode: ShapeMode::SourceExact,
        delta: T::zero(),
        epsilon: T::zero(),
        support_threshold: T::zero(),
        objective,
    })
}
