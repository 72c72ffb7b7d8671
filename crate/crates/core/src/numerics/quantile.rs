use super::regression::{LinearModel, ModelKind};
use super::NumericsError;
use crate::linalg::Matrix;
use crate::linprog::{solve_lp_with, LinearProgram, LpStatus, SolverOptions};
use crate::scalar::Real;

/// `inf{v ∈ values : Σ_{values_i ≤ v} weights_i ≥ q · Σ weights}`.
///
/// Equal values are merged before the cumulative scan, so the answer never
/// depends on input order. `+∞` entries are allowed.
pub fn weighted_quantile<T: Real>(values: &[T], weights: &[T], q: T) -> Result<T, NumericsError> {
    if values.is_empty() {
        return Err(NumericsError::EmptyInput);
    }
    if values.len() != weights.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if !(q >= T::zero() && q <= T::one()) {
        return Err(NumericsError::InvalidArgument(format!("quantile level {q} outside [0, 1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(NumericsError::InvalidArgument("NaN value".into()));
    }
    if weights.iter().any(|w| !(w >= &T::zero()) || !w.is_finite()) {
        return Err(NumericsError::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(NumericsError::AllZeroWeights);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let threshold = q * total;
    let mut cum = T::zero();
    let mut k = 0;
    while k < order.len() {
        let v = values[order[k]];
        while k < order.len() && values[order[k]] == v {
            cum = cum + weights[order[k]];
            k += 1;
        }
        if cum >= threshold {
            return Ok(v);
        }
    }
    // Only reachable through rounding when q = 1.
    Ok(values[*order.last().unwrap()])
}

/// Unweighted quantile under the same convention: the `⌈q·n⌉`-th order
/// statistic (the smallest value when `q = 0`).
pub fn empirical_quantile<T: Real>(values: &[T], q: T) -> Result<T, NumericsError> {
    if values.is_empty() {
        return Err(NumericsError::EmptyInput);
    }
    if !(q >= T::zero() && q <= T::one()) {
        return Err(NumericsError::InvalidArgument(format!("quantile level {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    let n = T::from_usize(sorted.len()).unwrap();
    let k = (q * n).ceil().to_usize().unwrap_or(0).clamp(1, sorted.len());
    Ok(sorted[k - 1])
}

/// `Σ ρ_τ(y_i − β₀ − x_iᵀβ)` with `ρ_τ(r) = max(τr, (τ−1)r)`.
pub fn check_loss<T: Real>(model: &LinearModel<T>, x: &Matrix<T>, y: &[T], tau: T) -> T {
    x.rows_iter()
        .zip(y)
        .map(|(r, &yi)| {
            let res = yi - model.score_row(r);
            (tau * res).max((tau - T::one()) * res)
        })
        .sum()
}

/// Linear quantile regression at level `tau`.
///
/// With residual `r_i = y_i − x̃_iβ` split as `τ r_i + e_i` where
/// `e_i = max(0, −r_i)` is the negative part, the check loss becomes the LP
///
/// ```text
/// min  −τ(Σ x̃_i)ᵀβ + Σ e_i      s.t.  x̃_iβ − e_i ≤ y_i,  e ≥ 0,  β free
/// ```
///
/// whose optimum plus `τ Σ y_i` equals the minimal check loss.
pub fn quantile_reg_fit<T: Real>(x: &Matrix<T>, y: &[T], tau: T) -> Result<LinearModel<T>, NumericsError> {
    let n = x.nrows();
    let d = x.ncols();
    if n != y.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "{n} covariate rows but {} responses",
            y.len()
        )));
    }
    if !(tau > T::zero() && tau < T::one()) {
        return Err(NumericsError::InvalidArgument(format!("tau {tau} outside (0, 1)")));
    }
    if n < d + 2 {
        return Err(NumericsError::InvalidArgument(format!(
            "quantile regression needs at least {} rows, got {n}",
            d + 2
        )));
    }
    let p = d + 1;
    let nv = p + n;
    let mut objective = vec![T::zero(); nv];
    let mut lhs = Matrix::zeros(n, nv);
    for (i, r) in x.rows_iter().enumerate() {
        objective[0] = objective[0] - tau;
        lhs[(i, 0)] = T::one();
        for (j, &v) in r.iter().enumerate() {
            objective[1 + j] = objective[1 + j] - tau * v;
            lhs[(i, 1 + j)] = v;
        }
        objective[p + i] = T::one();
        lhs[(i, p + i)] = -T::one();
    }
    let mut mask = vec![true; nv];
    mask[..p].iter_mut().for_each(|m| *m = false);
    let lp = LinearProgram::new(objective, lhs, y.to_vec(), mask)?;
    let sol = solve_lp_with(&lp, &SolverOptions::default())?;
    if sol.status != LpStatus::Optimal {
        return Err(NumericsError::LpNotOptimal(sol.status));
    }
    Ok(LinearModel {
        coefficients: sol.x[..p].to_vec(),
        kind: ModelKind::Quantile { tau },
    })
}
