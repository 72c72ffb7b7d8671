use serde::{Deserialize, Serialize};

use super::AggregateError;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkResult<T> {
    pub lambda_hat: T,
    /// Weighted empirical miscoverage on the calibration block at `lambda_hat`.
    pub achieved_violation: T,
    pub lambda_exceeds_one: bool,
    /// Calibration row whose threshold was selected; `None` when `λ̂ = 0`.
    pub threshold_index: Option<usize>,
}

fn check_inputs<T: Real>(f_hat: &[T], r2: &[T], alpha_level: T) -> Result<(), AggregateError> {
    if r2.is_empty() {
        return Err(AggregateError::InvalidArgument("empty calibration block".into()));
    }
    if f_hat.len() != r2.len() {
        return Err(AggregateError::DimensionMismatch(format!(
            "{} shape values for {} residuals",
            f_hat.len(),
            r2.len()
        )));
    }
    if !(alpha_level >= T::zero()) {
        return Err(AggregateError::InvalidArgument(format!("alpha level {alpha_level} is negative")));
    }
    if r2.iter().chain(f_hat).any(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(AggregateError::InvalidArgument(
            "calibration residuals and shape values must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

/// Scans thresholds `t_(1) ≤ … ≤ t_(n)` and returns the position (in sorted
/// order) of the first group whose strictly-larger mass is within budget,
/// or `None` when `λ = 0` already satisfies it. `mass_above_zero` is the mass
/// violated at `λ = 0`.
fn scan<T: Real>(t: &[T], w: &[T], order: &[usize], budget: T, mass_at_zero: T) -> Result<Option<usize>, AggregateError> {
    if mass_at_zero <= budget {
        return Ok(None);
    }
    // suffix[k] = mass of thresholds strictly after sorted position k's group.
    let n = order.len();
    let mut suffix = vec![T::zero(); n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + w[order[k]];
    }
    let mut k = 0;
    while k < n {
        let v = t[order[k]];
        let mut end = k;
        while end < n && t[order[end]] == v {
            end += 1;
        }
        if v.is_infinite() {
            break;
        }
        if v > T::zero() && suffix[end] <= budget {
            return Ok(Some(k));
        }
        k = end;
    }
    Err(AggregateError::Unbounded(
        "rows with zero shape and positive residual exceed the miscoverage budget".into(),
    ))
}

fn sorted_order<T: Real>(t: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[a].partial_cmp(&t[b]).unwrap().then(a.cmp(&b)));
    order
}

/// Covariate-shift calibration: the smallest `λ ≥ 0` with
/// `(1/n) Σ ŵ_i 1{r²_i > λ·max(f̂_i, floor)} ≤ α`.
///
/// With `normalize` the weights are divided by their sum instead of `n`.
/// The selected threshold `r²_i/f̂_i` is nudged up by whole ulps until the
/// strict inequality agrees with direct evaluation on every row at or below
/// it, so the reported violation is exactly what a caller recomputes.
pub fn shrink_cov_shift<T: Real>(
    f_hat: &[T],
    r2: &[T],
    w: &[T],
    alpha_level: T,
    floor: T,
    normalize: bool,
) -> Result<ShrinkResult<T>, AggregateError> {
    check_inputs(f_hat, r2, alpha_level)?;
    if w.len() != r2.len() {
        return Err(AggregateError::DimensionMismatch(format!("{} weights for {} rows", w.len(), r2.len())));
    }
    if w.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(AggregateError::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    if !(floor >= T::zero()) {
        return Err(AggregateError::InvalidArgument("floor must be nonnegative".into()));
    }
    let denom = if normalize {
        w.iter().copied().sum::<T>()
    } else {
        T::from_usize(r2.len()).unwrap()
    };
    if !(denom > T::zero()) {
        return Err(AggregateError::InvalidArgument("calibration weights sum to zero".into()));
    }
    let f: Vec<T> = f_hat.iter().map(|&v| v.max(floor)).collect();
    let t: Vec<T> = r2
        .iter()
        .zip(&f)
        .map(|(&r, &fi)| {
            if r == T::zero() {
                T::zero()
            } else if fi == T::zero() {
                T::infinity()
            } else {
                r / fi
            }
        })
        .collect();
    let violation = |lam: T| {
        r2.iter()
            .zip(&f)
            .zip(w)
            .filter(|((&r, &fi), _)| r > lam * fi)
            .map(|(_, &wi)| wi)
            .sum::<T>()
            / denom
    };
    let budget = alpha_level * denom;
    let order = sorted_order(&t);
    let mass_at_zero: T = t.iter().zip(w).filter(|(&ti, _)| ti > T::zero()).map(|(_, &wi)| wi).sum();
    let picked = scan(&t, w, &order, budget, mass_at_zero)?;
    let (lambda_hat, threshold_index) = match picked {
        None => (T::zero(), None),
        Some(k) => {
            let mut lam = t[order[k]];
            let mut guard = 0;
            while guard < 64 && order.iter().any(|&i| t[i] <= t[order[k]] && r2[i] > lam * f[i]) {
                lam = lam.next_up();
                guard += 1;
            }
            (lam, Some(order[k]))
        }
    };
    Ok(ShrinkResult {
        lambda_hat,
        achieved_violation: violation(lambda_hat),
        lambda_exceeds_one: lambda_hat > T::one(),
        threshold_index,
    })
}

/// Transport calibration with the non-strict convention: `λ̂` is the smallest
/// representable `λ` with `(1/n) Σ 1{r²_i ≥ λ(f̂_i + δ)} ≤ α`, i.e. one ulp
/// (or a few, see [`shrink_cov_shift`]) above the selected threshold. When
/// every positive `λ` qualifies the threshold is 0 and `λ̂` is the smallest
/// positive value, since `λ = 0` itself violates every row.
pub fn shrink_source<T: Real>(
    f_hat: &[T],
    r2: &[T],
    alpha_level: T,
    alg2_delta: T,
) -> Result<ShrinkResult<T>, AggregateError> {
    check_inputs(f_hat, r2, alpha_level)?;
    if !(alg2_delta >= T::zero()) {
        return Err(AggregateError::InvalidArgument("delta must be nonnegative".into()));
    }
    let n = T::from_usize(r2.len()).unwrap();
    let g: Vec<T> = f_hat.iter().map(|&v| v + alg2_delta).collect();
    let t: Vec<T> = r2
        .iter()
        .zip(&g)
        // `r² ≥ λ·0` holds for every λ, so a zero scale is never covered.
        .map(|(&r, &gi)| if gi == T::zero() { T::infinity() } else { r / gi })
        .collect();
    let violation = |lam: T| {
        let c = r2.iter().zip(&g).filter(|(&r, &gi)| r >= lam * gi).count();
        T::from_usize(c).unwrap() / n
    };
    let ones = vec![T::one(); r2.len()];
    let order = sorted_order(&t);
    let mass_at_zero = T::from_usize(t.iter().filter(|&&ti| ti > T::zero()).count()).unwrap();
    // A row is violated for every λ ≤ t_i, so a group at threshold v leaves
    // exactly the strictly-larger thresholds violated just above v.
    let picked = scan(&t, &ones, &order, alpha_level * n, mass_at_zero)?;
    let (v, threshold_index) = match picked {
        None => (T::zero(), None),
        Some(k) => (t[order[k]], Some(order[k])),
    };
    let mut lambda_hat = v.next_up();
    let mut guard = 0;
    while guard < 64 && order.iter().any(|&i| t[i] <= v && r2[i] >= lambda_hat * g[i]) {
        lambda_hat = lambda_hat.next_up();
        guard += 1;
    }
    Ok(ShrinkResult {
        lambda_hat,
        achieved_violation: violation(lambda_hat),
        lambda_exceeds_one: lambda_hat > T::one(),
        threshold_index,
    })
}
