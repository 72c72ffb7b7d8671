use serde::{Deserialize, Serialize};

use super::NumericsError;
use crate::linalg::{cholesky_solve, dot, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind<T> {
    OlsMean,
    Logistic,
    Quantile { tau: T },
}

/// Affine predictor `β₀ + xᵀβ`; `coefficients[0]` is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    pub coefficients: Vec<T>,
    pub kind: ModelKind<T>,
}

impl<T: Real> LinearModel<T> {
    pub fn dim(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Linear score `β₀ + xᵀβ` (log-odds for logistic models).
    pub fn score_row(&self, x: &[T]) -> T {
        self.coefficients[0] + dot(&self.coefficients[1..], x)
    }

    /// Linear scores for every row; panics on dimension mismatch.
    pub fn scores(&self, x: &Matrix<T>) -> Vec<T> {
        assert_eq!(x.ncols(), self.dim(), "covariate dimension mismatch");
        x.rows_iter().map(|r| self.score_row(r)).collect()
    }

    /// Predictions on the response scale: probabilities for logistic models,
    /// the linear score otherwise.
    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        let s = self.scores(x);
        match self.kind {
            ModelKind::Logistic => s.into_iter().map(sigmoid).collect(),
            _ => s,
        }
    }
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus<T: Real>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn check_design<T: Real>(x: &Matrix<T>, n_targets: usize) -> Result<(), NumericsError> {
    if x.nrows() == 0 {
        return Err(NumericsError::EmptyInput);
    }
    if x.nrows() != n_targets {
        return Err(NumericsError::DimensionMismatch(format!(
            "{} covariate rows but {} responses",
            x.nrows(),
            n_targets
        )));
    }
    if !x.all_finite() {
        return Err(NumericsError::InvalidArgument("non-finite covariate".into()));
    }
    Ok(())
}

/// Gram matrix `X̃ᵀWX̃` and `X̃ᵀv` of the design with a leading ones column.
fn weighted_normal_equations<T: Real>(x: &Matrix<T>, w: Option<&[T]>, v: &[T]) -> (Matrix<T>, Vec<T>) {
    let p = x.ncols() + 1;
    let mut g = Matrix::zeros(p, p);
    let mut rhs = vec![T::zero(); p];
    let mut row = vec![T::one(); p];
    for (i, r) in x.rows_iter().enumerate() {
        row[1..].copy_from_slice(r);
        let wi = w.map_or(T::one(), |w| w[i]);
        for a in 0..p {
            let wa = wi * row[a];
            rhs[a] = rhs[a] + row[a] * v[i];
            for b in a..p {
                g[(a, b)] = g[(a, b)] + wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    (g, rhs)
}

/// Least squares with an intercept column, solving `(X̃ᵀX̃ + ridge·I)β = X̃ᵀy`.
pub fn ols_fit<T: Real>(x: &Matrix<T>, y: &[T], ridge: T) -> Result<LinearModel<T>, NumericsError> {
    check_design(x, y.len())?;
    if ridge < T::zero() {
        return Err(NumericsError::InvalidArgument("ridge must be nonnegative".into()));
    }
    if ridge == T::zero() && x.nrows() < x.ncols() + 1 {
        return Err(NumericsError::SingularDesign);
    }
    let (mut g, rhs) = weighted_normal_equations(x, None, y);
    for a in 0..g.nrows() {
        g[(a, a)] = g[(a, a)] + ridge;
    }
    let coefficients = cholesky_solve(&g, &rhs).ok_or(NumericsError::SingularDesign)?;
    Ok(LinearModel {
        coefficients,
        kind: ModelKind::OlsMean,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions<T> {
    /// Penalty on the slopes (the intercept is not penalized).
    pub ridge: T,
    pub max_iter: usize,
    pub grad_tol: T,
}

impl<T: Real> Default for LogisticOptions<T> {
    fn default() -> Self {
        Self {
            ridge: T::lit(1e-6),
            max_iter: 100,
            grad_tol: T::lit(1e-8),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit<T> {
    pub model: LinearModel<T>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: T,
    /// Penalized objective after each accepted iterate, starting at `β = 0`.
    pub objective_trace: Vec<T>,
}

/// Mean negative log-likelihood plus `ridge/2 · ‖slopes‖²`.
fn logistic_objective<T: Real>(x: &Matrix<T>, y: &[T], beta: &[T], ridge: T) -> T {
    let n = T::from_usize(x.nrows()).unwrap();
    let nll = x
        .rows_iter()
        .zip(y)
        .map(|(r, &yi)| {
            let z = beta[0] + dot(&beta[1..], r);
            softplus(z) - yi * z
        })
        .sum::<T>()
        / n;
    let pen = beta[1..].iter().map(|&b| b * b).sum::<T>() * ridge * T::lit(0.5);
    nll + pen
}

/// Ridge-penalized logistic regression by iteratively reweighted least
/// squares (Newton steps), halving the step whenever the penalized objective
/// would increase.
pub fn logistic_fit<T: Real>(
    x: &Matrix<T>,
    labels: &[T],
    opts: &LogisticOptions<T>,
) -> Result<LogisticFit<T>, NumericsError> {
    check_design(x, labels.len())?;
    if opts.ridge < T::zero() {
        return Err(NumericsError::InvalidArgument("ridge must be nonnegative".into()));
    }
    let ones = labels.iter().filter(|&&v| v == T::one()).count();
    let zeros = labels.iter().filter(|&&v| v == T::zero()).count();
    if ones + zeros != labels.len() {
        return Err(NumericsError::InvalidArgument("labels must be 0 or 1".into()));
    }
    if ones == 0 || zeros == 0 {
        return Err(NumericsError::SingleClass);
    }

    let n = T::from_usize(x.nrows()).unwrap();
    let p = x.ncols() + 1;
    let mut beta = vec![T::zero(); p];
    let mut obj = logistic_objective(x, labels, &beta, opts.ridge);
    let mut trace = vec![obj];
    let mut grad_norm = T::infinity();
    let mut converged = false;
    let mut iterations = 0;
    let divergence_cap = T::lit(1e6);

    for it in 0..opts.max_iter {
        let probs: Vec<T> = x.rows_iter().map(|r| sigmoid(beta[0] + dot(&beta[1..], r))).collect();
        let resid: Vec<T> = probs.iter().zip(labels).map(|(&p, &y)| (p - y) / n).collect();
        let w: Vec<T> = probs
            .iter()
            .map(|&p| (p * (T::one() - p)).max(T::lit(1e-12)) / n)
            .collect();
        let (mut h, mut g) = weighted_normal_equations(x, Some(&w), &resid);
        for a in 1..p {
            g[a] = g[a] + opts.ridge * beta[a];
            h[(a, a)] = h[(a, a)] + opts.ridge;
        }
        grad_norm = g.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        iterations = it;
        if grad_norm <= opts.grad_tol {
            converged = true;
            break;
        }
        let Some(step) = cholesky_solve(&h, &g) else {
            if opts.ridge == T::zero() {
                return Err(NumericsError::DivergentFit);
            }
            break;
        };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b - t * s).collect();
            let cand_obj = logistic_objective(x, labels, &cand, opts.ridge);
            if cand_obj <= obj {
                beta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t = t * T::lit(0.5);
        }
        if !accepted {
            break;
        }
        trace.push(obj);
        if opts.ridge == T::zero()
            && (beta.iter().any(|b| b.abs() > divergence_cap) || obj < T::lit(1e-10))
        {
            return Err(NumericsError::DivergentFit);
        }
        iterations = it + 1;
    }
    if !converged {
        // Re-evaluate the gradient at the final iterate.
        let probs: Vec<T> = x.rows_iter().map(|r| sigmoid(beta[0] + dot(&beta[1..], r))).collect();
        let resid: Vec<T> = probs.iter().zip(labels).map(|(&p, &y)| (p - y) / n).collect();
        let (_, mut g) = weighted_normal_equations(x, None, &resid);
        for a in 1..p {
            g[a] = g[a] + opts.ridge * beta[a];
        }
        grad_norm = g.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        converged = grad_norm <= opts.grad_tol;
        if opts.ridge == T::zero() && !converged && beta.iter().any(|b| b.abs() > T::lit(1e3)) {
            return Err(NumericsError::DivergentFit);
        }
    }
    // Without a penalty the MLE does not exist when the fitted hyperplane
    // separates the classes; the small gradient is then an artefact.
    if opts.ridge == T::zero() {
        let separated = x
            .rows_iter()
            .zip(labels)
            .all(|(r, &y)| (beta[0] + dot(&beta[1..], r)) * (y + y - T::one()) > T::zero());
        if separated {
            return Err(NumericsError::DivergentFit);
        }
    }
    Ok(LogisticFit {
        model: LinearModel {
            coefficients: beta,
            kind: ModelKind::Logistic,
        },
        converged,
        iterations,
        grad_norm,
        objective_trace: trace,
    })
}
