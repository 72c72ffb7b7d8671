//! Affine transport `T̂(x) = μ̂_S + A(x − μ̂_T)` from target to source covariates.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::numerics::{sym_pow, NumericsError};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    /// Closed-form optimal transport between Gaussians with the sample moments.
    GaussianOt,
    /// Whitening by the target covariance, recolouring by the source one.
    Coral,
    /// Per-coordinate standardization.
    LocationScale,
}

/// `T̂(x) = A·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap<T> {
    pub a: Matrix<T>,
    pub b: Vec<T>,
    pub mode: TransportMode,
}

impl<T: Real> AffineMap<T> {
    pub fn identity(d: usize) -> Self {
        Self {
            a: Matrix::identity(d),
            b: vec![T::zero(); d],
            mode: TransportMode::LocationScale,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn apply(&self, x: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
        let d = self.dim();
        if x.ncols() != d {
            return Err(NumericsError::DimensionMismatch(format!(
                "map expects {d} covariates, got {}",
                x.ncols()
            )));
        }
        let mut out = Matrix::zeros(x.nrows(), d);
        for (i, r) in x.rows_iter().enumerate() {
            let v = self.a.matvec(r);
            for j in 0..d {
                out[(i, j)] = v[j] + self.b[j];
            }
        }
        Ok(out)
    }
}

fn symmetrize<T: Real>(m: &mut Matrix<T>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (m[(i, j)] + m[(j, i)]) * T::lit(0.5);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

fn regularized_cov<T: Real>(x: &Matrix<T>, ridge: T) -> Matrix<T> {
    let mut c = x.covariance();
    symmetrize(&mut c);
    for i in 0..c.nrows() {
        c[(i, i)] = c[(i, i)] + ridge;
    }
    c
}

/// Fits the map sending the target sample onto the source sample's first two
/// moments. Covariances get `cov_ridge·I` before any matrix root.
pub fn fit_affine_transport<T: Real>(
    target_x: &Matrix<T>,
    source_x: &Matrix<T>,
    mode: TransportMode,
    cov_ridge: T,
) -> Result<AffineMap<T>, NumericsError> {
    if target_x.nrows() == 0 || source_x.nrows() == 0 {
        return Err(NumericsError::EmptyInput);
    }
    let d = source_x.ncols();
    if target_x.ncols() != d {
        return Err(NumericsError::DimensionMismatch(format!(
            "target has {} covariates, source {d}",
            target_x.ncols()
        )));
    }
    if target_x.nrows() < 2 || source_x.nrows() < 2 {
        return Err(NumericsError::InvalidArgument("need two rows per sample for a covariance".into()));
    }
    let mu_t = target_x.column_means();
    let mu_s = source_x.column_means();
    let cov_t = regularized_cov(target_x, cov_ridge);
    let cov_s = regularized_cov(source_x, cov_ridge);
    let tol = T::epsilon();
    let a = match mode {
        TransportMode::GaussianOt => {
            let rt = sym_pow(&cov_t, T::lit(0.5), tol)?;
            let rt_inv = sym_pow(&cov_t, T::lit(-0.5), tol)?;
            let mut mid = rt.matmul(&cov_s).matmul(&rt);
            symmetrize(&mut mid);
            let mid_root = sym_pow(&mid, T::lit(0.5), tol)?;
            let mut a = rt_inv.matmul(&mid_root).matmul(&rt_inv);
            symmetrize(&mut a);
            a
        }
        TransportMode::Coral => {
            let rs = sym_pow(&cov_s, T::lit(0.5), tol)?;
            let rt_inv = sym_pow(&cov_t, T::lit(-0.5), tol)?;
            rs.matmul(&rt_inv)
        }
        TransportMode::LocationScale => {
            let mut diag = Vec::with_capacity(d);
            for j in 0..d {
                if !(cov_t[(j, j)] > T::zero()) {
                    return Err(NumericsError::InvalidArgument(format!(
                        "target coordinate {j} has zero variance"
                    )));
                }
                diag.push((cov_s[(j, j)] / cov_t[(j, j)]).sqrt());
            }
            Matrix::from_diag(&diag)
        }
    };
    let a_mu = a.matvec(&mu_t);
    let b = mu_s.iter().zip(&a_mu).map(|(&s, &m)| s - m).collect();
    Ok(AffineMap { a, b, mode })
}

/// V-statistic energy distance `2E‖X−Y‖ − E‖X−X′‖ − E‖Y−Y′‖`. Quadratic in
/// the sample sizes; subsample large inputs first.
pub fn energy_distance<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T, NumericsError> {
    if a.ncols() != b.ncols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "samples have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(NumericsError::EmptyInput);
    }
    let mean_dist = |p: &Matrix<T>, q: &Matrix<T>| {
        let mut s = T::zero();
        for r in p.rows_iter() {
            for t in q.rows_iter() {
                s = s + r.iter().zip(t).map(|(&u, &v)| (u - v) * (u - v)).sum::<T>().sqrt();
            }
        }
        s / T::from_usize(p.nrows() * q.nrows()).unwrap()
    };
    Ok(T::lit(2.0) * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map_returns_input() {
        let x = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]).unwrap();
        assert_eq!(AffineMap::identity(2).apply(&x).unwrap(), x);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(AffineMap::<f64>::identity(2).apply(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn diagonal_case_by_hand() {
        // Target covariance diag(1,4), source diag(4,1): A = diag(2, 0.5).
        let t = Matrix::<f64>::from_rows(&[[1.0, 2.0], [-1.0, -2.0], [1.0, -2.0], [-1.0, 2.0]]).unwrap();
        let s = Matrix::from_rows(&[[2.0, 1.0], [-2.0, -1.0], [2.0, -1.0], [-2.0, 1.0]]).unwrap();
        for mode in [TransportMode::GaussianOt, TransportMode::Coral, TransportMode::LocationScale] {
            let m = fit_affine_transport(&t, &s, mode, 0.0).unwrap();
            assert!(m.a.max_abs_diff(&Matrix::from_diag(&[2.0, 0.5])) < 1e-12, "{mode:?}");
            let out = m.apply(&Matrix::from_rows(&[[1.0, 1.0]]).unwrap()).unwrap();
            assert!((out[(0, 0)] - 2.0).abs() < 1e-12 && (out[(0, 1)] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_distance_of_identical_samples_is_zero() {
        let a = Matrix::<f64>::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        assert!(energy_distance(&a, &a).unwrap().abs() < 1e-15);
        let b = Matrix::from_rows(&[[10.0], [11.0], [13.0]]).unwrap();
        assert!(energy_distance(&a, &b).unwrap() > 1.0);
    }
}
