use piagg::dataset::rng_from_seed;
use piagg::linalg::Matrix;
use piagg::numerics::sym_eig;
use piagg::transport::{energy_distance, fit_affine_transport, AffineMap, TransportMode};
use rand::Rng;
use rand_distr::StandardNormal;

const MODES: [TransportMode; 3] = [TransportMode::GaussianOt, TransportMode::Coral, TransportMode::LocationScale];

/// Correlated Gaussian sample `L·z + mu`.
fn sample(n: usize, l: &[[f64; 3]; 3], mu: [f64; 3], seed: u64) -> Matrix<f64> {
    let mut rng = rng_from_seed(seed);
    let mut m = Matrix::zeros(n, 3);
    for i in 0..n {
        let z: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        for j in 0..3 {
            m[(i, j)] = mu[j] + (0..3).map(|k| l[j][k] * z[k]).sum::<f64>();
        }
    }
    m
}

const L_SOURCE: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.5, 1.2, 0.0], [-0.3, 0.4, 0.8]];
const L_TARGET: [[f64; 3]; 3] = [[2.0, 0.0, 0.0], [-0.4, 0.7, 0.0], [0.6, 0.1, 1.5]];

fn column_means(m: &Matrix<f64>) -> Vec<f64> {
    m.column_means()
}

#[test]
fn identical_samples_give_the_identity() {
    let s = sample(500, &L_SOURCE, [1.0, -2.0, 0.5], 1);
    for mode in MODES {
        let m = fit_affine_transport(&s, &s, mode, 0.0).unwrap();
        assert!(m.a.max_abs_diff(&Matrix::identity(3)) < 1e-6, "{mode:?}");
        assert!(m.b.iter().all(|v| v.abs() < 1e-6));
    }
}

#[test]
fn pure_translation() {
    let s = sample(400, &L_SOURCE, [0.0; 3], 2);
    let c = [3.0, -1.0, 0.25];
    let mut t = s.clone();
    for i in 0..t.nrows() {
        for j in 0..3 {
            t[(i, j)] += c[j];
        }
    }
    for mode in MODES {
        let m = fit_affine_transport(&t, &s, mode, 0.0).unwrap();
        assert!(m.a.max_abs_diff(&Matrix::identity(3)) < 1e-6);
        let back = m.apply(&t).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-6);
    }
}

#[test]
fn mapped_target_matches_source_moments() {
    let s = sample(3000, &L_SOURCE, [1.0, 2.0, 3.0], 3);
    let t = sample(2000, &L_TARGET, [-1.0, 0.0, 4.0], 4);
    let cov_s = s.covariance();
    let scale = cov_s.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    for mode in MODES {
        let m = fit_affine_transport(&t, &s, mode, 0.0).unwrap();
        let z = m.apply(&t).unwrap();
        for (a, b) in column_means(&z).iter().zip(column_means(&s)) {
            assert!((a - b).abs() < 1e-10, "{mode:?}");
        }
        if mode != TransportMode::LocationScale {
            assert!(z.covariance().max_abs_diff(&cov_s) < 1e-6 * scale, "{mode:?}");
        } else {
            let cz = z.covariance();
            for j in 0..3 {
                assert!((cz[(j, j)] - cov_s[(j, j)]).abs() < 1e-9);
            }
        }
        let before = energy_distance(&t, &s).unwrap();
        let after = energy_distance(&z, &s).unwrap();
        assert!(after < before);
    }
}

#[test]
fn gaussian_ot_matrix_is_symmetric_psd() {
    let s = sample(1000, &L_SOURCE, [0.0; 3], 5);
    let t = sample(1000, &L_TARGET, [0.0; 3], 6);
    let m = fit_affine_transport(&t, &s, TransportMode::GaussianOt, 0.0).unwrap();
    assert!(m.a.max_abs_diff(&m.a.transpose()) < 1e-8);
    let eig = sym_eig(&m.a, 1e-12).unwrap();
    assert!(eig.eigenvalues.iter().all(|&v| v >= -1e-8));
}

#[test]
fn diagonal_covariances_by_hand() {
    // Target covariance diag(1, 4), source diag(4, 1), both centered.
    let t = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, -2.0], vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap();
    let s = Matrix::from_rows(&[vec![2.0, 1.0], vec![-2.0, -1.0], vec![2.0, -1.0], vec![-2.0, 1.0]]).unwrap();
    for mode in MODES {
        let m = fit_affine_transport(&t, &s, mode, 0.0).unwrap();
        let expect = Matrix::from_diag(&[2.0, 0.5]);
        assert!(m.a.max_abs_diff(&expect) < 1e-12, "{mode:?}");
        let out: Matrix<f64> = m.apply(&Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap()).unwrap();
        assert!((out[(0, 0)] - 2.0).abs() < 1e-12 && (out[(0, 1)] - 0.5).abs() < 1e-12);
    }
}

#[test]
fn translation_map_sends_zero_to_offset() {
    let m = AffineMap {
        a: Matrix::identity(2),
        b: vec![0.5, -3.0],
        mode: TransportMode::LocationScale,
    };
    let out = m.apply(&Matrix::zeros(1, 2)).unwrap();
    assert_eq!(out.as_slice(), &[0.5, -3.0]);
}
