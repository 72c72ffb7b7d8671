use piagg::candidates::{
    build_bank, default_specs, eval_bank, fit_mean, residuals, CandidateSpec, FittedCandidate, MeanMethod,
};
use piagg::dataset::{gen_hetero_sim, rng_from_seed, DataTable};
use piagg::linalg::Matrix;
use proptest::prelude::*;
use rand::Rng;

fn table(x: &[Vec<f64>], y: &[f64]) -> DataTable {
    DataTable::from_parts(Matrix::from_rows(x).unwrap(), Some(y.to_vec())).unwrap()
}

fn random_table(n: usize, d: usize, seed: u64) -> DataTable {
    let mut rng = rng_from_seed(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let y: Vec<f64> = x.iter().map(|r| r[0] * 2.0 + rng.gen_range(-1.0..1.0) * (1.0 + r[0].abs())).collect();
    table(&x, &y)
}

#[test]
fn mean_models_on_easy_data() {
    let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, (i % 3) as f64]).collect();
    let y: Vec<f64> = x.iter().map(|r| 1.0 - 2.0 * r[0] + 0.5 * r[1]).collect();
    let t = table(&x, &y);
    let m = fit_mean(&t, MeanMethod::Ols).unwrap();
    let r = residuals(&t, &m).unwrap();
    assert!(r.r2.iter().all(|&v| v < 1e-20));

    let t = table(&x, &[4.0; 20]);
    let m = fit_mean(&t, MeanMethod::Ols).unwrap();
    for p in m.predict(&Matrix::from_rows(&[vec![10.0, -3.0]]).unwrap()).unwrap() {
        assert!((p - 4.0).abs() < 1e-10);
    }

    let t = random_table(50, 2, 1);
    let m = fit_mean(&t, MeanMethod::Knn { k: 1 }).unwrap();
    assert_eq!(m.predict(t.x()).unwrap(), t.y().unwrap());
}

#[test]
fn residuals_match_a_direct_loop() {
    let t = random_table(40, 3, 2);
    let m = fit_mean(&t, MeanMethod::Ols).unwrap();
    let r = residuals(&t, &m).unwrap();
    let pred = m.predict(t.x()).unwrap();
    for i in 0..40 {
        let e = t.y().unwrap()[i] - pred[i];
        assert_eq!(r.r2[i], e * e);
    }
    let t3 = table(&[vec![0.0], vec![1.0]], &[3.0, 3.0]);
    let zero = fit_mean(&table(&[vec![0.0], vec![1.0], vec![2.0]], &[0.0; 3]), MeanMethod::Ols).unwrap();
    assert_eq!(residuals(&t3, &zero).unwrap().r2, vec![9.0, 9.0]);
}

#[test]
fn constant_bank_is_all_ones() {
    let t = random_table(30, 2, 3);
    let r = residuals(&t, &fit_mean(&t, MeanMethod::Ols).unwrap()).unwrap();
    let target = random_table(7, 2, 4);
    let bank = build_bank(&t, &r, target.x(), &[CandidateSpec::ConstantOne]).unwrap();
    assert!(bank.phi_source.as_slice().iter().all(|&v| v == 1.0));
    assert!(bank.phi_target.as_slice().iter().all(|&v| v == 1.0));
    assert_eq!(bank.phi_target.nrows(), 7);
}

#[test]
fn kernel_smoother_recovers_the_second_moment_at_zero() {
    let t = gen_hetero_sim(20_000, 6);
    let r2: Vec<f64> = t.y().unwrap().iter().map(|v| v * v).collect();
    let f = FittedCandidate::fit(&CandidateSpec::KernelVariance { bandwidth: 0.1 }, t.x(), &r2, 0).unwrap();
    let v = f.eval(&Matrix::column_vector(&[0.0]))[0];
    assert!((0.25..=0.42).contains(&v), "{v}");
}

#[test]
fn default_bank_is_nonnegative_on_hetero_data() {
    let t = gen_hetero_sim(1000, 7);
    let r = residuals(&t, &fit_mean(&t, MeanMethod::Ols).unwrap()).unwrap();
    let target = gen_hetero_sim(300, 8);
    let bank = build_bank(&t, &r, target.x(), &default_specs()).unwrap();
    assert!(bank.phi_source.as_slice().iter().all(|&v| v >= 0.0 && v.is_finite()));
    assert!(bank.phi_target.as_slice().iter().all(|&v| v >= 0.0 && v.is_finite()));
    assert_eq!(bank.eval(target.x()), bank.phi_target);
}

#[test]
fn specs_round_trip_through_json() {
    let specs = default_specs();
    let s = serde_json::to_string(&specs).unwrap();
    let back: Vec<CandidateSpec> = serde_json::from_str(&s).unwrap();
    assert_eq!(back, specs);
    let bad: Result<CandidateSpec, _> = serde_json::from_str(r#"{"kind":"knn_quantile","k":0,"tau":0.5}"#);
    assert!(bad.unwrap().validate().is_err());
}

fn permuted(t: &DataTable, r2: &[f64], seed: u64) -> (Matrix<f64>, Vec<f64>) {
    let n = t.n_rows();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    for i in (1..n).rev() {
        idx.swap(i, rng.gen_range(0..=i));
    }
    let p = t.select_rows(&idx);
    (p.x().clone(), idx.iter().map(|&i| r2[i]).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn knn_quantile_is_monotone_in_level(seed in 0u64..1000, k in 1usize..15, t1 in 0.05f64..0.95, t2 in 0.05f64..0.95) {
        let t = random_table(40, 2, seed);
        let r2: Vec<f64> = t.y().unwrap().iter().map(|v| v * v).collect();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let probe = random_table(15, 2, seed + 1);
        let a = FittedCandidate::fit(&CandidateSpec::KnnQuantile { k, tau: lo }, t.x(), &r2, 0).unwrap().eval(probe.x());
        let b = FittedCandidate::fit(&CandidateSpec::KnnQuantile { k, tau: hi }, t.x(), &r2, 0).unwrap().eval(probe.x());
        for (u, v) in a.iter().zip(&b) {
            prop_assert!(u <= v);
        }
    }

    #[test]
    fn bank_ignores_training_row_order(seed in 0u64..1000) {
        let t = random_table(60, 2, seed);
        let r2: Vec<f64> = t.y().unwrap().iter().map(|v| v * v).collect();
        let specs = [
            CandidateSpec::ConstantOne,
            CandidateSpec::KnnQuantile { k: 7, tau: 0.8 },
            CandidateSpec::KernelVariance { bandwidth: 0.3 },
            CandidateSpec::BinnedQuantile { bins: 4, tau: 0.9 },
        ];
        let (px, pr2) = permuted(&t, &r2, seed ^ 0xABCD);
        let probe = random_table(20, 2, seed + 7);
        let fit = |x: &Matrix<f64>, r: &[f64]| -> Vec<FittedCandidate> {
            specs.iter().map(|s| FittedCandidate::fit(s, x, r, 0).unwrap()).collect()
        };
        let a = eval_bank(&fit(t.x(), &r2), probe.x());
        let b = eval_bank(&fit(&px, &pr2), probe.x());
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }
}
