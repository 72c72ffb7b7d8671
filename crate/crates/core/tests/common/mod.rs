//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use piagg::dataset::rng_from_seed;
use piagg::linalg::Matrix;
use piagg::linprog::LinearProgram;
use rand::Rng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    rng_from_seed(seed)
}

/// `(1/denom) Σ w_i 1{r²_i > λ f_i}`.
pub fn strict_violation(r2: &[f64], f: &[f64], w: &[f64], lam: f64, denom: f64) -> f64 {
    r2.iter()
        .zip(f)
        .zip(w)
        .filter(|((&r, &fi), _)| r > lam * fi)
        .map(|(_, &wi)| wi)
        .sum::<f64>()
        / denom
}

/// `(1/n) #{r²_i ≥ λ g_i}`.
pub fn nonstrict_violation(r2: &[f64], g: &[f64], lam: f64) -> f64 {
    r2.iter().zip(g).filter(|(&r, &gi)| r >= lam * gi).count() as f64 / r2.len() as f64
}

/// Row thresholds `r²_i/s_i`: a row is violated exactly when `λ` lies below
/// its threshold (strict rule) or at or below it (non-strict rule). A zero
/// scale is never covered unless the residual is zero and the rule strict.
fn thresholds(r2: &[f64], scale: &[f64], strict: bool) -> Vec<f64> {
    r2.iter()
        .zip(scale)
        .map(|(&r, &s)| match (r == 0.0, s == 0.0) {
            (true, true) if strict => 0.0,
            (_, true) => f64::INFINITY,
            _ => r / s,
        })
        .collect()
}

/// Smallest `λ` in `{0} ∪ {thresholds}` whose strict weighted violation
/// `(1/n) Σ w_i 1{t_i > λ}` is within budget; evaluated on exact thresholds
/// so rounding in `λ·f` cannot reject a candidate.
pub fn strict_shrink_oracle(f: &[f64], r2: &[f64], w: &[f64], alpha: f64, floor: f64) -> Option<f64> {
    let n = r2.len() as f64;
    let ff: Vec<f64> = f.iter().map(|v| v.max(floor)).collect();
    let t = thresholds(r2, &ff, true);
    let mut cands: Vec<f64> = t.iter().copied().filter(|v| v.is_finite()).collect();
    cands.push(0.0);
    cands
        .into_iter()
        .filter(|&l| t.iter().zip(w).filter(|(&ti, _)| ti > l).map(|(_, &wi)| wi).sum::<f64>() / n <= alpha)
        .min_by(f64::total_cmp)
}

/// Infimum `t` of `{λ > 0 : #{r² ≥ λ g}/n ≤ α}` (approached from above), or
/// `+∞` when no positive `λ` qualifies.
pub fn nonstrict_shrink_oracle(g: &[f64], r2: &[f64], alpha: f64) -> f64 {
    let t = thresholds(r2, g, false);
    let mut cands: Vec<f64> = t.iter().copied().filter(|v| v.is_finite()).collect();
    cands.push(0.0);
    cands.sort_by(f64::total_cmp);
    // Just above c the violated rows are exactly those with threshold > c.
    for c in cands {
        if t.iter().filter(|&&ti| ti > c).count() as f64 / r2.len() as f64 <= alpha {
            return c;
        }
    }
    f64::INFINITY
}

/// First grid point `k·h` at which `viol` is within budget.
pub fn grid_first(h: f64, upper: f64, budget: f64, viol: impl Fn(f64) -> f64) -> Option<f64> {
    let steps = (upper / h).ceil() as usize + 1;
    (0..=steps).map(|k| k as f64 * h).find(|&l| viol(l) <= budget)
}

/// Exact optimum of `min c·α` over `{α ≥ 0, Pα ≥ r}` in two variables, by
/// enumerating every pairwise intersection of constraint boundaries.
pub fn two_var_vertex_optimum(p: &[[f64; 2]], r: &[f64], c: [f64; 2]) -> Option<f64> {
    let mut lines: Vec<([f64; 2], f64)> = p.iter().zip(r).map(|(row, &ri)| (*row, ri)).collect();
    lines.push(([1.0, 0.0], 0.0));
    lines.push(([0.0, 1.0], 0.0));
    let feasible = |a: [f64; 2]| {
        a[0] >= -1e-12
            && a[1] >= -1e-12
            && p.iter().zip(r).all(|(row, &ri)| row[0] * a[0] + row[1] * a[1] >= ri - 1e-10 * ri.abs().max(1.0))
    };
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let ([a, b], e) = lines[i];
            let ([c2, d], f) = lines[j];
            let det = a * d - b * c2;
            if det.abs() < 1e-14 {
                continue;
            }
            let x = [(e * d - b * f) / det, (a * f - e * c2) / det];
            if feasible(x) {
                let v = c[0] * x[0] + c[1] * x[1];
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    best
}

/// Best feasible objective on the grid `{0, h, 2h, …, hi}²`.
pub fn two_var_grid_optimum(p: &[[f64; 2]], r: &[f64], c: [f64; 2], hi: f64, h: f64) -> Option<f64> {
    let steps = (hi / h).round() as usize;
    let mut best: Option<f64> = None;
    for i in 0..=steps {
        let a0 = i as f64 * h;
        for j in 0..=steps {
            let a1 = j as f64 * h;
            if p.iter().zip(r).all(|(row, &ri)| row[0] * a0 + row[1] * a1 >= ri) {
                let v = c[0] * a0 + c[1] * a1;
                best = Some(best.map_or(v, |b: f64| b.min(v)));
                // Larger a1 only raises a nonnegative objective.
                break;
            }
        }
    }
    best
}

pub fn matrix(rows: &[[f64; 2]]) -> Matrix<f64> {
    Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

/// Random positive 2-column bank row.
pub fn bank_row(rng: &mut Xoshiro256PlusPlus) -> [f64; 2] {
    [rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)]
}

/// Gaussian elimination kept separate from the crate's solvers.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for i in 0..n {
            if i != c {
                let f = a[i][c] / a[c][c];
                for j in c..n {
                    a[i][j] -= f * a[c][j];
                }
                b[i] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Minimum of the objective over all basic feasible points.
pub fn vertex_optimum(p: &LinearProgram<f64>) -> Option<f64> {
    let n = p.n_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = p
        .ineq_lhs
        .rows_iter()
        .zip(&p.ineq_rhs)
        .map(|(r, &b)| (r.to_vec(), b))
        .collect();
    for j in 0..n {
        if p.nonneg_mask[j] {
            let mut r = vec![0.0; n];
            r[j] = -1.0;
            rows.push((r, 0.0));
        }
    }
    let mut best: Option<f64> = None;
    for subset in combinations(rows.len(), n) {
        let a = subset.iter().map(|&i| rows[i].0.clone()).collect();
        let b = subset.iter().map(|&i| rows[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let feasible = rows
            .iter()
            .all(|(r, b)| r.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() <= b + 1e-9);
        if feasible {
            let obj: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}

/// Random LP whose feasible set is a nonempty polytope.
pub fn random_bounded_lp(rng: &mut Xoshiro256PlusPlus, n: usize, m_extra: usize, free: bool) -> LinearProgram<f64> {
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut mask = vec![true; n];
    for j in 0..n {
        let mut r = vec![0.0; n];
        r[j] = 1.0;
        rows.push(r);
        rhs.push(rng.gen_range(2.5..5.0));
        if free && j % 2 == 1 {
            mask[j] = false;
            let mut r = vec![0.0; n];
            r[j] = -1.0;
            rows.push(r);
            rhs.push(rng.gen_range(1.0..4.0));
        }
    }
    for _ in 0..m_extra {
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let lhs: f64 = r.iter().zip(&x0).map(|(a, b)| a * b).sum();
        rhs.push(lhs + rng.gen_range(0.0..1.5));
        rows.push(r);
    }
    let c = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    LinearProgram::new(c, Matrix::from_rows(&rows).unwrap(), rhs, mask).unwrap()
}
