//! Dense two-phase simplex for problems of the form
//!
//! ```text
//! minimize   cᵀx
//! subject to A·x ≤ b,   x_j ≥ 0 for masked j, x_j free otherwise.
//! ```
//!
//! Internally every problem is brought to a bounded standard form
//! (`0 ≤ x ≤ u`, rows `≤` or `=`) and solved with a tableau simplex that uses
//! Bland's lowest-index rule for both the entering and leaving choice. Rows
//! holding a single positive coefficient on a nonnegative variable are turned
//! into upper bounds instead of tableau rows.
//!
//! When the dual has fewer tableau rows than the primal (tall problems such as
//! covering LPs or check-loss regression), the dual is solved and the primal
//! point is read off the optimal simplex multipliers. The recovered point is
//! checked for feasibility and objective agreement; on any mismatch, or when
//! the dual is not optimal, the primal route runs instead, so the reported
//! status always comes from the primal problem itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub ineq_lhs: Matrix<T>,
    pub ineq_rhs: Vec<T>,
    pub nonneg_mask: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective_value: T,
    /// Simplex iterations spent, bound flips included.
    pub pivots: usize,
    /// Tableau that produced the answer (`Primal` or `Dual`).
    pub route: Route,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("pivot limit of {limit} reached")]
    PivotLimitExceeded { limit: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("feasibility tolerance must be positive")]
    InvalidTolerance,
}

/// Which problem the tableau is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    /// Dual when it yields fewer tableau rows, primal otherwise.
    #[default]
    Auto,
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    pub feas_tol: T,
    /// Defaults to `50 · (m + n_var)`.
    pub max_pivots: Option<usize>,
    pub route: Route,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            feas_tol: T::default_feas_tol(),
            max_pivots: None,
            route: Route::Auto,
        }
    }
}

impl<T: Real> LinearProgram<T> {
    pub fn new(
        objective: Vec<T>,
        ineq_lhs: Matrix<T>,
        ineq_rhs: Vec<T>,
        nonneg_mask: Vec<bool>,
    ) -> Result<Self, LpError> {
        let lp = Self {
            objective,
            ineq_lhs,
            ineq_rhs,
            nonneg_mask,
        };
        lp.validate()?;
        Ok(lp)
    }

    /// All variables nonnegative.
    pub fn nonneg(objective: Vec<T>, ineq_lhs: Matrix<T>, ineq_rhs: Vec<T>) -> Result<Self, LpError> {
        let n = objective.len();
        Self::new(objective, ineq_lhs, ineq_rhs, vec![true; n])
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.ineq_rhs.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        let m = self.ineq_rhs.len();
        if self.nonneg_mask.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "nonneg_mask has length {}, expected {n}",
                self.nonneg_mask.len()
            )));
        }
        if self.ineq_lhs.nrows() != m || (m > 0 && self.ineq_lhs.ncols() != n) {
            return Err(LpError::DimensionMismatch(format!(
                "ineq_lhs is {}x{}, expected {m}x{n}",
                self.ineq_lhs.nrows(),
                self.ineq_lhs.ncols()
            )));
        }
        if !self.objective.iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        if !self.ineq_lhs.all_finite() {
            return Err(LpError::NonFinite("ineq_lhs"));
        }
        if !self.ineq_rhs.iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("ineq_rhs"));
        }
        Ok(())
    }

    /// Largest constraint violation of `x`, counting both the rows and the
    /// sign restrictions.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (i, row) in self.ineq_lhs.rows_iter().enumerate() {
            let lhs = crate::linalg::dot(row, x);
            worst = worst.max(lhs - self.ineq_rhs[i]);
        }
        for (j, &nn) in self.nonneg_mask.iter().enumerate() {
            if nn {
                worst = worst.max(-x[j]);
            }
        }
        worst
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        crate::linalg::dot(&self.objective, x)
    }
}

/// Solves `p` with the given tolerance and pivot budget.
pub fn solve_lp<T: Real>(
    p: &LinearProgram<T>,
    feas_tol: T,
    max_pivots: usize,
) -> Result<LpSolution<T>, LpError> {
    solve_lp_with(
        p,
        &SolverOptions {
            feas_tol,
            max_pivots: Some(max_pivots),
            route: Route::Auto,
        },
    )
}

pub fn solve_lp_with<T: Real>(
    p: &LinearProgram<T>,
    opts: &SolverOptions<T>,
) -> Result<LpSolution<T>, LpError> {
    p.validate()?;
    if !(opts.feas_tol > T::zero()) {
        return Err(LpError::InvalidTolerance);
    }
    let limit = opts
        .max_pivots
        .unwrap_or(50 * (p.n_constraints() + p.n_vars()).max(1));

    let primal = build_primal(p, opts.feas_tol);
    let dual = build_dual(p, opts.feas_tol);

    let use_dual = match opts.route {
        Route::Primal => false,
        Route::Dual => dual.is_some(),
        Route::Auto => match (&primal, &dual) {
            (Some(pr), Some(du)) => du.std.rows.len() < pr.std.rows.len(),
            (None, _) => false,
            (Some(_), None) => false,
        },
    };

    let mut spent = 0;
    if use_dual {
        let du = dual.as_ref().unwrap();
        match solve_dual_route(p, du, opts.feas_tol, limit) {
            Ok((Some(sol), used)) => return Ok(sol.with_pivots(used)),
            Ok((None, used)) => spent = used,
            Err(LpError::PivotLimitExceeded { .. }) => spent = 0,
            Err(e) => return Err(e),
        }
    }

    let Some(pr) = primal else {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![T::zero(); p.n_vars()],
            objective_value: T::zero(),
            pivots: spent,
            route: Route::Primal,
        });
    };
    let out = bounded_simplex(&pr.std, opts.feas_tol, limit)?;
    let pivots = spent + out.pivots;
    if out.status != LpStatus::Optimal {
        return Ok(LpSolution {
            status: out.status,
            x: vec![T::zero(); p.n_vars()],
            objective_value: T::zero(),
            pivots,
            route: Route::Primal,
        });
    }
    let mut x = pr.recover(&out.x);
    clamp_signs(p, &mut x);
    let objective_value = p.objective_at(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
        pivots,
        route: Route::Primal,
    })
}

impl<T: Real> LpSolution<T> {
    fn with_pivots(mut self, pivots: usize) -> Self {
        self.pivots = pivots;
        self
    }
}

fn clamp_signs<T: Real>(p: &LinearProgram<T>, x: &mut [T]) {
    for (v, &nn) in x.iter_mut().zip(&p.nonneg_mask) {
        if nn && *v < T::zero() {
            *v = T::zero();
        }
    }
}

// ---------------------------------------------------------------------------
// Bounded standard form.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
struct StdRow<T> {
    coef: Vec<T>,
    rhs: T,
    kind: RowKind,
}

/// `min cᵀx` s.t. rows, `0 ≤ x ≤ upper`.
#[derive(Debug, Clone)]
struct StdForm<T> {
    cost: Vec<T>,
    rows: Vec<StdRow<T>>,
    upper: Vec<T>,
}

#[derive(Debug, Clone)]
struct StdOutcome<T> {
    status: LpStatus,
    x: Vec<T>,
    /// Simplex multipliers per row, in the orientation the row was given.
    row_duals: Vec<T>,
    /// Phase-2 reduced costs of the structural columns.
    reduced: Vec<T>,
    at_upper: Vec<bool>,
    basic: Vec<bool>,
    objective: T,
    pivots: usize,
}

/// Converts a `≤` row with one positive coefficient into an upper bound.
/// Returns `Some(true)` when absorbed, `Some(false)` when kept, `None` when
/// the bound is infeasible.
fn absorb_singleton<T: Real>(row: &StdRow<T>, upper: &mut [T], tol: T) -> Option<(bool, usize, T)> {
    if row.kind != RowKind::Le {
        return Some((false, 0, T::zero()));
    }
    let mut nz = row.coef.iter().enumerate().filter(|(_, v)| **v != T::zero());
    let Some((j, &g)) = nz.next() else {
        return if row.rhs < -tol { None } else { Some((true, usize::MAX, T::zero())) };
    };
    if nz.next().is_some() || g < T::zero() {
        return Some((false, 0, T::zero()));
    }
    let bound = row.rhs / g;
    if bound < -tol {
        return None;
    }
    let bound = bound.max(T::zero());
    if bound < upper[j] {
        upper[j] = bound;
    }
    Some((true, j, g))
}

struct PrimalForm<T> {
    std: StdForm<T>,
    /// For each original variable: (positive column, optional negative column).
    cols: Vec<(usize, Option<usize>)>,
}

impl<T: Real> PrimalForm<T> {
    fn recover(&self, xs: &[T]) -> Vec<T> {
        self.cols
            .iter()
            .map(|&(pos, neg)| xs[pos] - neg.map_or(T::zero(), |k| xs[k]))
            .collect()
    }
}

fn build_primal<T: Real>(p: &LinearProgram<T>, tol: T) -> Option<PrimalForm<T>> {
    let mut cols = Vec::with_capacity(p.n_vars());
    let mut ncols = 0;
    for &nn in &p.nonneg_mask {
        if nn {
            cols.push((ncols, None));
            ncols += 1;
        } else {
            cols.push((ncols, Some(ncols + 1)));
            ncols += 2;
        }
    }
    let mut cost = vec![T::zero(); ncols];
    for (j, &(pos, neg)) in cols.iter().enumerate() {
        cost[pos] = p.objective[j];
        if let Some(k) = neg {
            cost[k] = -p.objective[j];
        }
    }
    let mut upper = vec![T::infinity(); ncols];
    let mut rows = Vec::with_capacity(p.n_constraints());
    for (i, src) in p.ineq_lhs.rows_iter().enumerate() {
        let mut coef = vec![T::zero(); ncols];
        for (j, &(pos, neg)) in cols.iter().enumerate() {
            coef[pos] = src[j];
            if let Some(k) = neg {
                coef[k] = -src[j];
            }
        }
        let row = StdRow {
            coef,
            rhs: p.ineq_rhs[i],
            kind: RowKind::Le,
        };
        match absorb_singleton(&row, &mut upper, tol)? {
            (true, _, _) => {}
            (false, _, _) => rows.push(row),
        }
    }
    Some(PrimalForm {
        std: StdForm { cost, rows, upper },
        cols,
    })
}

struct DualForm<T> {
    std: StdForm<T>,
    /// Primal variable `j` is the multiplier of tableau row `row_of[j]`, or of
    /// the bound `bound_of[j] = (z index, coefficient)`, or is zero.
    row_of: Vec<Option<usize>>,
    bound_of: Vec<Option<(usize, T)>>,
}

/// Dual of `min cᵀx, Ax ≤ b, x_N ≥ 0`:
/// `min bᵀz, −A_Nᵀz ≤ c_N, −A_Fᵀz = c_F, z ≥ 0`, whose optimum is `−opt(P)`.
fn build_dual<T: Real>(p: &LinearProgram<T>, tol: T) -> Option<DualForm<T>> {
    let m = p.n_constraints();
    let n = p.n_vars();
    let mut upper = vec![T::infinity(); m];
    let mut rows = Vec::new();
    let mut row_of = vec![None; n];
    let mut bound_of = vec![None; n];
    for j in 0..n {
        let coef: Vec<T> = (0..m).map(|i| -p.ineq_lhs[(i, j)]).collect();
        let kind = if p.nonneg_mask[j] { RowKind::Le } else { RowKind::Eq };
        let row = StdRow {
            coef,
            rhs: p.objective[j],
            kind,
        };
        if kind == RowKind::Eq && row.coef.iter().all(|v| *v == T::zero()) {
            if row.rhs.abs() > tol {
                return None;
            }
            continue;
        }
        match absorb_singleton(&row, &mut upper, tol)? {
            (true, usize::MAX, _) => {}
            (true, i, g) => bound_of[j] = Some((i, g)),
            (false, _, _) => {
                row_of[j] = Some(rows.len());
                rows.push(row);
            }
        }
    }
    Some(DualForm {
        std: StdForm {
            cost: p.ineq_rhs.clone(),
            rows,
            upper,
        },
        row_of,
        bound_of,
    })
}

fn solve_dual_route<T: Real>(
    p: &LinearProgram<T>,
    du: &DualForm<T>,
    tol: T,
    limit: usize,
) -> Result<(Option<LpSolution<T>>, usize), LpError> {
    let out = bounded_simplex(&du.std, tol, limit)?;
    if out.status != LpStatus::Optimal {
        return Ok((None, out.pivots));
    }
    let n = p.n_vars();
    let mut x = vec![T::zero(); n];
    let mut claimed = vec![false; du.std.upper.len()];
    for j in 0..n {
        if let Some(r) = du.row_of[j] {
            x[j] = -out.row_duals[r];
        } else if let Some((i, g)) = du.bound_of[j] {
            let bound = (p.objective[j] / g).max(T::zero());
            if out.at_upper[i] && !out.basic[i] && !claimed[i] && bound == du.std.upper[i] {
                claimed[i] = true;
                x[j] = -out.reduced[i] / g;
            }
        }
    }
    clamp_signs(p, &mut x);
    let objective_value = p.objective_at(&x);
    let scale = T::one()
        .max(p.ineq_rhs.iter().fold(T::zero(), |a, v| a.max(v.abs())))
        .max(x.iter().fold(T::zero(), |a, v| a.max(v.abs())));
    let gap_ok = (objective_value + out.objective).abs()
        <= tol.sqrt() * T::one().max(objective_value.abs());
    if p.max_violation(&x) <= tol * scale && gap_ok {
        Ok((
            Some(LpSolution {
                status: LpStatus::Optimal,
                x,
                objective_value,
                pivots: 0,
                route: Route::Dual,
            }),
            out.pivots,
        ))
    } else {
        Ok((None, out.pivots))
    }
}

// ---------------------------------------------------------------------------
// Tableau simplex on the bounded standard form.

struct Tableau<T> {
    m: usize,
    ncols: usize,
    t: Vec<T>,
    xb: Vec<T>,
    basis: Vec<usize>,
    upper: Vec<T>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    blocked: Vec<bool>,
    d: Vec<T>,
    pivots: usize,
    limit: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl<T: Real> Tableau<T> {
    fn col(&self, i: usize, j: usize) -> T {
        self.t[i * self.ncols + j]
    }

    fn price(&mut self, cost: &[T]) {
        self.d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
            for (dj, &a) in self.d.iter_mut().zip(row) {
                *dj = *dj - cb * a;
            }
        }
    }

    fn nonbasic_value(&self, j: usize) -> T {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            T::zero()
        }
    }

    fn objective(&self, cost: &[T]) -> T {
        let mut z = T::zero();
        for i in 0..self.m {
            z = z + cost[self.basis[i]] * self.xb[i];
        }
        for j in 0..self.ncols {
            if !self.is_basic[j] && self.at_upper[j] {
                z = z + cost[j] * self.upper[j];
            }
        }
        z
    }

    fn step(&mut self, opt_tol: T) -> Result<Step, LpError> {
        // Bland: lowest-index improving column.
        let mut entering = None;
        for j in 0..self.ncols {
            if self.is_basic[j] || self.blocked[j] {
                continue;
            }
            let dj = self.d[j];
            if (!self.at_upper[j] && dj < -opt_tol) || (self.at_upper[j] && dj > opt_tol) {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else {
            return Ok(Step::Optimal);
        };
        if self.pivots >= self.limit {
            return Err(LpError::PivotLimitExceeded { limit: self.limit });
        }
        self.pivots += 1;

        let sigma = if self.at_upper[j] { -T::one() } else { T::one() };
        let piv_tol = T::pivot_tol();
        // (limit, leaving row or None for a bound flip, leaving goes to upper)
        let mut best: Option<(T, Option<usize>, bool)> = None;
        let mut best_var = usize::MAX;
        if self.upper[j].is_finite() {
            best = Some((self.upper[j], None, false));
            best_var = j;
        }
        for i in 0..self.m {
            let rate = -sigma * self.col(i, j);
            let b = self.basis[i];
            let (lim, to_upper) = if rate < -piv_tol {
                (self.xb[i].max(T::zero()) / -rate, false)
            } else if rate > piv_tol && self.upper[b].is_finite() {
                ((self.upper[b] - self.xb[i]).max(T::zero()) / rate, true)
            } else {
                continue;
            };
            match best {
                None => {
                    best = Some((lim, Some(i), to_upper));
                    best_var = b;
                }
                Some((cur, _, _)) => {
                    let tie = T::epsilon() * T::lit(8.0) * (T::one() + cur.abs());
                    if lim < cur - tie || ((lim - cur).abs() <= tie && b < best_var) {
                        best = Some((lim, Some(i), to_upper));
                        best_var = b;
                    }
                }
            }
        }
        let Some((theta, leave, to_upper)) = best else {
            return Ok(Step::Unbounded);
        };

        for i in 0..self.m {
            let rate = -sigma * self.col(i, j);
            self.xb[i] = self.xb[i] + rate * theta;
        }
        match leave {
            None => {
                self.at_upper[j] = !self.at_upper[j];
            }
            Some(r) => {
                let entering_value = self.nonbasic_value(j) + sigma * theta;
                let leaving = self.basis[r];
                self.pivot(r, j);
                self.is_basic[leaving] = false;
                self.at_upper[leaving] = to_upper;
                self.xb[r] = entering_value;
            }
        }
        Ok(Step::Moved)
    }

    /// Gauss-Jordan pivot on `(r, j)`; updates basis bookkeeping and reduced
    /// costs but not the basic values.
    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let p = self.t[r * nc + j];
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            row.iter_mut().for_each(|v| *v = *v / p);
            row[j] = T::one();
        }
        let pivot_row: Vec<T> = self.t[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + j];
            if f == T::zero() {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for (a, &b) in row.iter_mut().zip(&pivot_row) {
                *a = *a - f * b;
            }
            row[j] = T::zero();
        }
        let f = self.d[j];
        if f != T::zero() {
            for (a, &b) in self.d.iter_mut().zip(&pivot_row) {
                *a = *a - f * b;
            }
            self.d[j] = T::zero();
        }
        self.basis[r] = j;
        self.is_basic[j] = true;
        self.at_upper[j] = false;
    }

    fn run(&mut self, cost: &[T], opt_tol: T) -> Result<bool, LpError> {
        self.price(cost);
        loop {
            match self.step(opt_tol)? {
                Step::Optimal => return Ok(true),
                Step::Unbounded => return Ok(false),
                Step::Moved => {}
            }
        }
    }
}

fn bounded_simplex<T: Real>(std: &StdForm<T>, tol: T, limit: usize) -> Result<StdOutcome<T>, LpError> {
    let n = std.cost.len();
    let m = std.rows.len();

    // Column layout: structural | slacks (one per ≤ row) | artificials.
    let mut signs = Vec::with_capacity(m);
    let mut slack_of = vec![None; m];
    let mut ncols = n;
    for (i, row) in std.rows.iter().enumerate() {
        signs.push(if row.rhs < T::zero() { -T::one() } else { T::one() });
        if row.kind == RowKind::Le {
            slack_of[i] = Some(ncols);
            ncols += 1;
        }
    }
    let mut unit_of = vec![0; m];
    let mut artificial = vec![false; ncols];
    for i in 0..m {
        match slack_of[i] {
            Some(s) if signs[i] > T::zero() => unit_of[i] = s,
            _ => {
                unit_of[i] = ncols;
                ncols += 1;
                artificial.push(true);
            }
        }
    }

    let mut t = vec![T::zero(); m * ncols];
    let mut xb = vec![T::zero(); m];
    for (i, row) in std.rows.iter().enumerate() {
        let s = signs[i];
        let dst = &mut t[i * ncols..(i + 1) * ncols];
        for (d, &a) in dst.iter_mut().zip(&row.coef) {
            *d = s * a;
        }
        if let Some(sl) = slack_of[i] {
            dst[sl] = s;
        }
        dst[unit_of[i]] = T::one();
        xb[i] = s * row.rhs;
    }
    let mut upper = std.upper.clone();
    upper.resize(ncols, T::infinity());
    let mut is_basic = vec![false; ncols];
    for &u in &unit_of {
        is_basic[u] = true;
    }

    let mut tab = Tableau {
        m,
        ncols,
        t,
        xb,
        basis: unit_of.clone(),
        upper,
        at_upper: vec![false; ncols],
        is_basic,
        blocked: vec![false; ncols],
        d: vec![T::zero(); ncols],
        pivots: 0,
        limit,
    };

    let cmax = std.cost.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let rhs_scale = std.rows.iter().fold(T::one(), |a, r| a.max(r.rhs.abs()));

    let infeasible = |pivots| StdOutcome {
        status: LpStatus::Infeasible,
        x: vec![T::zero(); n],
        row_duals: vec![T::zero(); m],
        reduced: vec![T::zero(); n],
        at_upper: vec![false; n],
        basic: vec![false; n],
        objective: T::zero(),
        pivots,
    };

    if artificial.iter().any(|&a| a) {
        let phase1: Vec<T> = artificial
            .iter()
            .map(|&a| if a { T::one() } else { T::zero() })
            .collect();
        tab.run(&phase1, tol)?;
        if tab.objective(&phase1) > tol * rhs_scale {
            return Ok(infeasible(tab.pivots));
        }
        // Drive basic artificials out of the basis.
        for r in 0..m {
            if !artificial[tab.basis[r]] {
                continue;
            }
            let mut pick: Option<(usize, T)> = None;
            for j in 0..ncols {
                if artificial[j] || tab.is_basic[j] {
                    continue;
                }
                let v = tab.col(r, j).abs();
                if v > T::pivot_tol() && pick.is_none_or(|(_, b)| v > b) {
                    pick = Some((j, v));
                }
            }
            if let Some((j, _)) = pick {
                let leaving = tab.basis[r];
                let value = tab.nonbasic_value(j);
                tab.pivot(r, j);
                tab.is_basic[leaving] = false;
                tab.at_upper[leaving] = false;
                tab.xb[r] = value;
            } else {
                tab.xb[r] = T::zero();
            }
        }
        for (j, &a) in artificial.iter().enumerate() {
            if a {
                tab.blocked[j] = true;
                if !tab.is_basic[j] {
                    tab.upper[j] = T::zero();
                }
            }
        }
    }

    let mut cost = std.cost.clone();
    cost.resize(ncols, T::zero());
    let opt_tol = tol * T::one().max(cmax);
    let bounded = tab.run(&cost, opt_tol)?;
    if !bounded {
        return Ok(StdOutcome {
            status: LpStatus::Unbounded,
            ..infeasible(tab.pivots)
        });
    }

    let mut x = vec![T::zero(); n];
    for j in 0..n {
        if !tab.is_basic[j] {
            x[j] = tab.nonbasic_value(j);
        }
    }
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.xb[i].max(T::zero()).min(tab.upper[tab.basis[i]]);
        }
    }
    let row_duals = (0..m).map(|i| signs[i] * -tab.d[unit_of[i]]).collect();
    let objective = tab.objective(&cost);
    Ok(StdOutcome {
        status: LpStatus::Optimal,
        x,
        row_duals,
        reduced: tab.d[..n].to_vec(),
        at_upper: tab.at_upper[..n].to_vec(),
        basic: tab.is_basic[..n].to_vec(),
        objective,
        pivots: tab.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], a: &[&[f64]], b: &[f64]) -> LinearProgram<f64> {
        LinearProgram::nonneg(c.to_vec(), Matrix::from_rows(a).unwrap(), b.to_vec()).unwrap()
    }

    fn all_routes(p: &LinearProgram<f64>) -> Vec<LpSolution<f64>> {
        [Route::Primal, Route::Dual, Route::Auto]
            .iter()
            .map(|&route| {
                solve_lp_with(
                    p,
                    &SolverOptions {
                        route,
                        ..Default::default()
                    },
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn single_binding_constraint() {
        let p = lp(&[1.0], &[&[-1.0]], &[-3.0]);
        for s in all_routes(&p) {
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.x[0] - 3.0).abs() < 1e-12);
            assert!((s.objective_value - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_feasible_set() {
        let p = lp(&[0.0], &[&[1.0]], &[-1.0]);
        for s in all_routes(&p) {
            assert_eq!(s.status, LpStatus::Infeasible);
        }
    }

    #[test]
    fn unbounded_ray() {
        let p = lp(&[-1.0, 0.0], &[&[1.0, -1.0]], &[1.0]);
        for s in all_routes(&p) {
            assert_eq!(s.status, LpStatus::Unbounded);
        }
    }

    #[test]
    fn free_variables() {
        // min x s.t. x ≥ -2 (free x)
        let p = LinearProgram::new(
            vec![1.0],
            Matrix::from_rows(&[[-1.0]]).unwrap(),
            vec![2.0],
            vec![false],
        )
        .unwrap();
        for s in all_routes(&p) {
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.x[0] + 2.0).abs() < 1e-12, "{:?}", s);
        }
    }

    #[test]
    fn classic_two_variable() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let p = lp(
            &[-3.0, -5.0],
            &[&[1.0, 0.0], &[0.0, 2.0], &[3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        );
        for s in all_routes(&p) {
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.objective_value + 36.0).abs() < 1e-9);
            assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let bad = LinearProgram {
            objective: vec![1.0, 2.0],
            ineq_lhs: Matrix::from_rows(&[[1.0]]).unwrap(),
            ineq_rhs: vec![1.0],
            nonneg_mask: vec![true, true],
        };
        assert!(matches!(
            solve_lp(&bad, 1e-9, 100),
            Err(LpError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn pivot_limit() {
        let p = lp(
            &[-3.0, -5.0],
            &[&[1.0, 0.0], &[0.0, 2.0], &[3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        );
        let err = solve_lp_with(
            &p,
            &SolverOptions {
                max_pivots: Some(0),
                route: Route::Primal,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(err, LpError::PivotLimitExceeded { limit: 0 });
    }

    #[test]
    fn single_precision() {
        let p = LinearProgram::<f32>::nonneg(
            vec![-3.0, -5.0],
            Matrix::from_rows(&[[1.0f32, 0.0], [0.0, 2.0], [3.0, 2.0]]).unwrap(),
            vec![4.0, 12.0, 18.0],
        )
        .unwrap();
        let s = solve_lp_with(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 36.0).abs() < 1e-3);
    }
}
