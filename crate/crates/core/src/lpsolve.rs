//! Dense revised simplex for standard-form programs `min c'x, E x = b, x >= 0`.
//!
//! The programs this engine generates have few rows (at most a couple of
//! hundred after presolve) and many sparse columns, so the solver keeps an
//! explicit dense basis inverse, updated per pivot and refactorized from an
//! LU decomposition periodically. Two-phase primal solves establish
//! feasibility; warm restarts against a known dual-feasible basis run the
//! dual simplex, which is what makes bootstrap replications cheap. The
//! optimal basis is exposed so inference can revalue `c_B' B^-1 b~` against
//! new right-hand sides without re-solving.

use serde::Serialize;

/// Sparse column: `(row, value)` pairs with strictly increasing rows.
pub type SparseCol = Vec<(usize, f64)>;

/// Equality-form LP `min c'x  s.t.  E x = b, x >= 0`.
#[derive(Clone, Debug)]
pub struct StandardLp {
    pub n_rows: usize,
    pub cols: Vec<SparseCol>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StandardLp {
    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    fn validate(&self) -> Result<(), String> {
        if self.n_rows == 0 {
            return Err("no rows".into());
        }
        if self.b.len() != self.n_rows || self.c.len() != self.cols.len() {
            return Err("dimension mismatch".into());
        }
        for v in self.b.iter().chain(self.c.iter()) {
            if !v.is_finite() {
                return Err("non-finite entry".into());
            }
        }
        for col in &self.cols {
            for (r, v) in col {
                if *r >= self.n_rows || !v.is_finite() {
                    return Err("bad column entry".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Phase-1 acceptance threshold, scaled by `1 + |b|_inf`.
    pub feas_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub opt_tol: f64,
    /// Basis condition estimate above which the solve is abandoned.
    pub cond_limit: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            cond_limit: 1e13,
            max_iters: 200_000,
        }
    }
}

impl SolverOptions {
    /// Looser feasibility for empirical cell frequencies, which can sit
    /// slightly outside the column cone from sampling noise alone.
    pub fn empirical() -> Self {
        SolverOptions {
            feas_tol: 1e-7,
            ..SolverOptions::default()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Cannot occur for distributions confined to the simplex; reported anyway.
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub degenerate_pivots: usize,
    pub condition_estimate: f64,
    /// Smallest reduced cost over nonbasic columns at the final basis.
    pub min_reduced_cost: f64,
    /// Some basic variable sits at zero: the vertex is degenerate.
    pub degenerate_basis: bool,
    /// Rows found dependent during phase 1 and removed.
    pub dropped_rows: Vec<usize>,
}

#[derive(Debug, thiserror::Error)]
#[error("basis factorization is singular")]
pub struct SingularBasis;

/// LU factors of the basis matrix, kept so inference can apply `B^-1` to
/// fresh right-hand sides.
#[derive(Clone, Debug)]
pub struct BasisFactor {
    kept_rows: Vec<usize>,
    lu: DenseLu,
    c_b: Vec<f64>,
    singular: bool,
}

impl BasisFactor {
    /// `c_B' B^-1 b~` for a full-length right-hand side, without re-solving.
    pub fn revalue(&self, new_b: &[f64]) -> Result<f64, SingularBasis> {
        let xb = self.basic_values(new_b)?;
        Ok(self.c_b.iter().zip(&xb).map(|(c, x)| c * x).sum())
    }

    /// `B^-1 b~`, ordered like the stored basis.
    pub fn basic_values(&self, new_b: &[f64]) -> Result<Vec<f64>, SingularBasis> {
        if self.singular {
            return Err(SingularBasis);
        }
        let reduced: Vec<f64> = self.kept_rows.iter().map(|&r| new_b[r]).collect();
        self.lu.solve(&reduced).ok_or(SingularBasis)
    }

    pub fn kept_rows(&self) -> &[usize] {
        &self.kept_rows
    }
}

/// Optimal vertex plus the machinery to revalue its basis.
#[derive(Clone, Debug)]
pub struct BasicSolution {
    /// Basic column indices, ordered by the row they cover.
    pub basis: Vec<usize>,
    /// Full-length primal vertex.
    pub x: Vec<f64>,
    pub value: f64,
    pub factor: BasisFactor,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub solution: Option<BasicSolution>,
    pub diagnostics: SolveDiagnostics,
}

impl SolveOutcome {
    fn failed(status: SolveStatus, diagnostics: SolveDiagnostics) -> Self {
        SolveOutcome {
            status,
            solution: None,
            diagnostics,
        }
    }
}

const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const DRIVE_OUT_TOL: f64 = 1e-7;

/// Two-phase primal solve.
pub fn solve(lp: &StandardLp, opts: &SolverOptions) -> SolveOutcome {
    if let Err(msg) = lp.validate() {
        debug_assert!(false, "malformed LP: {msg}");
        let mut d = SolveDiagnostics::default();
        d.condition_estimate = f64::NAN;
        return SolveOutcome::failed(SolveStatus::NumericalFailure, d);
    }
    let mut work = Work::new(lp, opts);
    work.solve()
}

/// Re-solve with a new right-hand side starting from a dual-feasible basis,
/// falling back to a cold primal solve when the warm path cannot be used.
pub struct WarmSolver {
    lp: StandardLp,
    opts: SolverOptions,
    base_basis: Option<Vec<usize>>,
}

impl WarmSolver {
    /// Cold-solves the program once; the outcome's basis seeds later restarts.
    pub fn new(lp: StandardLp, opts: SolverOptions) -> (Self, SolveOutcome) {
        let outcome = solve(&lp, &opts);
        let base_basis = outcome.solution.as_ref().and_then(|s| {
            // Warm restarts assume the base solve kept every row.
            if s.factor.kept_rows.len() == lp.n_rows {
                Some(s.basis.clone())
            } else {
                None
            }
        });
        (
            WarmSolver {
                lp,
                opts,
                base_basis,
            },
            outcome,
        )
    }

    pub fn lp(&self) -> &StandardLp {
        &self.lp
    }

    /// Solve with `new_b` in place of the stored right-hand side.
    pub fn solve_rhs(&mut self, new_b: &[f64]) -> SolveOutcome {
        assert_eq!(new_b.len(), self.lp.n_rows);
        if let Some(basis) = self.base_basis.clone() {
            self.lp.b.copy_from_slice(new_b);
            let outcome = dual_simplex(&self.lp, &basis, &self.opts);
            match outcome.status {
                SolveStatus::Optimal => {
                    if let Some(sol) = &outcome.solution {
                        if sol.factor.kept_rows.len() == self.lp.n_rows {
                            self.base_basis = Some(sol.basis.clone());
                        }
                    }
                    return outcome;
                }
                SolveStatus::Infeasible => return outcome,
                _ => {}
            }
        }
        self.lp.b.copy_from_slice(new_b);
        solve(&self.lp, &self.opts)
    }
}

/// Dual simplex from a given (dual-feasible) basis. Returns
/// `NumericalFailure` when the start basis is unusable, letting callers fall
/// back to a cold solve.
pub fn dual_simplex(lp: &StandardLp, basis: &[usize], opts: &SolverOptions) -> SolveOutcome {
    let mut work = Work::new(lp, opts);
    match work.install_basis(basis) {
        Ok(()) => work.dual_solve(),
        Err(_) => SolveOutcome::failed(SolveStatus::NumericalFailure, work.take_diagnostics()),
    }
}

// ---------------------------------------------------------------------------

struct Work<'a> {
    lp: &'a StandardLp,
    opts: &'a SolverOptions,
    /// Original indices of the rows still active.
    kept: Vec<usize>,
    /// Original row index -> active position.
    rmap: Vec<Option<usize>>,
    m: usize,
    n: usize,
    /// Artificial column sign per original row (+1 for b >= 0, -1 otherwise).
    art_sign: Vec<f64>,
    /// Basic column per active row; `>= n` encodes the artificial of original
    /// row `id - n`.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    b_active: Vec<f64>,
    iterations: usize,
    degenerate: usize,
    bland: bool,
    pivots_since_refactor: usize,
    condition_estimate: f64,
    dropped_rows: Vec<usize>,
}

enum StepEnd {
    Converged,
    Unbounded,
    IterLimit,
    Numerical,
}

impl<'a> Work<'a> {
    fn new(lp: &'a StandardLp, opts: &'a SolverOptions) -> Self {
        let m = lp.n_rows;
        let n = lp.n_cols();
        let art_sign: Vec<f64> = lp
            .b
            .iter()
            .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        Work {
            lp,
            opts,
            kept: (0..m).collect(),
            rmap: (0..m).map(Some).collect(),
            m,
            n,
            art_sign,
            basis: (0..m).map(|r| n + r).collect(),
            in_basis: vec![false; n],
            binv: {
                let mut id = vec![0.0; m * m];
                for r in 0..m {
                    id[r * m + r] = if lp.b[r] >= 0.0 { 1.0 } else { -1.0 };
                }
                id
            },
            xb: lp.b.iter().map(|v| v.abs()).collect(),
            b_active: lp.b.clone(),
            iterations: 0,
            degenerate: 0,
            bland: false,
            pivots_since_refactor: 0,
            condition_estimate: 1.0,
            dropped_rows: Vec::new(),
        }
    }

    fn feas_threshold(&self) -> f64 {
        let bmax = self.lp.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.opts.feas_tol * (1.0 + bmax)
    }

    fn take_diagnostics(&mut self) -> SolveDiagnostics {
        SolveDiagnostics {
            iterations: self.iterations,
            degenerate_pivots: self.degenerate,
            condition_estimate: self.condition_estimate,
            min_reduced_cost: 0.0,
            degenerate_basis: false,
            dropped_rows: std::mem::take(&mut self.dropped_rows),
        }
    }

    /// Entries of column `j` in active-row coordinates.
    fn for_col<F: FnMut(usize, f64)>(&self, j: usize, mut f: F) {
        if j < self.n {
            for &(r, v) in &self.lp.cols[j] {
                if let Some(rr) = self.rmap[r] {
                    f(rr, v);
                }
            }
        } else {
            let orig = j - self.n;
            if let Some(rr) = self.rmap[orig] {
                f(rr, self.art_sign[orig]);
            }
        }
    }

    fn col_dot(&self, j: usize, vec: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_col(j, |rr, v| acc += v * vec[rr]);
        acc
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        self.for_col(j, |rr, v| {
            for i in 0..m {
                w[i] += v * self.binv[i * m + rr];
            }
        });
        w
    }

    fn cost_of(&self, j: usize, phase1: bool) -> f64 {
        if phase1 {
            if j >= self.n {
                1.0
            } else {
                0.0
            }
        } else if j < self.n {
            self.lp.c[j]
        } else {
            0.0
        }
    }

    fn dual_prices(&self, phase1: bool) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = self.cost_of(bj, phase1);
            if cb != 0.0 {
                for t in 0..m {
                    y[t] += cb * self.binv[i * m + t];
                }
            }
        }
        y
    }

    fn refactor(&mut self) -> Result<(), StepEnd> {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            self.for_col(j, |rr, v| bmat[rr * m + i] = v);
        }
        let lu = DenseLu::factor(&bmat, m);
        match lu {
            Some(lu) => {
                self.condition_estimate = lu.condition_estimate();
                if self.condition_estimate > self.opts.cond_limit {
                    return Err(StepEnd::Numerical);
                }
                // Rebuild the explicit inverse column by column.
                let mut binv = vec![0.0; m * m];
                let mut e = vec![0.0; m];
                for col in 0..m {
                    e.iter_mut().for_each(|v| *v = 0.0);
                    e[col] = 1.0;
                    let x = lu.solve(&e).ok_or(StepEnd::Numerical)?;
                    for i in 0..m {
                        binv[i * m + col] = x[i];
                    }
                }
                self.binv = binv;
                let mut xb = vec![0.0; m];
                for i in 0..m {
                    let mut acc = 0.0;
                    for t in 0..m {
                        acc += self.binv[i * m + t] * self.b_active[t];
                    }
                    xb[i] = acc;
                }
                self.xb = xb;
                self.pivots_since_refactor = 0;
                Ok(())
            }
            None => Err(StepEnd::Numerical),
        }
    }

    fn pivot(&mut self, r: usize, j: usize, w: &[f64], t: f64) {
        let m = self.m;
        for i in 0..m {
            if i != r {
                self.xb[i] -= t * w[i];
            }
        }
        self.xb[r] = t;
        let old = self.basis[r];
        if old < self.n {
            self.in_basis[old] = false;
        }
        if j < self.n {
            self.in_basis[j] = true;
        }
        self.basis[r] = j;
        let piv = w[r];
        let row_start = r * m;
        for t in 0..m {
            self.binv[row_start + t] /= piv;
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = w[i];
            if f != 0.0 {
                let i_start = i * m;
                for t in 0..m {
                    self.binv[i_start + t] -= f * self.binv[row_start + t];
                }
            }
        }
        self.pivots_since_refactor += 1;
        self.iterations += 1;
    }

    /// Primal iterations until no improving column remains.
    fn run_primal(&mut self, phase1: bool) -> StepEnd {
        loop {
            if self.iterations >= self.opts.max_iters {
                return StepEnd::IterLimit;
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                if let Err(e) = self.refactor() {
                    return e;
                }
            }
            let y = self.dual_prices(phase1);
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let d = self.cost_of(j, phase1) - self.col_dot(j, &y);
                if d < -self.opts.opt_tol {
                    if self.bland {
                        entering = Some((j, d));
                        break;
                    }
                    match entering {
                        Some((_, best)) if d >= best => {}
                        _ => entering = Some((j, d)),
                    }
                }
            }
            let Some((j, _)) = entering else {
                return StepEnd::Converged;
            };
            let w = self.ftran(j);
            let Some((r, t)) = self.ratio_test(&w) else {
                return StepEnd::Unbounded;
            };
            if t <= PIVOT_TOL {
                self.degenerate += 1;
                if self.degenerate > 10 * self.m.max(1) {
                    self.bland = true;
                }
            }
            self.pivot(r, j, &w, t.max(0.0));
        }
    }

    fn ratio_test(&self, w: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            if w[i] > PIVOT_TOL {
                let t = (self.xb[i] / w[i]).max(0.0);
                match best {
                    None => best = Some((i, t)),
                    Some((bi, bt)) => {
                        let tie = (t - bt).abs() <= 1e-12 * (1.0 + bt.abs());
                        if t < bt - 1e-12 * (1.0 + bt.abs()) {
                            best = Some((i, t));
                        } else if tie {
                            let better = if self.bland {
                                self.basis[i] < self.basis[bi]
                            } else {
                                // Prefer kicking artificials, then the larger pivot.
                                let art_i = self.basis[i] >= self.n;
                                let art_b = self.basis[bi] >= self.n;
                                art_i && !art_b || (art_i == art_b && w[i] > w[bi])
                            };
                            if better {
                                best = Some((i, t));
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// Pivot remaining zero-level artificials out of the basis; rows where no
    /// structural column can replace them are dependent and get dropped.
    fn drive_out_artificials(&mut self) -> Result<(), StepEnd> {
        let mut redundant: Vec<usize> = Vec::new();
        for r in 0..self.m {
            if self.basis[r] < self.n {
                continue;
            }
            let m = self.m;
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut found = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let alpha = self.col_dot(j, &rho);
                if alpha.abs() > DRIVE_OUT_TOL {
                    found = Some(j);
                    break;
                }
            }
            match found {
                Some(j) => {
                    let w = self.ftran(j);
                    self.xb[r] = 0.0;
                    self.pivot(r, j, &w, 0.0);
                }
                None => redundant.push(r),
            }
        }
        if redundant.is_empty() {
            return Ok(());
        }
        // Remove dependent rows and rebuild the reduced system.
        let dropped_orig: Vec<usize> = redundant.iter().map(|&r| self.kept[r]).collect();
        self.dropped_rows.extend(dropped_orig.iter().copied());
        let keep_mask: Vec<bool> = (0..self.m).map(|r| !redundant.contains(&r)).collect();
        let new_kept: Vec<usize> = self
            .kept
            .iter()
            .enumerate()
            .filter(|(r, _)| keep_mask[*r])
            .map(|(_, &orig)| orig)
            .collect();
        let new_basis: Vec<usize> = self
            .basis
            .iter()
            .enumerate()
            .filter(|(r, _)| keep_mask[*r])
            .map(|(_, &j)| j)
            .collect();
        self.kept = new_kept;
        self.m = self.kept.len();
        self.rmap = vec![None; self.lp.n_rows];
        for (pos, &orig) in self.kept.iter().enumerate() {
            self.rmap[orig] = Some(pos);
        }
        self.b_active = self.kept.iter().map(|&r| self.lp.b[r]).collect();
        self.basis = new_basis;
        self.binv = vec![0.0; self.m * self.m];
        self.xb = vec![0.0; self.m];
        self.refactor()?;
        Ok(())
    }

    fn solve(&mut self) -> SolveOutcome {
        // Phase 1: minimize the total artificial mass.
        match self.run_primal(true) {
            StepEnd::Converged => {}
            StepEnd::Unbounded | StepEnd::Numerical => {
                return SolveOutcome::failed(SolveStatus::NumericalFailure, self.take_diagnostics())
            }
            StepEnd::IterLimit => {
                return SolveOutcome::failed(SolveStatus::NumericalFailure, self.take_diagnostics())
            }
        }
        let phase1_value: f64 = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(j, _)| **j >= self.n)
            .map(|(_, x)| x.max(0.0))
            .sum();
        if phase1_value > self.feas_threshold() {
            return SolveOutcome::failed(SolveStatus::Infeasible, self.take_diagnostics());
        }
        if self.drive_out_artificials().is_err() {
            return SolveOutcome::failed(SolveStatus::NumericalFailure, self.take_diagnostics());
        }
        self.bland = false;
        self.degenerate = 0;
        match self.run_primal(false) {
            StepEnd::Converged => self.package_optimal(),
            StepEnd::Unbounded => {
                SolveOutcome::failed(SolveStatus::Unbounded, self.take_diagnostics())
            }
            StepEnd::IterLimit | StepEnd::Numerical => {
                SolveOutcome::failed(SolveStatus::NumericalFailure, self.take_diagnostics())
            }
        }
    }

    /// Install a dual-feasible basis of structural columns for a warm start.
    fn install_basis(&mut self, basis: &[usize]) -> Result<(), ()> {
        if basis.len() != self.m {
            return Err(());
        }
        for &j in basis {
            if j >= self.n {
                return Err(());
            }
        }
        self.basis = basis.to_vec();
        self.in_basis = vec![false; self.n];
        for &j in basis {
            self.in_basis[j] = true;
        }
        self.refactor().map_err(|_| ())
    }

    /// Dual simplex: restore primal feasibility while keeping reduced costs
    /// nonnegative.
    fn dual_solve(&mut self) -> SolveOutcome {
        let feas = self.feas_threshold();
        // The installed basis must actually be dual feasible.
        {
            let y = self.dual_prices(false);
            for j in 0..self.n {
                if !self.in_basis[j] && self.lp.c[j] - self.col_dot(j, &y) < -1e-6 {
                    return SolveOutcome::failed(
                        SolveStatus::NumericalFailure,
                        self.take_diagnostics(),
                    );
                }
            }
        }
        loop {
            if self.iterations >= self.opts.max_iters || self.iterations > 5_000 {
                return SolveOutcome::failed(SolveStatus::NumericalFailure, self.take_diagnostics());
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                if self.refactor().is_err() {
                    return SolveOutcome::failed(
                        SolveStatus::NumericalFailure,
                        self.take_diagnostics(),
                    );
                }
            }
            // Leaving: most negative basic value.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if self.xb[i] < -feas {
                    match leave {
                        Some((_, best)) if self.xb[i] >= best => {}
                        _ => leave = Some((i, self.xb[i])),
                    }
                }
            }
            let Some((r, _)) = leave else {
                return self.package_optimal();
            };
            let y = self.dual_prices(false);
            let m = self.m;
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let alpha = self.col_dot(j, &rho);
                if alpha < -PIVOT_TOL {
                    let d = (self.lp.c[j] - self.col_dot(j, &y)).max(0.0);
                    let ratio = d / (-alpha);
                    match entering {
                        None => entering = Some((j, ratio)),
                        Some((bj, br)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && j < bj) {
                                entering = Some((j, ratio));
                            }
                        }
                    }
                }
            }
            let Some((j, _)) = entering else {
                // Row r certifies infeasibility: x_B[r] < 0 with no way out.
                return SolveOutcome::failed(SolveStatus::Infeasible, self.take_diagnostics());
            };
            let w = self.ftran(j);
            let t = self.xb[r] / w[r];
            self.pivot(r, j, &w, t);
        }
    }

    fn package_optimal(&mut self) -> SolveOutcome {
        if self.refactor().is_err() {
            return SolveOutcome::failed(SolveStatus::NumericalFailure, self.take_diagnostics());
        }
        // Any artificial still basic here is at zero on a dependent row that
        // drive-out removed; basis entries must all be structural.
        debug_assert!(self.basis.iter().all(|&j| j < self.n));
        let mut x = vec![0.0; self.n];
        let mut value = 0.0;
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                x[j] = self.xb[i];
                value += self.lp.c[j] * self.xb[i];
            }
        }
        let y = self.dual_prices(false);
        let mut min_reduced = f64::INFINITY;
        for j in 0..self.n {
            if self.in_basis[j] {
                continue;
            }
            let d = self.cost_of(j, false) - self.col_dot(j, &y);
            if d < min_reduced {
                min_reduced = d;
            }
        }
        if !min_reduced.is_finite() {
            min_reduced = 0.0;
        }
        let degenerate_basis = self.xb.iter().any(|v| v.abs() <= 1e-9);
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            self.for_col(j, |rr, v| bmat[rr * m + i] = v);
        }
        let lu = DenseLu::factor(&bmat, m);
        let (lu, singular) = match lu {
            Some(lu) => (lu, false),
            None => (DenseLu::identity(m), true),
        };
        let factor = BasisFactor {
            kept_rows: self.kept.clone(),
            lu,
            c_b: self
                .basis
                .iter()
                .map(|&j| if j < self.n { self.lp.c[j] } else { 0.0 })
                .collect(),
            singular,
        };
        let solution = BasicSolution {
            basis: self.basis.clone(),
            x,
            value,
            factor,
        };
        let diagnostics = SolveDiagnostics {
            iterations: self.iterations,
            degenerate_pivots: self.degenerate,
            condition_estimate: self.condition_estimate,
            min_reduced_cost: min_reduced,
            degenerate_basis,
            dropped_rows: std::mem::take(&mut self.dropped_rows),
        };
        SolveOutcome {
            status: SolveStatus::Optimal,
            solution: Some(solution),
            diagnostics,
        }
    }
}

// ---------------------------------------------------------------------------

/// Dense LU with partial pivoting.
#[derive(Clone, Debug)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl DenseLu {
    /// Factor a row-major `n x n` matrix. `None` when numerically singular.
    pub fn factor(a: &[f64], n: usize) -> Option<DenseLu> {
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let mut piv_row = k;
            let mut piv_val = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val < 1e-13 {
                return None;
            }
            if piv_row != k {
                for t in 0..n {
                    lu.swap(k * n + t, piv_row * n + t);
                }
                perm.swap(k, piv_row);
            }
            min_pivot = min_pivot.min(piv_val);
            max_pivot = max_pivot.max(piv_val);
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for t in (k + 1)..n {
                        lu[i * n + t] -= f * lu[k * n + t];
                    }
                }
            }
        }
        Some(DenseLu {
            n,
            lu,
            perm,
            min_pivot,
            max_pivot,
        })
    }

    fn identity(n: usize) -> DenseLu {
        let mut lu = vec![0.0; n * n];
        for i in 0..n {
            lu[i * n + i] = 1.0;
        }
        DenseLu {
            n,
            lu,
            perm: (0..n).collect(),
            min_pivot: 1.0,
            max_pivot: 1.0,
        }
    }

    /// Ratio of extreme pivot magnitudes: a cheap condition proxy.
    pub fn condition_estimate(&self) -> f64 {
        if self.min_pivot > 0.0 {
            self.max_pivot / self.min_pivot
        } else {
            f64::INFINITY
        }
    }

    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return None;
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= self.lu[i * n + k] * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in (i + 1)..n {
                acc -= self.lu[i * n + k] * x[k];
            }
            let d = self.lu[i * n + i];
            if d == 0.0 {
                return None;
            }
            x[i] = acc / d;
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn dense_col(entries: &[f64]) -> SparseCol {
        entries
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(r, v)| (r, *v))
            .collect()
    }

    #[test]
    fn single_constraint_simplex() {
        // min -x1  s.t. x1 + x2 = 1, x >= 0  ->  x = (1, 0), value -1.
        let lp = StandardLp {
            n_rows: 1,
            cols: vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            b: vec![1.0],
            c: vec![-1.0, 0.0],
        };
        let out = solve(&lp, &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        let sol = out.solution.unwrap();
        assert!((sol.value + 1.0).abs() < 1e-12);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!(sol.x[1].abs() < 1e-12);
        assert!(out.diagnostics.min_reduced_cost >= -1e-9);
    }

    #[test]
    fn negative_rhs_is_infeasible() {
        let lp = StandardLp {
            n_rows: 1,
            cols: vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            b: vec![-1.0],
            c: vec![0.0, 0.0],
        };
        let out = solve(&lp, &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded_direction() {
        // min -x1  s.t. x1 - x2 = 0: the ray x1 = x2 = t drives the value down.
        let lp = StandardLp {
            n_rows: 1,
            cols: vec![vec![(0, 1.0)], vec![(0, -1.0)]],
            b: vec![0.0],
            c: vec![-1.0, 0.0],
        };
        let out = solve(&lp, &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Unbounded);
    }

    /// Exhaustive vertex enumeration, the independent oracle for small LPs.
    pub(crate) fn vertex_enumeration_min(lp: &StandardLp) -> Option<f64> {
        let m = lp.n_rows;
        let n = lp.n_cols();
        let mut best: Option<f64> = None;
        let mut subset: Vec<usize> = (0..m).collect();
        fn visit(
            lp: &StandardLp,
            subset: &mut Vec<usize>,
            start: usize,
            depth: usize,
            best: &mut Option<f64>,
        ) {
            let m = lp.n_rows;
            if depth == m {
                let mut bmat = vec![0.0; m * m];
                for (i, &j) in subset.iter().enumerate() {
                    for &(r, v) in &lp.cols[j] {
                        bmat[r * m + i] = v;
                    }
                }
                if let Some(lu) = DenseLu::factor(&bmat, m) {
                    if let Some(x) = lu.solve(&lp.b) {
                        if x.iter().all(|&v| v >= -1e-9) {
                            let val: f64 =
                                subset.iter().zip(&x).map(|(&j, &v)| lp.c[j] * v).sum();
                            *best = Some(best.map_or(val, |b: f64| b.min(val)));
                        }
                    }
                }
                return;
            }
            for j in start..lp.n_cols() {
                subset[depth] = j;
                visit(lp, subset, j + 1, depth + 1, best);
            }
        }
        if n < m {
            return None;
        }
        visit(lp, &mut subset, 0, 0, &mut best);
        best
    }

    #[test]
    fn random_instances_match_vertex_enumeration() {
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..60 {
            let m = 4;
            let n = 8;
            let mut cols: Vec<SparseCol> = Vec::new();
            for _ in 0..n {
                let entries: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
                cols.push(dense_col(&entries));
            }
            // Feasible and bounded by construction: b = A x0 with x0 >= 0 and
            // a unit-sum row appended.
            let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = x0.iter().sum();
            let mut b = vec![0.0; m];
            for (j, col) in cols.iter().enumerate() {
                for &(r, v) in col {
                    b[r] += v * x0[j];
                }
            }
            for col in cols.iter_mut() {
                col.push((m, 1.0));
            }
            b.push(total);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lp = StandardLp {
                n_rows: m + 1,
                cols,
                b,
                c,
            };
            let out = solve(&lp, &SolverOptions::default());
            assert_eq!(out.status, SolveStatus::Optimal, "trial {trial}");
            let oracle = vertex_enumeration_min(&lp).expect("oracle found no vertex");
            let got = out.solution.as_ref().unwrap().value;
            assert!(
                (got - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()),
                "trial {trial}: simplex {got} vs enumeration {oracle}"
            );
            assert!(out.diagnostics.min_reduced_cost >= -1e-9);
        }
    }

    #[test]
    fn revalue_returns_original_value_on_original_rhs() {
        let lp = StandardLp {
            n_rows: 2,
            cols: vec![
                vec![(0, 1.0), (1, 1.0)],
                vec![(1, 1.0)],
                vec![(0, 1.0)],
            ],
            b: vec![1.0, 2.0],
            c: vec![1.0, 1.0, 3.0],
        };
        let out = solve(&lp, &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        let sol = out.solution.unwrap();
        let revalued = sol.factor.revalue(&lp.b).unwrap();
        assert!((revalued - sol.value).abs() < 1e-12);
    }

    #[test]
    fn revalue_two_by_two_hand_inverted() {
        // Basis matrix [[1,0],[1,1]], costs (1,1), rhs (1,2): x = (1,1), value 2.
        let lp = StandardLp {
            n_rows: 2,
            cols: vec![vec![(0, 1.0), (1, 1.0)], vec![(1, 1.0)]],
            b: vec![1.0, 2.0],
            c: vec![1.0, 1.0],
        };
        let out = solve(&lp, &SolverOptions::default());
        let sol = out.solution.unwrap();
        assert_eq!(sol.basis.len(), 2);
        let v = sol.factor.revalue(&[1.0, 2.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn revalue_tracks_resolve_while_basis_stays_optimal() {
        let mut rng = StdRng::seed_from_u64(11);
        let m = 3;
        let n = 6;
        let mut cols: Vec<SparseCol> = Vec::new();
        for _ in 0..n {
            let entries: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..2.0)).collect();
            cols.push(dense_col(&entries));
        }
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        let mut b = vec![0.0; m];
        for (j, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                b[r] += v * x0[j];
            }
        }
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let lp = StandardLp {
            n_rows: m,
            cols,
            b: b.clone(),
            c,
        };
        let out = solve(&lp, &SolverOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        let sol = out.solution.unwrap();
        for _ in 0..20 {
            // Small perturbations that keep the same basis optimal.
            let new_b: Vec<f64> = b.iter().map(|v| v * rng.gen_range(0.99..1.01)).collect();
            let basics = sol.factor.basic_values(&new_b).unwrap();
            if basics.iter().all(|&v| v >= 0.0) {
                let quick = sol.factor.revalue(&new_b).unwrap();
                let mut lp2 = lp.clone();
                lp2.b = new_b;
                let full = solve(&lp2, &SolverOptions::default());
                let full_val = full.solution.unwrap().value;
                assert!(
                    (quick - full_val).abs() < 1e-9,
                    "revalue {quick} vs re-solve {full_val}"
                );
            }
        }
    }

    #[test]
    fn deterministic_bases() {
        let lp = StandardLp {
            n_rows: 2,
            cols: vec![
                vec![(0, 1.0), (1, 0.3)],
                vec![(0, 0.5), (1, 1.0)],
                vec![(0, 1.0)],
                vec![(1, 1.0)],
            ],
            b: vec![1.0, 1.0],
            c: vec![-1.0, -1.0, 0.0, 0.0],
        };
        let a = solve(&lp, &SolverOptions::default());
        let b2 = solve(&lp, &SolverOptions::default());
        assert_eq!(
            a.solution.unwrap().basis,
            b2.solution.unwrap().basis
        );
    }

    #[test]
    fn warm_solver_matches_cold_solves() {
        let mut rng = StdRng::seed_from_u64(23);
        let m = 5;
        let n = 14;
        let mut cols: Vec<SparseCol> = Vec::new();
        for _ in 0..n {
            let entries: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.5)).collect();
            cols.push(dense_col(&entries));
        }
        // Feasible by construction: b = [A; 1'] x0 with x0 >= 0, so the
        // unit-sum row carries the actual mass of x0.
        let make_b = |rng: &mut StdRng, cols: &[SparseCol]| {
            let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let mut b = vec![0.0; m + 1];
            for (j, col) in cols.iter().enumerate() {
                for &(r, v) in col {
                    b[r] += v * x0[j];
                }
            }
            b[m] = x0.iter().sum();
            b
        };
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut cols_b = cols.clone();
        for col in cols_b.iter_mut() {
            col.push((m, 1.0));
        }
        let b0 = make_b(&mut rng, &cols);
        let lp = StandardLp {
            n_rows: m + 1,
            cols: cols_b,
            b: b0,
            c: c.clone(),
        };
        let (mut warm, first) = WarmSolver::new(lp.clone(), SolverOptions::default());
        assert_eq!(first.status, SolveStatus::Optimal);
        for trial in 0..25 {
            let mut nb = make_b(&mut rng, &cols);
            if trial % 5 == 4 {
                // Break the sum row on purpose to exercise the infeasible path.
                nb[m] *= 0.25;
            }
            let warm_out = warm.solve_rhs(&nb);
            let mut lp2 = lp.clone();
            lp2.b = nb;
            let cold = solve(&lp2, &SolverOptions::default());
            assert_eq!(warm_out.status, cold.status, "trial {trial}");
            if warm_out.status == SolveStatus::Optimal {
                let wv = warm_out.solution.unwrap().value;
                let cv = cold.solution.unwrap().value;
                assert!((wv - cv).abs() < 1e-8, "trial {trial}: warm {wv} cold {cv}");
            }
        }
    }

    #[test]
    fn warm_solver_reports_infeasible_rhs() {
        let lp = StandardLp {
            n_rows: 2,
            cols: vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0)]],
            b: vec![1.0, 0.5],
            c: vec![1.0, 0.0],
        };
        let (mut warm, first) = WarmSolver::new(lp, SolverOptions::default());
        assert_eq!(first.status, SolveStatus::Optimal);
        // x2's row now demands more of x1 than row 0 permits: infeasible.
        let out = warm.solve_rhs(&[0.5, 1.0]);
        assert_eq!(out.status, SolveStatus::Infeasible);
    }
}
