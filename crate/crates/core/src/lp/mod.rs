//! Linear programming core: problem construction, a bundled revised simplex,
//! a pluggable solver contract and a lazy row-generation driver.
//!
//! Problems with many more rows than columns (the shape of the DRMOT dual) are
//! solved through their explicit LP dual, so the simplex basis has one row per
//! variable rather than one per constraint. Row generation then becomes column
//! generation on that dual and can be warm-started.

mod lazy;
mod problem;
mod simplex;

use simplex::{Engine, EngineStatus, StandardForm, Tolerances};

pub use lazy::{solve_with_lazy_rows, LazyOptions};
pub(crate) use lazy::row_key;
pub use problem::{LpProblem, LpRow, RowId, RowSense, Sense, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Which formulation the simplex works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Dual route when there are more rows than variables.
    Auto,
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub pivot_tol: f64,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iters: usize,
    pub route: Route,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            pivot_tol: 1e-9,
            feas_tol: 1e-8,
            opt_tol: 1e-9,
            max_iters: 500_000,
            route: Route::Auto,
        }
    }
}

impl SolveOptions {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            pivot: self.pivot_tol,
            feas: self.feas_tol,
            opt: self.opt_tol,
        }
    }
}

/// Solver output. `duals[i]` is the sensitivity of the optimal objective to the
/// right-hand side of row `i`; `reduced_costs[j] = c_j - sum_i a_ij duals[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: Status,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    fn without_values(status: Status, iterations: usize) -> Self {
        LpSolution {
            status,
            objective: f64::NAN,
            primal: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Recomputes feasibility, complementarity and the duality gap against `p`.
    pub fn certify(&self, p: &LpProblem) -> Certification {
        certify(p, self)
    }
}

/// Residuals of an optimal solution, all absolute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certification {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
}

impl Certification {
    /// Feasibility and complementarity within `feas`, gap within `gap_rel * (1 + |obj|)`.
    pub fn passes(&self, feas: f64, gap_rel: f64) -> bool {
        self.primal_residual <= feas
            && self.dual_residual <= feas
            && self.complementarity <= feas
            && self.gap <= gap_rel * (1.0 + self.primal_objective.abs())
    }
}

/// Contract for plugging in an LP backend.
pub trait LpSolver {
    fn solve(&self, p: &LpProblem) -> LpSolution;
}

/// The bundled revised-simplex backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexSolver {
    pub opts: SolveOptions,
}

impl LpSolver for SimplexSolver {
    fn solve(&self, p: &LpProblem) -> LpSolution {
        solve(p, &self.opts)
    }
}

pub fn solve(p: &LpProblem, opts: &SolveOptions) -> LpSolution {
    let sol = solve_unchecked(p, opts);
    audit(p, &sol);
    sol
}

/// Debug builds re-certify every optimal solution before handing it out.
pub(crate) fn audit(p: &LpProblem, sol: &LpSolution) {
    if cfg!(debug_assertions) && sol.is_optimal() {
        let c = sol.certify(p);
        debug_assert!(c.passes(AUDIT_FEAS, AUDIT_GAP), "uncertified LP solution: {c:?}");
    }
}

const AUDIT_FEAS: f64 = 1e-8;
const AUDIT_GAP: f64 = 1e-7;

fn solve_unchecked(p: &LpProblem, opts: &SolveOptions) -> LpSolution {
    let dual = match opts.route {
        Route::Primal => false,
        Route::Dual => true,
        Route::Auto => p.num_rows() > 2 * p.num_vars() + 8,
    };
    if dual {
        let mut de = DualEngine::new(p, &[], opts);
        let status = de.optimize(opts.max_iters);
        match status {
            EngineStatus::Optimal => de.extract(p),
            EngineStatus::Unbounded => LpSolution::without_values(Status::Infeasible, de.iterations()),
            EngineStatus::IterationLimit => {
                LpSolution::without_values(Status::IterationLimit, de.iterations())
            }
            EngineStatus::Infeasible => {
                // dual infeasible: the problem is unbounded or infeasible
                let mut feas = p.clone();
                feas.obj.iter_mut().for_each(|c| *c = 0.0);
                let probe = solve_primal(&feas, opts);
                let st = if probe.status == Status::Infeasible { Status::Infeasible } else { Status::Unbounded };
                LpSolution::without_values(st, de.iterations() + probe.iterations)
            }
        }
    } else {
        solve_primal(p, opts)
    }
}

fn internal_sign(p: &LpProblem) -> f64 {
    match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    }
}

fn solve_primal(p: &LpProblem, opts: &SolveOptions) -> LpSolution {
    let n = p.num_vars();
    let m = p.num_rows();
    let sign = internal_sign(p);
    let mut sf = StandardForm::new(m, p.rows.iter().map(|r| r.rhs).collect());
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, r) in p.rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            cols[j].push((i, a));
        }
    }
    for (j, col) in cols.into_iter().enumerate() {
        sf.push_col(col, sign * p.obj[j], p.lower[j], p.upper[j]);
    }
    for (i, r) in p.rows.iter().enumerate() {
        let (lo, hi) = slack_bounds(r.sense);
        let s = sf.push_col(vec![(i, 1.0)], 0.0, lo, hi);
        sf.slack_of_row[i] = Some(s);
    }
    let mut eng = Engine::new(sf, opts.tolerances());
    let status = eng.optimize(opts.max_iters);
    match status {
        EngineStatus::Optimal => {}
        EngineStatus::Infeasible => return LpSolution::without_values(Status::Infeasible, eng.iterations),
        EngineStatus::Unbounded => return LpSolution::without_values(Status::Unbounded, eng.iterations),
        EngineStatus::IterationLimit => {
            return LpSolution::without_values(Status::IterationLimit, eng.iterations)
        }
    }
    eng.finish();
    let primal: Vec<f64> = (0..n).map(|j| eng.value(j)).collect();
    let duals: Vec<f64> = eng.duals().into_iter().map(|y| sign * y).collect();
    finalize(p, primal, duals, eng.iterations)
}

fn slack_bounds(sense: RowSense) -> (f64, f64) {
    match sense {
        RowSense::Le => (0.0, f64::INFINITY),
        RowSense::Ge => (f64::NEG_INFINITY, 0.0),
        RowSense::Eq => (0.0, 0.0),
    }
}

fn finalize(p: &LpProblem, mut primal: Vec<f64>, duals: Vec<f64>, iterations: usize) -> LpSolution {
    // snap values sitting within rounding of a bound
    for j in 0..primal.len() {
        for b in [p.lower[j], p.upper[j]] {
            if b.is_finite() && (primal[j] - b).abs() <= 1e-12 * (1.0 + b.abs()) {
                primal[j] = b;
            }
        }
    }
    let mut reduced_costs = p.obj.clone();
    for (i, r) in p.rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            reduced_costs[j] -= a * duals[i];
        }
    }
    LpSolution {
        status: Status::Optimal,
        objective: p.objective_value(&primal),
        primal,
        duals,
        reduced_costs,
        iterations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Free,
    NonNeg,
    NonPos,
}

/// The explicit LP dual of a problem, solved by the primal simplex.
///
/// Variables are shifted so each is free, nonnegative or nonpositive; a finite
/// upper bound on a lower-bounded variable becomes an extra row. Every row of
/// the (shifted) problem is a column of the dual, so rows can be appended.
pub(crate) struct DualEngine {
    eng: Engine,
    sign: f64,
    shift: Vec<f64>,
    kind: Vec<VarKind>,
    /// Dual column of each problem row, in insertion order.
    row_cols: Vec<usize>,
    /// Dual columns of internal rows (bound rows and caller-supplied extras).
    extra_cols: Vec<usize>,
    max_iters: usize,
}

impl DualEngine {
    pub fn new(p: &LpProblem, extra_rows: &[LpRow], opts: &SolveOptions) -> Self {
        let n = p.num_vars();
        let sign = internal_sign(p);
        let mut shift = vec![0.0; n];
        let mut kind = vec![VarKind::Free; n];
        let mut bound_rows: Vec<LpRow> = Vec::new();
        for j in 0..n {
            let (l, u) = (p.lower[j], p.upper[j]);
            if l.is_finite() {
                shift[j] = l;
                kind[j] = VarKind::NonNeg;
                if u.is_finite() {
                    bound_rows.push(LpRow { coeffs: vec![(j, 1.0)], sense: RowSense::Le, rhs: u });
                }
            } else if u.is_finite() {
                shift[j] = u;
                kind[j] = VarKind::NonPos;
            }
        }
        let costs: Vec<f64> = p.obj.iter().map(|c| sign * c).collect();
        let mut sf = StandardForm::new(n, costs);
        let mut de = DualEngine {
            eng: Engine::new(StandardForm::new(0, Vec::new()), opts.tolerances()),
            sign,
            shift,
            kind,
            row_cols: Vec::new(),
            extra_cols: Vec::new(),
            max_iters: opts.max_iters,
        };
        for r in &p.rows {
            let (col, cost, lo, hi) = de.dual_column(r);
            de.row_cols.push(sf.push_col(col, cost, lo, hi));
        }
        for r in bound_rows.iter().chain(extra_rows) {
            let (col, cost, lo, hi) = de.dual_column(r);
            de.extra_cols.push(sf.push_col(col, cost, lo, hi));
        }
        for j in 0..n {
            let (lo, hi) = match de.kind[j] {
                VarKind::Free => (0.0, 0.0),
                VarKind::NonNeg => (0.0, f64::INFINITY),
                VarKind::NonPos => (f64::NEG_INFINITY, 0.0),
            };
            let s = sf.push_col(vec![(j, 1.0)], 0.0, lo, hi);
            sf.slack_of_row[j] = Some(s);
        }
        de.eng = Engine::new(sf, opts.tolerances());
        de
    }

    /// Column of the dual for a problem row stated in unshifted variables.
    fn dual_column(&self, r: &LpRow) -> (Vec<(usize, f64)>, f64, f64, f64) {
        let shifted_rhs = r.rhs - r.coeffs.iter().map(|&(j, a)| a * self.shift[j]).sum::<f64>();
        let (lo, hi) = match r.sense {
            RowSense::Le => (f64::NEG_INFINITY, 0.0),
            RowSense::Ge => (0.0, f64::INFINITY),
            RowSense::Eq => (f64::NEG_INFINITY, f64::INFINITY),
        };
        (r.coeffs.clone(), -shifted_rhs, lo, hi)
    }

    pub fn add_row(&mut self, r: &LpRow) {
        let (col, cost, lo, hi) = self.dual_column(r);
        let c = self.eng.add_column(col, cost, lo, hi);
        self.row_cols.push(c);
    }

    pub fn optimize(&mut self, max_iters: usize) -> EngineStatus {
        self.eng.optimize(max_iters.min(self.max_iters))
    }

    pub fn iterations(&self) -> usize {
        self.eng.iterations
    }

    /// Duals of the internal extra rows, in the problem's reporting convention.
    pub fn extra_duals(&self) -> Vec<f64> {
        self.extra_cols.iter().map(|&c| self.sign * self.eng.value(c)).collect()
    }

    pub fn extract(&mut self, p: &LpProblem) -> LpSolution {
        self.eng.finish();
        let z = self.eng.duals();
        let primal: Vec<f64> = (0..p.num_vars()).map(|j| self.shift[j] - z[j]).collect();
        let duals: Vec<f64> = self.row_cols.iter().map(|&c| self.sign * self.eng.value(c)).collect();
        finalize(p, primal, duals, self.eng.iterations)
    }
}

fn certify(p: &LpProblem, s: &LpSolution) -> Certification {
    let sign = internal_sign(p);
    let x = &s.primal;
    let mut primal_residual = 0.0f64;
    let mut dual_residual = 0.0f64;
    let mut complementarity = 0.0f64;
    let mut dual_objective = 0.0;
    for (i, r) in p.rows.iter().enumerate() {
        primal_residual = primal_residual.max(r.violation(x));
        // internal (minimization) multiplier
        let y = sign * s.duals[i];
        let wrong_sign = match r.sense {
            RowSense::Le => y.max(0.0),
            RowSense::Ge => (-y).max(0.0),
            RowSense::Eq => 0.0,
        };
        dual_residual = dual_residual.max(wrong_sign);
        if r.sense != RowSense::Eq {
            let slack = (r.rhs - r.activity(x)).abs();
            complementarity = complementarity.max(y.abs() * slack);
        }
        dual_objective += s.duals[i] * r.rhs;
    }
    for j in 0..p.num_vars() {
        let (l, u) = (p.lower[j], p.upper[j]);
        primal_residual = primal_residual.max((l - x[j]).max(0.0)).max((x[j] - u).max(0.0));
        let d = sign * s.reduced_costs[j];
        // d > 0 needs a finite lower bound to rest on, d < 0 a finite upper bound
        if d > 0.0 {
            if l.is_finite() {
                dual_objective += s.reduced_costs[j] * l;
                complementarity = complementarity.max(d * (x[j] - l).abs());
            } else {
                dual_residual = dual_residual.max(d);
            }
        } else if d < 0.0 {
            if u.is_finite() {
                dual_objective += s.reduced_costs[j] * u;
                complementarity = complementarity.max(-d * (u - x[j]).abs());
            } else {
                dual_residual = dual_residual.max(-d);
            }
        }
    }
    let primal_objective = p.objective_value(x);
    Certification {
        primal_residual,
        dual_residual,
        complementarity,
        primal_objective,
        dual_objective,
        gap: (primal_objective - dual_objective).abs(),
    }
}
