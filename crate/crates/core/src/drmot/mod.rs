//! ε-DRMOT bounds from the discretized dual LP.
//!
//! The dual has one row per (grid tuple, atom tuple) pair. Small instances are
//! materialized in full; larger ones start from a seed set of rows and add the
//! most violated rows found by a separable oracle until none remain.
//!
//! `β` is indexed by the distinct atoms of each marginal and weighted by their
//! probabilities, which is equivalent to one `β` per sample with weight `1/n`.

mod dual;
mod feasibility;
mod mot;
mod schedule;

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{verify_delta_martingale, Grid};
use crate::joint::JointMeasure;
use crate::lp::{self, row_key, LazyOptions, LpProblem, LpRow, Route, SolveOptions, Status};
use crate::measures::{marginal_set_distance, wasserstein1, MarginalSequence};
use crate::payoffs::Payoff;

use dual::{base_problem, decode, encode, payoff_row, separate, DualPoint, Prepared};

pub use dual::{DualLayout, ViolatedRow};
pub use feasibility::minimum_radius;
pub use mot::solve_mot_exact;
pub use schedule::{
    preprocess_mean_zero, schedule_params, schedule_params_noncompact, NoncompactSchedule, Schedule,
};

/// Default number of rows above which the LP is solved by row generation.
pub const EAGER_ROW_LIMIT: u128 = 10_000;
/// Size guard of [`solve_bruteforce`].
pub const BRUTEFORCE_ROW_LIMIT: u128 = 100_000;
/// Rows whose extracted mass is below this are dropped.
pub const MASS_TOL: f64 = 1e-12;
const MATERIALIZE_HARD_LIMIT: u128 = 5_000_000;
const RADIUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DrmotProblem {
    pub marginals: MarginalSequence,
    pub grid: Grid,
    pub epsilon: f64,
    pub delta: f64,
    pub payoff: Payoff,
    /// Restricts coordinate one to mean zero (adds the free `η` dual variable).
    pub mean_zero_mode: bool,
}

impl DrmotProblem {
    pub fn new(marginals: MarginalSequence, grid: Grid, epsilon: f64, delta: f64, payoff: Payoff) -> Result<Self> {
        let d = marginals.dims();
        if grid.dims() != d {
            return Err(Error::Dimension { expected: d, got: grid.dims() });
        }
        if payoff.dims() != d {
            return Err(Error::Dimension { expected: d, got: payoff.dims() });
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius ε = {epsilon} must be finite and nonnegative")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("martingale slack δ = {delta} must be finite and nonnegative")));
        }
        Ok(DrmotProblem { marginals, grid, epsilon, delta, payoff, mean_zero_mode: false })
    }

    pub fn with_mean_zero(mut self, on: bool) -> Self {
        self.mean_zero_mode = on;
        self
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut p = Self::new(self.marginals.clone(), self.grid.clone(), epsilon, self.delta, self.payoff.clone())?;
        p.mean_zero_mode = self.mean_zero_mode;
        Ok(p)
    }

    pub fn dims(&self) -> usize {
        self.marginals.dims()
    }

    /// Rows of the fully materialized dual LP, `Π_i n_i · (N + 1)^d`.
    pub fn num_rows(&self) -> u128 {
        let atoms: u128 = self.marginals.measures().iter().map(|m| m.len() as u128).product();
        atoms * (self.grid.nodes_per_dim() as u128).pow(self.dims() as u32)
    }
}

/// Dual variables `(γ, η, α, |α|, β)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub gamma: f64,
    pub eta: Option<f64>,
    /// `alpha[level][prefix]` for prefixes `k_1..k_{level+1}`, indexed
    /// lexicographically in base `N + 1`.
    pub alpha: Vec<Vec<f64>>,
    pub alpha_abs: Vec<Vec<f64>>,
    /// `beta[i][j]` for the `j`-th distinct atom of marginal `i`.
    pub beta: Vec<Vec<f64>>,
    /// Probabilities of those atoms.
    pub beta_weights: Vec<Vec<f64>>,
    pub nodes_per_dim: usize,
}

impl DualCertificate {
    fn from_lp(layout: &DualLayout, prob: &DrmotProblem, x: &[f64]) -> Self {
        let pt = DualPoint::from_lp(layout, x);
        let base = layout.nodes_per_dim();
        let mut alpha = Vec::new();
        let mut alpha_abs = Vec::new();
        let mut start = 0;
        for level in 1..layout.dims() {
            let len = base.pow(level as u32);
            alpha.push(pt.alpha[start..start + len].to_vec());
            alpha_abs.push(pt.alpha_abs[start..start + len].to_vec());
            start += len;
        }
        DualCertificate {
            gamma: pt.gamma,
            eta: layout.eta.map(|_| pt.eta),
            alpha,
            alpha_abs,
            beta: pt.beta,
            beta_weights: prob.marginals.measures().iter().map(|m| m.weights().to_vec()).collect(),
            nodes_per_dim: base,
        }
    }

    pub fn alpha_at(&self, prefix: &[usize]) -> f64 {
        self.alpha[prefix.len() - 1][encode(prefix, self.nodes_per_dim)]
    }

    pub fn alpha_abs_at(&self, prefix: &[usize]) -> f64 {
        self.alpha_abs[prefix.len() - 1][encode(prefix, self.nodes_per_dim)]
    }

    /// Every `(prefix, α, |α|)` in lexicographic order by level.
    pub fn alpha_entries(&self) -> Vec<(Vec<usize>, f64, f64)> {
        let mut out = Vec::new();
        for (level, (a, b)) in self.alpha.iter().zip(&self.alpha_abs).enumerate() {
            let mut k = vec![0; level + 1];
            for (lin, (&x, &y)) in a.iter().zip(b).enumerate() {
                decode(lin, self.nodes_per_dim, &mut k);
                out.push((k.clone(), x, y));
            }
        }
        out
    }

    /// `γε + Σ_{i,j} w_ij β_ij`.
    pub fn objective(&self, epsilon: f64) -> f64 {
        self.gamma * epsilon
            + self
                .beta
                .iter()
                .zip(&self.beta_weights)
                .map(|(b, w)| b.iter().zip(w).map(|(x, y)| x * y).sum::<f64>())
                .sum::<f64>()
    }

    /// Shifts `β_i` to weighted mean zero for `i < d` and moves the constants onto
    /// `β_d`. Every row and the objective are unchanged.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        let d = c.beta.len();
        let mut moved = 0.0;
        for i in 0..d.saturating_sub(1) {
            let lambda: f64 = c.beta[i].iter().zip(&c.beta_weights[i]).map(|(b, w)| b * w).sum();
            c.beta[i].iter_mut().for_each(|b| *b -= lambda);
            moved += lambda;
        }
        c.beta[d - 1].iter_mut().for_each(|b| *b += moved);
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowMode {
    Auto,
    Eager,
    Lazy,
}

#[derive(Debug, Clone, Copy)]
pub struct DrmotOptions {
    pub mode: RowMode,
    /// `Auto` materializes every row when there are at most this many.
    pub eager_row_limit: u128,
    /// Rows added per separation round.
    pub rows_per_round: usize,
    /// `lazy.box_bound` is multiplied by `1 + max|f|` over the grid.
    pub lazy: LazyOptions,
}

impl Default for DrmotOptions {
    fn default() -> Self {
        DrmotOptions {
            mode: RowMode::Auto,
            eager_row_limit: EAGER_ROW_LIMIT,
            rows_per_round: 256,
            lazy: LazyOptions { violation_tol: 1e-10, box_bound: 100.0, ..LazyOptions::default() },
        }
    }
}

/// Residuals of a solved instance. All are zero for an exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verification {
    /// Primal-dual objective gap of the LP solution.
    pub duality_gap: f64,
    /// How far the extracted measure's worst conditional drift exceeds δ.
    pub delta_violation: f64,
    /// How far its distance to the marginals exceeds ε.
    pub distance_slack: f64,
    /// `|E f - value|` under the extracted measure.
    pub payoff_gap: f64,
    /// Largest violated dual row over every grid and atom tuple.
    pub superhedge_violation: f64,
    /// `|E X_1|` in mean-zero mode, else zero.
    pub mean_violation: f64,
}

impl Verification {
    pub fn passes(&self, value: f64) -> bool {
        self.duality_gap <= 1e-7 * (1.0 + value.abs())
            && self.delta_violation <= 1e-7
            && self.distance_slack <= 1e-6
            && self.payoff_gap <= 1e-6 * (1.0 + value.abs())
            && self.superhedge_violation <= 1e-7
            && self.mean_violation <= 1e-7
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveStats {
    pub mode: RowMode,
    pub total_rows: u128,
    pub materialized_rows: usize,
    pub lp_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct DrmotResult {
    pub value: f64,
    /// Normalized so `β_i` has mean zero under `μ_i` for `i < d`.
    pub certificate: DualCertificate,
    /// Worst-case measure on grid nodes.
    pub primal: JointMeasure,
    /// `W1(π_i, μ_i)` per coordinate.
    pub coupling_report: Vec<f64>,
    /// Transport cost of the coupling found by the LP, an upper bound on the
    /// sum of `coupling_report`.
    pub transport_cost: f64,
    pub verification: Verification,
    pub stats: SolveStats,
}

/// The dual LP with as many payoff rows as fit under a materialization limit.
#[derive(Debug, Clone)]
pub struct AssembledLp {
    pub problem: LpProblem,
    pub layout: DualLayout,
    /// `(k, j)` of each payoff row, in row order after the `|α|` rows.
    pub row_index: Vec<(Vec<usize>, Vec<usize>)>,
    /// Whether every payoff row is present.
    pub complete: bool,
}

/// Builds the dual LP, materializing all `Π n_i · (N+1)^d` payoff rows when that
/// count is at most `materialize_limit`.
pub fn assemble_dual_lp(prob: &DrmotProblem, materialize_limit: u128) -> Result<AssembledLp> {
    let prep = Prepared::new(prob)?;
    let (mut problem, layout) = base_problem(prob)?;
    let complete = prep.num_rows() <= materialize_limit.min(MATERIALIZE_HARD_LIMIT);
    let mut row_index = Vec::new();
    if complete {
        for_each_row(&prep, |k, j| {
            problem.rows.push(payoff_row(&prep, &layout, k, j));
            row_index.push((k.to_vec(), j.to_vec()));
        });
    }
    Ok(AssembledLp { problem, layout, row_index, complete })
}

fn for_each_row(prep: &Prepared, mut f: impl FnMut(&[usize], &[usize])) {
    let d = prep.dims;
    let sizes: Vec<usize> = prep.atoms.iter().map(Vec::len).collect();
    let jcount: usize = sizes.iter().product();
    let mut k = vec![0; d];
    let mut j = vec![0; d];
    for klin in 0..prep.num_points() {
        decode(klin, prep.base, &mut k);
        for jlin in 0..jcount {
            let mut r = jlin;
            for (slot, &s) in j.iter_mut().zip(&sizes).rev() {
                *slot = r % s;
                r /= s;
            }
            f(&k, &j);
        }
    }
}

/// Up to `limit` rows violated by more than `tol` at `cert`, most violated first.
pub fn separation_oracle(prob: &DrmotProblem, cert: &DualCertificate, tol: f64, limit: usize) -> Result<Vec<ViolatedRow>> {
    let prep = Prepared::new(prob)?;
    let (_, layout) = base_problem(prob)?;
    check_certificate_shape(&layout, cert)?;
    Ok(separate(&prep, &layout, &DualPoint::from_certificate(cert), tol, limit))
}

/// Largest row value `LHS - RHS` over every grid and atom tuple; nonpositive
/// exactly when `cert` is dual feasible.
pub fn certificate_violation(prob: &DrmotProblem, cert: &DualCertificate) -> Result<f64> {
    let prep = Prepared::new(prob)?;
    let (_, layout) = base_problem(prob)?;
    check_certificate_shape(&layout, cert)?;
    let top = separate(&prep, &layout, &DualPoint::from_certificate(cert), f64::NEG_INFINITY, 1);
    Ok(top.first().map_or(f64::NEG_INFINITY, |r| r.violation))
}

fn check_certificate_shape(layout: &DualLayout, cert: &DualCertificate) -> Result<()> {
    let alpha_len: usize = cert.alpha.iter().map(Vec::len).sum();
    let ok = cert.nodes_per_dim == layout.nodes_per_dim()
        && alpha_len == layout.num_prefixes()
        && cert.alpha_abs.iter().map(Vec::len).sum::<usize>() == alpha_len
        && cert.beta.len() == layout.beta.len()
        && cert.beta.iter().zip(&layout.beta).all(|(a, b)| a.len() == b.len())
        && cert.eta.is_some() == layout.eta.is_some();
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter("certificate does not match the problem layout".into()))
    }
}

/// Solves the instance, extracts the worst-case measure and verifies it.
pub fn solve_drmot(prob: &DrmotProblem, opts: &DrmotOptions) -> Result<DrmotResult> {
    let prep = Prepared::new(prob)?;
    let (mut p, layout) = base_problem(prob)?;
    let total_rows = prep.num_rows();
    let eager = match opts.mode {
        RowMode::Auto => total_rows <= opts.eager_row_limit,
        RowMode::Eager => true,
        RowMode::Lazy => false,
    };
    if eager && total_rows > MATERIALIZE_HARD_LIMIT {
        return Err(Error::SizeGuard { rows: total_rows, limit: MATERIALIZE_HARD_LIMIT });
    }
    let mut book: HashMap<Vec<u64>, (Vec<usize>, Vec<usize>)> = HashMap::new();
    let push = |p: &mut LpProblem, book: &mut HashMap<_, _>, k: &[usize], j: &[usize]| {
        let row = payoff_row(&prep, &layout, k, j);
        if book.insert(row_key(&row), (k.to_vec(), j.to_vec())).is_none() {
            p.rows.push(row);
        }
    };
    if eager {
        for_each_row(&prep, |k, j| push(&mut p, &mut book, k, j));
    } else {
        seed_rows(&prep, |k, j| push(&mut p, &mut book, k, j));
    }

    let tol = opts.lazy.violation_tol;
    let limit = opts.rows_per_round.max(1);
    let fmax = prep.fvals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let lazy = LazyOptions { box_bound: opts.lazy.box_bound * (1.0 + fmax), ..opts.lazy };
    let sol = if eager {
        lp::solve_with_lazy_rows(&mut p, |_| Vec::new(), &lazy)
    } else {
        lp::solve_with_lazy_rows(
            &mut p,
            |x| {
                let pt = DualPoint::from_lp(&layout, x);
                separate(&prep, &layout, &pt, tol, limit)
                    .into_iter()
                    .map(|v| {
                        let row = payoff_row(&prep, &layout, &v.k, &v.j);
                        book.entry(row_key(&row)).or_insert((v.k, v.j));
                        row
                    })
                    .collect::<Vec<LpRow>>()
            },
            &lazy,
        )
    };
    match sol.status {
        Status::Optimal => {}
        Status::Unbounded => return Err(infeasibility_error(prob, &prep)),
        Status::Infeasible => return Err(Error::Lp("dual LP reported infeasible".into())),
        Status::IterationLimit => return Err(Error::IterationLimit),
    }

    let cert_raw = DualCertificate::from_lp(&layout, prob, &sol.primal);
    let value = sol.objective;
    let pt = DualPoint::from_lp(&layout, &sol.primal);
    let superhedge_violation = separate(&prep, &layout, &pt, 0.0, 1).first().map_or(0.0, |r| r.violation);

    let mut support = Vec::new();
    let mut masses = Vec::new();
    let mut transport = 0.0;
    for (row, &y) in p.rows.iter().zip(&sol.duals).skip(layout.num_abs_rows) {
        let mass = -y;
        if mass < MASS_TOL {
            continue;
        }
        let (k, j) = book.get(&row_key(row)).ok_or_else(|| Error::Lp("unrecognized row".into()))?;
        support.push(prep.point(k));
        masses.push(mass);
        transport += mass * prep.transport_cost(k, j);
    }
    let total_mass: f64 = masses.iter().sum();
    let primal = JointMeasure::new(support, masses)?;
    let transport_cost = transport / total_mass;

    let coupling_report: Vec<f64> = (0..prob.dims())
        .map(|i| wasserstein1(&primal.marginal(i), prob.marginals.get(i)))
        .collect();
    let delta_report = verify_delta_martingale(&primal, prob.delta);
    let distance = marginal_set_distance(&primal, &prob.marginals)?;
    let expected = primal.iter().try_fold(0.0, |acc, (x, w)| prob.payoff.eval(x).map(|v| acc + w * v))?;
    let verification = Verification {
        duality_gap: sol.certify(&p).gap,
        delta_violation: (delta_report.worst_violation - prob.delta).max(0.0),
        distance_slack: (distance - prob.epsilon).max(0.0),
        payoff_gap: (expected - value).abs(),
        superhedge_violation: superhedge_violation.max(0.0),
        mean_violation: if prob.mean_zero_mode { primal.coordinate_mean(0).abs() } else { 0.0 },
    };
    Ok(DrmotResult {
        value,
        certificate: cert_raw.normalized(),
        primal,
        coupling_report,
        transport_cost,
        verification,
        stats: SolveStats {
            mode: if eager { RowMode::Eager } else { RowMode::Lazy },
            total_rows,
            materialized_rows: p.num_rows() - layout.num_abs_rows,
            lp_iterations: sol.iterations,
        },
    })
}

/// Rows pairing every grid tuple with its nearest atoms, and every atom with
/// its nearest nodes, so that each variable starts out constrained.
fn seed_rows(prep: &Prepared, mut f: impl FnMut(&[usize], &[usize])) {
    let d = prep.dims;
    let mut k = vec![0; d];
    let mut j = vec![0; d];
    for klin in 0..prep.num_points() {
        decode(klin, prep.base, &mut k);
        for i in 0..d {
            j[i] = prep.nearest_atom(i, prep.nodes[i][k[i]]);
        }
        f(&k, &j);
    }
    let longest = prep.atoms.iter().map(Vec::len).max().unwrap_or(0);
    for t in 0..longest {
        for i in 0..d {
            j[i] = t.min(prep.atoms[i].len() - 1);
            k[i] = prep.nearest_node(i, prep.atoms[i][j[i]]);
        }
        f(&k, &j);
    }
}

fn infeasibility_error(prob: &DrmotProblem, prep: &Prepared) -> Error {
    match feasibility::minimum_radius_prepared(prep) {
        Ok(r) if r > prob.epsilon + RADIUS_TOL => Error::InfeasibleRadius { epsilon: prob.epsilon, min_radius: r },
        Ok(_) => Error::Unbounded,
        Err(e) => e,
    }
}

/// Independent oracle: materializes every row and solves the LP in one shot.
pub fn solve_bruteforce(prob: &DrmotProblem) -> Result<f64> {
    let rows = prob.num_rows();
    if rows > BRUTEFORCE_ROW_LIMIT {
        return Err(Error::SizeGuard { rows, limit: BRUTEFORCE_ROW_LIMIT });
    }
    let prep = Prepared::new(prob)?;
    let r = feasibility::minimum_radius_prepared(&prep)?;
    if r > prob.epsilon + RADIUS_TOL {
        return Err(Error::InfeasibleRadius { epsilon: prob.epsilon, min_radius: r });
    }
    let assembled = assemble_dual_lp(prob, BRUTEFORCE_ROW_LIMIT)?;
    let opts = SolveOptions { route: Route::Dual, ..Default::default() };
    let sol = lp::solve(&assembled.problem, &opts);
    match sol.status {
        Status::Optimal => Ok(sol.objective),
        Status::Unbounded => Err(Error::Unbounded),
        Status::Infeasible => Err(Error::Lp("dual LP reported infeasible".into())),
        Status::IterationLimit => Err(Error::IterationLimit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::measures::{DiscreteMeasure, Interval};

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn seq(ms: Vec<DiscreteMeasure>) -> MarginalSequence {
        MarginalSequence::from_measures(ms).unwrap()
    }

    fn split() -> MarginalSequence {
        seq(vec![DiscreteMeasure::dirac(0.0), DiscreteMeasure::uniform(&[-1.0, 1.0]).unwrap()])
    }

    fn problem(marg: MarginalSequence, grid: Grid, eps: f64, delta: f64, f: Payoff) -> DrmotProblem {
        DrmotProblem::new(marg, grid, eps, delta, f).unwrap()
    }

    #[test]
    fn assembled_sizes() {
        let g = build_grid(vec![iv(0.0, 1.0); 2], 1).unwrap();
        let m = seq(vec![DiscreteMeasure::dirac(0.5); 2]);
        let a = assemble_dual_lp(&problem(m, g, 0.1, 0.0, Payoff::spread(2).unwrap()), u128::MAX).unwrap();
        assert_eq!(a.problem.num_vars(), 7);
        assert_eq!(a.row_index.len(), 4);
        assert_eq!(a.layout.num_prefixes(), 2);

        let g = build_grid(vec![iv(0.0, 1.0); 3], 1).unwrap();
        let two = DiscreteMeasure::uniform(&[0.25, 0.75]).unwrap();
        let a = assemble_dual_lp(&problem(seq(vec![two; 3]), g, 0.1, 0.0, Payoff::spread(3).unwrap()), u128::MAX).unwrap();
        assert_eq!(a.row_index.len(), 64);
        assert_eq!(a.layout.num_prefixes(), 6);
        assert!(a.complete);
    }

    #[test]
    fn zero_payoff_has_zero_value() {
        // nodes of x_2 are {-2, 0, 2}, one unit from the atoms ±1
        let g = build_grid(vec![iv(-1.0, 1.0), iv(-2.0, 2.0)], 2).unwrap();
        for eps in [1.0, 1.7, 5.0] {
            let prob = problem(split(), g.clone(), eps, 0.0, Payoff::constant(2, 0.0).unwrap());
            let r = solve_drmot(&prob, &DrmotOptions::default()).unwrap();
            assert!(r.value.abs() < 1e-12);
            assert!(solve_bruteforce(&prob).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn point_marginals_give_zero_spread() {
        let g = build_grid(vec![iv(-1.0, 1.0); 2], 2).unwrap();
        let m = seq(vec![DiscreteMeasure::dirac(0.0); 2]);
        let r = solve_drmot(&problem(m, g, 0.0, 0.0, Payoff::spread(2).unwrap()), &DrmotOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-9);
        assert!(r.verification.passes(r.value));
    }

    #[test]
    fn split_marginals() {
        // x_1 on [-1,1], x_2 on [-2,2]; both node sets contain {-1, 0, 1}
        let g = build_grid(vec![iv(-1.0, 1.0), iv(-2.0, 2.0)], 4).unwrap();
        let exact = problem(split(), g.clone(), 0.0, 0.0, Payoff::spread(2).unwrap());
        let r = solve_drmot(&exact, &DrmotOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
        assert!(r.verification.passes(r.value), "{:?}", r.verification);
        assert!((solve_bruteforce(&exact).unwrap() - 1.0).abs() < 1e-9);

        // budget beyond Σ l_i: only the martingale constraint binds, best is 0 -> ±2
        let loose = problem(split(), g, 6.0, 0.0, Payoff::spread(2).unwrap());
        let r = solve_drmot(&loose, &DrmotOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
        assert!(r.verification.passes(r.value), "{:?}", r.verification);
    }

    #[test]
    fn single_node_grid() {
        let g = build_grid(vec![iv(0.5, 1.5), iv(0.5, 1.5)], 1).unwrap();
        let m = seq(vec![DiscreteMeasure::dirac(0.5); 2]);
        let f = Payoff::new("sum", 2, 1.0, |x: &[f64]| x[0] + 3.0 * x[1]).unwrap();
        let prob = problem(m, g, 0.0, 0.0, f);
        assert!((solve_bruteforce(&prob).unwrap() - 2.0).abs() < 1e-9);
        assert!((solve_drmot(&prob, &DrmotOptions::default()).unwrap().value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lazy_matches_eager() {
        let g = build_grid(vec![iv(-1.0, 1.0), iv(-2.0, 2.0)], 2).unwrap();
        let m = seq(vec![
            DiscreteMeasure::uniform(&[-0.5, 0.0, 0.5]).unwrap(),
            DiscreteMeasure::uniform(&[-1.5, 0.1, 1.4]).unwrap(),
        ]);
        for f in [Payoff::spread(2).unwrap(), Payoff::lookback(2).unwrap(), Payoff::asian_call(2, 0.1).unwrap()] {
            let prob = problem(m.clone(), g.clone(), 0.8, 0.1, f);
            let eager = solve_drmot(&prob, &DrmotOptions { mode: RowMode::Eager, ..Default::default() }).unwrap();
            let lazy = solve_drmot(&prob, &DrmotOptions { mode: RowMode::Lazy, rows_per_round: 2, ..Default::default() }).unwrap();
            assert!((eager.value - lazy.value).abs() < 1e-7, "{} vs {}", eager.value, lazy.value);
            assert!(lazy.verification.passes(lazy.value), "{:?}", lazy.verification);
            assert!(lazy.stats.materialized_rows < eager.stats.materialized_rows);
        }
    }

    #[test]
    fn infeasible_radius_is_reported() {
        let g = build_grid(vec![iv(-1.0, 1.0); 2], 2).unwrap();
        // means differ by one: no martingale within radius 0.5
        let m = seq(vec![DiscreteMeasure::dirac(0.0), DiscreteMeasure::dirac(1.0)]);
        let prob = problem(m, g, 0.5, 0.0, Payoff::spread(2).unwrap());
        match solve_drmot(&prob, &DrmotOptions::default()) {
            Err(Error::InfeasibleRadius { min_radius, .. }) => assert!((min_radius - 1.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert!((minimum_radius(&prob).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(solve_bruteforce(&prob), Err(Error::InfeasibleRadius { .. })));
    }

    #[test]
    fn certificate_is_feasible_and_normalized() {
        let g = build_grid(vec![iv(-1.0, 1.0), iv(-2.0, 2.0)], 4).unwrap();
        let prob = problem(split(), g, 0.3, 0.05, Payoff::spread(2).unwrap());
        let r = solve_drmot(&prob, &DrmotOptions::default()).unwrap();
        let c = &r.certificate;
        assert!((c.objective(prob.epsilon) - r.value).abs() < 1e-7);
        let first: f64 = c.beta[0].iter().zip(&c.beta_weights[0]).map(|(b, w)| b * w).sum();
        assert!(first.abs() < 1e-12);
        assert!(certificate_violation(&prob, c).unwrap() <= 1e-9);
        assert!(separation_oracle(&prob, c, 1e-9, 10).unwrap().is_empty());
        assert!(c.gamma >= 0.0);
        for (_, a, b) in c.alpha_entries() {
            assert!(b + 1e-10 >= a.abs());
        }
    }

    #[test]
    fn zero_certificate_separates_payoff_argmax() {
        let g = build_grid(vec![iv(-1.0, 1.0), iv(-2.0, 2.0)], 2).unwrap();
        let prob = problem(split(), g, 0.3, 0.0, Payoff::spread(2).unwrap());
        let zero = DualCertificate {
            gamma: 0.0,
            eta: None,
            alpha: vec![vec![0.0; 3]],
            alpha_abs: vec![vec![0.0; 3]],
            beta: vec![vec![0.0], vec![0.0, 0.0]],
            beta_weights: vec![vec![1.0], vec![0.5, 0.5]],
            nodes_per_dim: 3,
        };
        let rows = separation_oracle(&prob, &zero, 1e-9, 100).unwrap();
        // |x_2 - x_1| is largest (3) at (-1, 2) and (1, -2)
        assert_eq!(rows[0].k, vec![0, 2]);
        assert_eq!(rows[1].k, vec![2, 0]);
        assert!((rows[0].violation - 3.0).abs() < 1e-12);
        assert_eq!(rows.len(), 8);
    }

    #[test]
    fn mot_examples() {
        let f = Payoff::spread(2).unwrap();
        assert!((solve_mot_exact(&split(), &f).unwrap() - 1.0).abs() < 1e-9);
        let c = Payoff::constant(2, 2.5).unwrap();
        assert!((solve_mot_exact(&split(), &c).unwrap() - 2.5).abs() < 1e-9);
        let dirac = seq(vec![DiscreteMeasure::dirac(0.0); 2]);
        let g = Payoff::new("g", 2, 1.0, |x: &[f64]| 1.0 + x[0] + x[1]).unwrap();
        assert!((solve_mot_exact(&dirac, &g).unwrap() - 1.0).abs() < 1e-12);
        let bad = seq(vec![DiscreteMeasure::uniform(&[-1.0, 1.0]).unwrap(), DiscreteMeasure::dirac(0.0)]);
        assert!(matches!(solve_mot_exact(&bad, &f), Err(Error::NotConvexOrdered)));
    }

    #[test]
    fn mean_zero_mode_centers_first_coordinate() {
        let g = build_grid(vec![iv(-1.0, 1.0), iv(-2.0, 2.0)], 4).unwrap();
        let m = seq(vec![
            DiscreteMeasure::uniform(&[-0.4, 0.6]).unwrap(),
            DiscreteMeasure::uniform(&[-1.3, 0.1, 1.2]).unwrap(),
        ]);
        let f = Payoff::coordinate(2, 0).unwrap();
        let free = solve_drmot(&problem(m.clone(), g.clone(), 0.5, 0.1, f.clone()), &DrmotOptions::default()).unwrap();
        let centered = problem(m, g, 0.5, 0.1, f).with_mean_zero(true);
        let r = solve_drmot(&centered, &DrmotOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-9);
        assert!(free.value > 0.1);
        assert!(r.certificate.eta.is_some());
        assert!(r.verification.passes(r.value), "{:?}", r.verification);
    }
}
