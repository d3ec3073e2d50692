use std::collections::HashSet;

use super::simplex::EngineStatus;
use super::{DualEngine, LpProblem, LpRow, LpSolution, RowSense, SolveOptions, Status};

#[derive(Debug, Clone, Copy)]
pub struct LazyOptions {
    /// Rows whose relative violation is below this are treated as satisfied.
    pub violation_tol: f64,
    pub max_rounds: usize,
    /// Initial box `[-box_bound, box_bound]` applied to unbounded variables so
    /// the restricted problem stays bounded. Enlarged while it is active.
    pub box_bound: f64,
    pub lp: SolveOptions,
}

impl Default for LazyOptions {
    fn default() -> Self {
        LazyOptions {
            violation_tol: 1e-9,
            max_rounds: 1000,
            box_bound: 1e6,
            lp: SolveOptions::default(),
        }
    }
}

const MAX_BOX: f64 = 1e13;

/// Solves `p` when only part of its rows are known up front.
///
/// Each round solves the rows currently in `p`, hands the candidate primal
/// point to `separation`, and appends every returned row violated by more than
/// `violation_tol` to `p`. Terminates when the oracle has nothing left; the
/// returned duals cover every row of the final `p`.
pub fn solve_with_lazy_rows<F>(p: &mut LpProblem, mut separation: F, opts: &LazyOptions) -> LpSolution
where
    F: FnMut(&[f64]) -> Vec<LpRow>,
{
    let mut seen: HashSet<Vec<u64>> = p.rows.iter().map(row_key).collect();
    let mut bound = opts.box_bound;
    let mut engine = DualEngine::new(p, &box_rows(p, bound), &opts.lp);
    let mut iterations = 0;
    for _round in 0..opts.max_rounds {
        match engine.optimize(opts.lp.max_iters) {
            EngineStatus::Optimal => {}
            // the boxed restricted problem is bounded, so an unbounded dual
            // means no point satisfies the known rows
            EngineStatus::Unbounded => return failed(Status::Infeasible, iterations + engine.iterations()),
            EngineStatus::Infeasible => return failed(Status::Unbounded, iterations + engine.iterations()),
            EngineStatus::IterationLimit => {
                return failed(Status::IterationLimit, iterations + engine.iterations())
            }
        }
        let candidate = engine.extract(p);
        let mut added = 0;
        for row in separation(&candidate.primal) {
            if row.relative_violation(&candidate.primal) <= opts.violation_tol {
                continue;
            }
            if !seen.insert(row_key(&row)) {
                continue;
            }
            engine.add_row(&row);
            p.rows.push(row);
            added += 1;
        }
        if added > 0 {
            continue;
        }
        let box_active = engine.extra_duals().iter().any(|y| y.abs() > 1e-12);
        if !box_active {
            let mut sol = candidate;
            sol.iterations += iterations;
            super::audit(p, &sol);
            return sol;
        }
        bound *= 1e3;
        if bound > MAX_BOX {
            return failed(Status::Unbounded, iterations + engine.iterations());
        }
        iterations += engine.iterations();
        engine = DualEngine::new(p, &box_rows(p, bound), &opts.lp);
    }
    failed(Status::IterationLimit, iterations + engine.iterations())
}

fn failed(status: Status, iterations: usize) -> LpSolution {
    LpSolution::without_values(status, iterations)
}

fn box_rows(p: &LpProblem, bound: f64) -> Vec<LpRow> {
    let mut rows = Vec::new();
    for j in 0..p.num_vars() {
        if p.lower[j] == f64::NEG_INFINITY {
            rows.push(LpRow { coeffs: vec![(j, 1.0)], sense: RowSense::Ge, rhs: -bound });
        }
        if p.upper[j] == f64::INFINITY {
            rows.push(LpRow { coeffs: vec![(j, 1.0)], sense: RowSense::Le, rhs: bound });
        }
    }
    rows
}

pub(crate) fn row_key(r: &LpRow) -> Vec<u64> {
    let mut k = Vec::with_capacity(2 * r.coeffs.len() + 2);
    for &(j, a) in &r.coeffs {
        k.push(j as u64);
        k.push(a.to_bits());
    }
    k.push(r.sense as u64);
    k.push(r.rhs.to_bits());
    k
}
