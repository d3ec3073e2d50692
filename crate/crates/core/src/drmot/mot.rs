use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, RowSense, Sense, SolveOptions, Status, VarId};
use crate::measures::MarginalSequence;
use crate::payoffs::Payoff;

const MOT_SIZE_LIMIT: usize = 1_000_000;

/// Exact martingale optimal transport: `sup E_π f` over martingale couplings of
/// the marginals, as an LP on the product of their atom sets.
///
/// Returns [`Error::NotConvexOrdered`] when no martingale coupling exists.
pub fn solve_mot_exact(marginals: &MarginalSequence, payoff: &Payoff) -> Result<f64> {
    let d = marginals.dims();
    if payoff.dims() != d {
        return Err(Error::Dimension { expected: d, got: payoff.dims() });
    }
    let sizes: Vec<usize> = marginals.measures().iter().map(|m| m.len()).collect();
    let total = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s).filter(|&t| t <= MOT_SIZE_LIMIT))
        .ok_or(Error::SizeGuard { rows: sizes.iter().map(|&s| s as u128).product(), limit: MOT_SIZE_LIMIT as u128 })?;

    let mut p = LpProblem::new(Sense::Maximize);
    let mut marginal_rows: Vec<Vec<Vec<VarId>>> = sizes.iter().map(|&s| vec![Vec::new(); s]).collect();
    // (level, prefix atom indices) -> entries of the martingale row
    let mut martingale_rows: BTreeMap<(usize, Vec<usize>), Vec<(VarId, f64)>> = BTreeMap::new();
    let mut idx = vec![0; d];
    for lin in 0..total {
        mixed_decode(lin, &sizes, &mut idx);
        let x: Vec<f64> = idx.iter().enumerate().map(|(i, &a)| marginals.get(i).atoms()[a]).collect();
        let v = p.add_variable(0.0, f64::INFINITY, payoff.eval(&x)?)?;
        for i in 0..d {
            marginal_rows[i][idx[i]].push(v);
        }
        for i in 0..d.saturating_sub(1) {
            martingale_rows
                .entry((i, idx[..=i].to_vec()))
                .or_default()
                .push((v, x[i + 1] - x[i]));
        }
    }
    for (i, rows) in marginal_rows.into_iter().enumerate() {
        for (a, vars) in rows.into_iter().enumerate() {
            let w = marginals.get(i).weights()[a];
            p.add_constraint(vars.into_iter().map(|v| (v, 1.0)), RowSense::Eq, w)?;
        }
    }
    for entries in martingale_rows.into_values() {
        p.add_constraint(entries, RowSense::Eq, 0.0)?;
    }
    let sol = lp::solve(&p, &SolveOptions::default());
    match sol.status {
        Status::Optimal => Ok(sol.objective),
        Status::Infeasible => Err(Error::NotConvexOrdered),
        Status::Unbounded => Err(Error::Unbounded),
        Status::IterationLimit => Err(Error::IterationLimit),
    }
}

fn mixed_decode(mut lin: usize, sizes: &[usize], out: &mut [usize]) {
    for (slot, &s) in out.iter_mut().zip(sizes).rev() {
        *slot = lin % s;
        lin /= s;
    }
}
