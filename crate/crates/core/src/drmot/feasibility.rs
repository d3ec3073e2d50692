use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, RowSense, Sense, SolveOptions, Status, VarId};

use super::dual::{decode, Prepared};
use super::DrmotProblem;

/// Smallest radius `ε` at which the instance has a feasible point: the least
/// total W1 distance from a δ-martingale on the grid (mean zero in coordinate
/// one when `mean_zero_mode` is set) to the marginals. Infinite when no such
/// grid measure exists.
pub fn minimum_radius(prob: &DrmotProblem) -> Result<f64> {
    let prep = Prepared::new(prob)?;
    minimum_radius_prepared(&prep)
}

pub(crate) fn minimum_radius_prepared(prep: &Prepared) -> Result<f64> {
    let d = prep.dims;
    let base = prep.base;
    let mut p = LpProblem::new(Sense::Minimize);
    let mass: Vec<VarId> = (0..prep.num_points())
        .map(|_| p.add_variable(0.0, f64::INFINITY, 0.0))
        .collect::<Result<_>>()?;
    // q[i][k_i][j]: mass moved between node k_i and atom j of coordinate i
    let mut q: Vec<Vec<Vec<VarId>>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut qi = Vec::with_capacity(base);
        for &x in &prep.nodes[i] {
            qi.push(
                prep.atoms[i]
                    .iter()
                    .map(|&a| p.add_variable(0.0, f64::INFINITY, (a - x).abs()))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        q.push(qi);
    }
    let mut k = vec![0; d];
    let mut node_rows: Vec<Vec<Vec<(VarId, f64)>>> = (0..d).map(|_| vec![Vec::new(); base]).collect();
    let mut prefix_rows: Vec<Vec<(VarId, f64, f64)>> = Vec::new();
    let prefix_count: usize = (1..d).map(|l| base.pow(l as u32)).sum();
    prefix_rows.resize(prefix_count, Vec::new());
    let mut mean_row = Vec::new();
    for (klin, &m) in mass.iter().enumerate() {
        decode(klin, base, &mut k);
        for i in 0..d {
            node_rows[i][k[i]].push((m, -1.0));
        }
        let mut offset = 0;
        let mut lin = 0;
        for i in 0..d.saturating_sub(1) {
            lin = lin * base + k[i];
            let drift = prep.nodes[i + 1][k[i + 1]] - prep.nodes[i][k[i]];
            prefix_rows[offset + lin].push((m, drift, prep.delta));
            offset += base.pow(i as u32 + 1);
        }
        if prep.mean_zero {
            mean_row.push((m, prep.nodes[0][k[0]]));
        }
    }
    for i in 0..d {
        for (ki, row) in node_rows[i].iter_mut().enumerate() {
            row.extend(q[i][ki].iter().map(|&v| (v, 1.0)));
            p.add_constraint(row.drain(..), RowSense::Eq, 0.0)?;
        }
        for (j, &w) in prep.weights[i].iter().enumerate() {
            p.add_constraint((0..base).map(|ki| (q[i][ki][j], 1.0)), RowSense::Eq, w)?;
        }
    }
    for row in &prefix_rows {
        p.add_constraint(row.iter().map(|&(m, drift, delta)| (m, drift - delta)), RowSense::Le, 0.0)?;
        p.add_constraint(row.iter().map(|&(m, drift, delta)| (m, drift + delta)), RowSense::Ge, 0.0)?;
    }
    if prep.mean_zero {
        p.add_constraint(mean_row, RowSense::Eq, 0.0)?;
    }
    let sol = lp::solve(&p, &SolveOptions::default());
    match sol.status {
        Status::Optimal => Ok(sol.objective.max(0.0)),
        Status::Infeasible => Ok(f64::INFINITY),
        Status::Unbounded => Err(Error::Lp("minimum-radius LP reported unbounded".into())),
        Status::IterationLimit => Err(Error::IterationLimit),
    }
}
