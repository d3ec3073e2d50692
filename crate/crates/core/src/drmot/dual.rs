//! Variable layout, row construction and separation for the discretized dual LP.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{LpProblem, LpRow, RowSense, Sense, VarId};

use super::{DrmotProblem, DualCertificate};

/// Precomputed grid nodes, sample atoms and payoff values of one instance.
pub(crate) struct Prepared {
    pub dims: usize,
    /// Nodes per coordinate, `N + 1`.
    pub base: usize,
    pub nodes: Vec<Vec<f64>>,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    /// Payoff at every grid tuple, indexed by [`Prepared::encode`].
    pub fvals: Vec<f64>,
    pub delta: f64,
    pub mean_zero: bool,
}

impl Prepared {
    pub fn new(prob: &DrmotProblem) -> Result<Self> {
        let dims = prob.dims();
        let base = prob.grid.nodes_per_dim();
        let nodes: Vec<Vec<f64>> = (0..dims).map(|i| prob.grid.nodes(i)).collect();
        let total = base
            .checked_pow(dims as u32)
            .filter(|&t| t <= 50_000_000)
            .ok_or(Error::SizeGuard { rows: (base as u128).pow(dims as u32), limit: 50_000_000 })?;
        let fvals = (0..total)
            .into_par_iter()
            .map(|klin| {
                let mut k = vec![0; dims];
                decode(klin, base, &mut k);
                let x: Vec<f64> = k.iter().enumerate().map(|(i, &ki)| nodes[i][ki]).collect();
                prob.payoff.eval(&x)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Prepared {
            dims,
            base,
            atoms: prob.marginals.measures().iter().map(|m| m.atoms().to_vec()).collect(),
            weights: prob.marginals.measures().iter().map(|m| m.weights().to_vec()).collect(),
            nodes,
            fvals,
            delta: prob.delta,
            mean_zero: prob.mean_zero_mode,
        })
    }

    pub fn num_points(&self) -> usize {
        self.fvals.len()
    }

    /// Number of rows of the fully materialized LP.
    pub fn num_rows(&self) -> u128 {
        self.atoms.iter().map(|a| a.len() as u128).product::<u128>() * self.fvals.len() as u128
    }

    pub fn point(&self, k: &[usize]) -> Vec<f64> {
        k.iter().enumerate().map(|(i, &ki)| self.nodes[i][ki]).collect()
    }

    /// `Σ_i |X_{i,j_i} - node_{i,k_i}|`.
    pub fn transport_cost(&self, k: &[usize], j: &[usize]) -> f64 {
        (0..self.dims).map(|i| (self.atoms[i][j[i]] - self.nodes[i][k[i]]).abs()).sum()
    }

    pub fn nearest_node(&self, i: usize, x: f64) -> usize {
        nearest(&self.nodes[i], x)
    }

    pub fn nearest_atom(&self, i: usize, x: f64) -> usize {
        nearest(&self.atoms[i], x)
    }
}

fn nearest(sorted: &[f64], x: f64) -> usize {
    let p = sorted.partition_point(|&v| v < x);
    if p == 0 {
        0
    } else if p == sorted.len() || (x - sorted[p - 1]) <= (sorted[p] - x) {
        p - 1
    } else {
        p
    }
}

/// Writes the base-`base` digits of `lin` into `k`, most significant first, so
/// the linear order of tuples is lexicographic.
pub(crate) fn decode(mut lin: usize, base: usize, k: &mut [usize]) {
    for slot in k.iter_mut().rev() {
        *slot = lin % base;
        lin /= base;
    }
}

pub(crate) fn encode(k: &[usize], base: usize) -> usize {
    k.iter().fold(0, |acc, &ki| acc * base + ki)
}

/// Where each dual variable lives in the [`LpProblem`].
#[derive(Debug, Clone)]
pub struct DualLayout {
    dims: usize,
    base: usize,
    pub gamma: VarId,
    pub eta: Option<VarId>,
    /// Start of each prefix level (prefix length `1..d`) within `alpha`.
    level_offset: Vec<usize>,
    pub alpha: Vec<VarId>,
    pub alpha_abs: Vec<VarId>,
    /// `beta[i][j]` for the distinct atoms of marginal `i`.
    pub beta: Vec<Vec<VarId>>,
    /// Rows `alpha_abs ± alpha >= 0` placed before the payoff rows.
    pub num_abs_rows: usize,
}

impl DualLayout {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.base
    }

    /// Position in `alpha` of the prefix `k_1..k_len` (`1 <= len < d`).
    pub fn prefix_index(&self, k: &[usize]) -> usize {
        self.level_offset[k.len() - 1] + encode(k, self.base)
    }

    pub fn num_prefixes(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_vars(&self) -> usize {
        1 + self.eta.is_some() as usize + 2 * self.alpha.len() + self.beta.iter().map(Vec::len).sum::<usize>()
    }
}

/// Minimization LP holding every variable and the `alpha_abs` rows but none of
/// the payoff rows.
pub(crate) fn base_problem(prob: &DrmotProblem) -> Result<(LpProblem, DualLayout)> {
    let d = prob.dims();
    let base = prob.grid.nodes_per_dim();
    let mut p = LpProblem::new(Sense::Minimize);
    let gamma = p.add_variable(0.0, f64::INFINITY, prob.epsilon)?;
    let eta = if prob.mean_zero_mode {
        Some(p.add_variable(f64::NEG_INFINITY, f64::INFINITY, 0.0)?)
    } else {
        None
    };
    let mut level_offset = Vec::with_capacity(d.saturating_sub(1));
    let mut count = 0usize;
    for level in 1..d {
        level_offset.push(count);
        count += base.pow(level as u32);
    }
    let mut alpha = Vec::with_capacity(count);
    let mut alpha_abs = Vec::with_capacity(count);
    for _ in 0..count {
        alpha.push(p.add_variable(f64::NEG_INFINITY, f64::INFINITY, 0.0)?);
        alpha_abs.push(p.add_variable(0.0, f64::INFINITY, 0.0)?);
    }
    let mut beta = Vec::with_capacity(d);
    for m in prob.marginals.measures() {
        beta.push(
            m.weights()
                .iter()
                .map(|&w| p.add_variable(f64::NEG_INFINITY, f64::INFINITY, w))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    for (&a, &b) in alpha.iter().zip(&alpha_abs) {
        p.add_constraint([(b, 1.0), (a, -1.0)], RowSense::Ge, 0.0)?;
        p.add_constraint([(b, 1.0), (a, 1.0)], RowSense::Ge, 0.0)?;
    }
    let layout = DualLayout {
        dims: d,
        base,
        gamma,
        eta,
        level_offset,
        alpha,
        alpha_abs,
        beta,
        num_abs_rows: 2 * count,
    };
    Ok((p, layout))
}

/// The constraint for grid tuple `k` paired with atom tuple `j`:
/// `Σ α (x_{i+1} - x_i) + δ Σ |α| - γ Σ |X_{i,j_i} - x_i| - Σ β_{i,j_i} (+ η x_1) <= -f(x)`.
pub(crate) fn payoff_row(prep: &Prepared, layout: &DualLayout, k: &[usize], j: &[usize]) -> LpRow {
    let d = prep.dims;
    let mut entries: Vec<(VarId, f64)> = Vec::with_capacity(3 * d + 2);
    for i in 0..d.saturating_sub(1) {
        let pi = layout.prefix_index(&k[..=i]);
        entries.push((layout.alpha[pi], prep.nodes[i + 1][k[i + 1]] - prep.nodes[i][k[i]]));
        entries.push((layout.alpha_abs[pi], prep.delta));
    }
    entries.push((layout.gamma, -prep.transport_cost(k, j)));
    for i in 0..d {
        entries.push((layout.beta[i][j[i]], -1.0));
    }
    if let Some(eta) = layout.eta {
        entries.push((eta, prep.nodes[0][k[0]]));
    }
    LpRow::new(entries, RowSense::Le, -prep.fvals[encode(k, prep.base)])
}

/// Dual variables in flat form, read from an LP point or a certificate.
pub(crate) struct DualPoint {
    pub gamma: f64,
    pub eta: f64,
    pub alpha: Vec<f64>,
    pub alpha_abs: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
}

impl DualPoint {
    pub fn from_lp(layout: &DualLayout, x: &[f64]) -> Self {
        DualPoint {
            gamma: x[layout.gamma.0],
            eta: layout.eta.map_or(0.0, |v| x[v.0]),
            alpha: layout.alpha.iter().map(|v| x[v.0]).collect(),
            alpha_abs: layout.alpha_abs.iter().map(|v| x[v.0]).collect(),
            beta: layout.beta.iter().map(|b| b.iter().map(|v| x[v.0]).collect()).collect(),
        }
    }

    pub fn from_certificate(c: &DualCertificate) -> Self {
        DualPoint {
            gamma: c.gamma,
            eta: c.eta.unwrap_or(0.0),
            alpha: c.alpha.concat(),
            alpha_abs: c.alpha_abs.concat(),
            beta: c.beta.clone(),
        }
    }
}

/// A payoff row with its violation at the point that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolatedRow {
    pub k: Vec<usize>,
    pub j: Vec<usize>,
    pub violation: f64,
}

/// For every grid tuple, the row with the cheapest atoms; returns up to `limit`
/// rows with violation above `tol`, most violated first, ties in lexicographic
/// order of `k`.
pub(crate) fn separate(
    prep: &Prepared,
    layout: &DualLayout,
    pt: &DualPoint,
    tol: f64,
    limit: usize,
) -> Vec<ViolatedRow> {
    let d = prep.dims;
    let base = prep.base;
    // best[i][k_i] = (min_j γ|X_ij - node| + β_ij, argmin with ties to the smallest j)
    let best: Vec<Vec<(f64, usize)>> = (0..d)
        .map(|i| {
            prep.nodes[i]
                .iter()
                .map(|&x| {
                    let mut arg = (f64::INFINITY, 0);
                    for (j, &a) in prep.atoms[i].iter().enumerate() {
                        let v = pt.gamma * (a - x).abs() + pt.beta[i][j];
                        if v < arg.0 {
                            arg = (v, j);
                        }
                    }
                    arg
                })
                .collect()
        })
        .collect();
    let mut found: Vec<(f64, usize)> = (0..prep.num_points())
        .into_par_iter()
        .with_min_len(4096)
        .filter_map(|klin| {
            let mut k = vec![0; d];
            decode(klin, base, &mut k);
            let (v, scale) = row_value(prep, layout, pt, &best, &k);
            (v > tol * (1.0 + scale)).then_some((v, klin))
        })
        .collect();
    found.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    found.truncate(limit);
    found
        .into_iter()
        .map(|(violation, klin)| {
            let mut k = vec![0; d];
            decode(klin, base, &mut k);
            let j = (0..d).map(|i| best[i][k[i]].1).collect();
            ViolatedRow { k, j, violation }
        })
        .collect()
}

/// Row left-hand side minus right-hand side at `k` with the cheapest atoms,
/// together with the sum of the absolute values of its terms.
fn row_value(
    prep: &Prepared,
    layout: &DualLayout,
    pt: &DualPoint,
    best: &[Vec<(f64, usize)>],
    k: &[usize],
) -> (f64, f64) {
    let mut terms = Vec::with_capacity(3 * prep.dims + 1);
    terms.push(prep.fvals[encode(k, prep.base)]);
    let mut pidx = 0;
    for i in 0..prep.dims {
        terms.push(-best[i][k[i]].0);
        if i + 1 < prep.dims {
            pidx = if i == 0 { k[0] } else { (pidx - layout.level_offset[i - 1]) * prep.base + k[i] };
            pidx += layout.level_offset[i];
            terms.push(pt.alpha[pidx] * (prep.nodes[i + 1][k[i + 1]] - prep.nodes[i][k[i]]));
            terms.push(prep.delta * pt.alpha_abs[pidx]);
        }
    }
    if prep.mean_zero {
        terms.push(pt.eta * prep.nodes[0][k[0]]);
    }
    (terms.iter().sum(), terms.iter().map(|t| t.abs()).sum())
}
