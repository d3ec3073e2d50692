//! Uniform grids over boxes, δ-martingale checks and the hat-function
//! projection of a martingale measure onto grid nodes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::joint::{position_key, JointMeasure};
use crate::measures::{Interval, MarginalSequence};

/// Absolute slack added to every δ-martingale comparison.
pub const MARTINGALE_ABS_TOL: f64 = 1e-10;
/// Input to [`project_martingale`] must be a martingale to this tolerance.
pub const PROJECTION_INPUT_TOL: f64 = 1e-9;

/// Nodes `a_i + k l_i / N`, `0 <= k <= N`, for each coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    intervals: Vec<Interval>,
    resolution: usize,
}

impl Grid {
    pub fn new(intervals: Vec<Interval>, resolution: usize) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Empty("grid intervals"));
        }
        if resolution < 1 {
            return Err(Error::InvalidParameter("grid resolution must be at least 1".into()));
        }
        if let Some(iv) = intervals.iter().find(|iv| iv.lo >= iv.hi) {
            return Err(Error::Interval(iv.lo, iv.hi));
        }
        Ok(Grid { intervals, resolution })
    }

    pub fn dims(&self) -> usize {
        self.intervals.len()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// `l_i = b_i - a_i`.
    pub fn length(&self, i: usize) -> f64 {
        self.intervals[i].len()
    }

    /// `l = max_i l_i`.
    pub fn max_length(&self) -> f64 {
        self.intervals.iter().map(Interval::len).fold(0.0, f64::max)
    }

    /// Nodes per coordinate, `N + 1`.
    pub fn nodes_per_dim(&self) -> usize {
        self.resolution + 1
    }

    pub fn node(&self, i: usize, k: usize) -> f64 {
        let iv = self.intervals[i];
        if k == self.resolution {
            iv.hi
        } else {
            iv.lo + k as f64 * iv.len() / self.resolution as f64
        }
    }

    pub fn nodes(&self, i: usize) -> Vec<f64> {
        (0..=self.resolution).map(|k| self.node(i, k)).collect()
    }

    pub fn point(&self, k: &[usize]) -> Vec<f64> {
        k.iter().enumerate().map(|(i, &ki)| self.node(i, ki)).collect()
    }

    /// Total number of node tuples, `(N + 1)^d`.
    pub fn num_points(&self) -> usize {
        self.nodes_per_dim().pow(self.dims() as u32)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims() && x.iter().zip(&self.intervals).all(|(&v, iv)| iv.contains(v))
    }

    /// Whether `x` lies on a node in every coordinate.
    pub fn is_node_point(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| self.nodes(i).iter().any(|&n| position_key(n) == position_key(v)))
    }
}

pub fn build_grid(intervals: Vec<Interval>, resolution: usize) -> Result<Grid> {
    Grid::new(intervals, resolution)
}

/// `τ = min_i (a_i - a_{i+1}) ∧ min_i (b_{i+1} - b_i)`; may be nonpositive.
pub fn dispersion_tau(intervals: &[Interval]) -> Result<f64> {
    if intervals.len() < 2 {
        return Err(Error::InvalidParameter("dispersion needs at least two intervals".into()));
    }
    Ok(intervals
        .windows(2)
        .map(|w| (w[0].lo - w[1].lo).min(w[1].hi - w[0].hi))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaMartingaleReport {
    pub ok: bool,
    /// Largest conditional drift `|E[X_{k+1} - X_k | X_{1:k}]|` over all prefixes.
    pub worst_violation: f64,
    pub worst_prefix: Vec<f64>,
}

/// Checks `|Σ_next (x_{k+1} - x_k) w| <= δ · mass(prefix) + 1e-10` for every prefix.
pub fn verify_delta_martingale(pi: &JointMeasure, delta: f64) -> DeltaMartingaleReport {
    let mut ok = true;
    let mut worst = 0.0;
    let mut worst_prefix = Vec::new();
    for k in 1..pi.dims() {
        // prefix (x_1..x_k) -> (prefix values, mass, drift)
        let mut groups: BTreeMap<Vec<i64>, (Vec<f64>, f64, f64)> = BTreeMap::new();
        for (x, w) in pi.iter() {
            let key: Vec<i64> = x[..k].iter().map(|&v| position_key(v)).collect();
            let g = groups.entry(key).or_insert_with(|| (x[..k].to_vec(), 0.0, 0.0));
            g.1 += w;
            g.2 += w * (x[k] - x[k - 1]);
        }
        for (prefix, mass, drift) in groups.into_values() {
            if drift.abs() > delta * mass + MARTINGALE_ABS_TOL {
                ok = false;
            }
            let normalized = drift.abs() / mass;
            if normalized > worst {
                worst = normalized;
                worst_prefix = prefix;
            }
        }
    }
    DeltaMartingaleReport { ok, worst_violation: worst, worst_prefix }
}

/// Projects a martingale measure inside the grid box onto the grid nodes.
///
/// Each atom spreads its mass over the (at most `2^d`) surrounding grid corners
/// with product hat-function weights. The result has coordinatewise means equal
/// to those of `pi`, is an `(l/N)`-martingale, and lies within `l√d/N` of `pi`.
pub fn project_martingale(pi: &JointMeasure, g: &Grid) -> Result<JointMeasure> {
    if pi.dims() != g.dims() {
        return Err(Error::Dimension { expected: g.dims(), got: pi.dims() });
    }
    if let Some((x, _)) = pi.iter().find(|(x, _)| !g.contains(x)) {
        return Err(Error::OutsideDomain { point: x.to_vec() });
    }
    let report = verify_delta_martingale(pi, 0.0);
    if report.worst_violation > PROJECTION_INPUT_TOL {
        return Err(Error::NotMartingale(report.worst_violation));
    }
    let n = g.resolution();
    let mut mass: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (x, w) in pi.iter() {
        // per coordinate: (lower node index, weight on it, weight on the next node)
        let cells: Vec<(usize, f64, f64)> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let iv = g.intervals()[i];
                let t = ((v - iv.lo) / iv.len() * n as f64).clamp(0.0, n as f64);
                let k = (t.floor() as usize).min(n - 1);
                let frac = (t - k as f64).clamp(0.0, 1.0);
                (k, 1.0 - frac, frac)
            })
            .collect();
        let d = cells.len();
        for corner in 0..(1usize << d) {
            let mut weight = w;
            let mut key = Vec::with_capacity(d);
            for (i, &(k, lo_w, hi_w)) in cells.iter().enumerate() {
                if corner >> i & 1 == 1 {
                    weight *= hi_w;
                    key.push(k + 1);
                } else {
                    weight *= lo_w;
                    key.push(k);
                }
            }
            if weight > 0.0 {
                *mass.entry(key).or_insert(0.0) += weight;
            }
        }
    }
    let (support, weights): (Vec<_>, Vec<_>) = mass.into_iter().map(|(k, w)| (g.point(&k), w)).unzip();
    JointMeasure::new(support, weights)
}

/// `Λ^δ`: intervals `[-i C, i C]` with `C = c' √(log(1/δ))`, `i = 1..d`.
pub fn truncation_domain(dims: usize, delta: f64, c_prime: f64) -> Result<Vec<Interval>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("truncation level δ = {delta} must lie in (0, 1)")));
    }
    if !(c_prime > 0.0 && c_prime.is_finite()) {
        return Err(Error::InvalidParameter(format!("truncation constant c' = {c_prime} must be positive")));
    }
    if dims == 0 {
        return Err(Error::Empty("truncation dimension"));
    }
    let c = c_prime * (1.0 / delta).ln().sqrt();
    (1..=dims).map(|i| Interval::new(-(i as f64) * c, i as f64 * c)).collect()
}

/// Data-driven `c'`: `max_i max_j |x_ij| / i`, so every sample lies in `Λ^δ` at `δ = 1/e`.
pub fn default_c_prime(marg: &MarginalSequence) -> f64 {
    marg.measures()
        .iter()
        .enumerate()
        .map(|(i, m)| m.min_atom().abs().max(m.max_atom().abs()) / (i + 1) as f64)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn grid_nodes() {
        assert_eq!(build_grid(vec![iv(0.0, 1.0)], 2).unwrap().nodes(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(build_grid(vec![iv(-1.0, 1.0)], 1).unwrap().nodes(0), vec![-1.0, 1.0]);
        assert_eq!(build_grid(vec![iv(0.0, 3.0)], 3).unwrap().nodes(0), vec![0.0, 1.0, 2.0, 3.0]);
        assert!(build_grid(vec![iv(0.0, 1.0)], 0).is_err());
        assert!(build_grid(vec![iv(1.0, 1.0)], 2).is_err());
    }

    #[test]
    fn nodes_monotone_with_exact_endpoints() {
        let g = build_grid(vec![iv(-0.3, 0.7), iv(-1.1, 2.9)], 7).unwrap();
        for i in 0..2 {
            let n = g.nodes(i);
            assert_eq!(n.len(), 8);
            assert_eq!(n[0], g.intervals()[i].lo);
            assert_eq!(n[7], g.intervals()[i].hi);
            assert!(n.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion_tau(&[iv(-1.0, 1.0), iv(-2.0, 2.0)]).unwrap(), 1.0);
        assert_eq!(dispersion_tau(&[iv(0.0, 1.0), iv(0.0, 2.0)]).unwrap(), 0.0);
        assert_eq!(dispersion_tau(&[iv(-1.0, 1.0), iv(-1.5, 2.0), iv(-2.0, 3.0)]).unwrap(), 0.5);
        assert!(dispersion_tau(&[iv(0.0, 1.0)]).is_err());
    }

    #[test]
    fn delta_martingale_examples() {
        let p = JointMeasure::dirac(vec![0.0, 0.0, 0.0]).unwrap();
        assert!(verify_delta_martingale(&p, 0.0).ok);
        let p = JointMeasure::new(vec![vec![0.0, 1.0], vec![0.0, -1.0]], vec![0.5, 0.5]).unwrap();
        assert!(verify_delta_martingale(&p, 0.0).ok);
        let p = JointMeasure::dirac(vec![0.0, 0.1]).unwrap();
        let r = verify_delta_martingale(&p, 0.0);
        assert!(!r.ok);
        assert!((r.worst_violation - 0.1).abs() < 1e-15);
        assert_eq!(r.worst_prefix, vec![0.0]);
        assert!(verify_delta_martingale(&p, 0.1).ok);
        assert!(!verify_delta_martingale(&p, 0.09).ok);
    }

    #[test]
    fn projection_examples() {
        let g = build_grid(vec![iv(0.0, 1.0)], 2).unwrap();
        let p = JointMeasure::dirac(vec![0.25]).unwrap();
        let q = project_martingale(&p, &g).unwrap();
        assert_eq!(q.support(), &[vec![0.0], vec![0.5]]);
        assert_eq!(q.weights(), &[0.5, 0.5]);

        let g = build_grid(vec![iv(-1.0, 1.0), iv(-1.0, 1.0)], 2).unwrap();
        let on_grid = JointMeasure::new(vec![vec![0.0, -1.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(project_martingale(&on_grid, &g).unwrap(), on_grid);
    }

    #[test]
    fn projection_of_two_point_split() {
        let g = build_grid(vec![iv(-1.0, 1.0), iv(-1.0, 1.0)], 2).unwrap();
        let p = JointMeasure::new(vec![vec![0.0, -0.3], vec![0.0, 0.3]], vec![0.5, 0.5]).unwrap();
        let q = project_martingale(&p, &g).unwrap();
        assert!(q.coordinate_mean(1).abs() < 1e-15);
        assert!(q.support().iter().all(|x| g.is_node_point(x)));
        let w = crate::joint::joint_wasserstein1(&p, &q).unwrap();
        assert!((w - 0.42).abs() < 1e-9);
        assert!(w <= 2.0 * 2f64.sqrt() / 2.0);
        assert!(verify_delta_martingale(&q, 1.0).ok);
    }

    #[test]
    fn projection_rejects_bad_input() {
        let g = build_grid(vec![iv(0.0, 1.0), iv(0.0, 1.0)], 2).unwrap();
        let outside = JointMeasure::dirac(vec![0.5, 1.5]).unwrap();
        assert!(matches!(project_martingale(&outside, &g), Err(Error::OutsideDomain { .. })));
        let drift = JointMeasure::dirac(vec![0.5, 0.75]).unwrap();
        assert!(matches!(project_martingale(&drift, &g), Err(Error::NotMartingale(_))));
    }

    #[test]
    fn truncation_examples() {
        let e = std::f64::consts::E;
        let d = truncation_domain(2, 1.0 / e, 1.0).unwrap();
        assert!((d[0].lo + 1.0).abs() < 1e-15 && (d[0].hi - 1.0).abs() < 1e-15);
        assert!((d[1].lo + 2.0).abs() < 1e-15 && (d[1].hi - 2.0).abs() < 1e-15);
        let d = truncation_domain(1, 1.0 / e, 3.0).unwrap();
        assert!((d[0].hi - 3.0).abs() < 1e-14);
        let d = truncation_domain(1, (-4.0f64).exp(), 1.0).unwrap();
        assert!((d[0].hi - 2.0).abs() < 1e-14);
        assert!(truncation_domain(1, 1.0, 1.0).is_err());
        assert!(truncation_domain(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn truncation_intervals_strictly_nested() {
        let d = truncation_domain(4, 0.01, 0.7).unwrap();
        assert!(d.windows(2).all(|w| w[1].lo < w[0].lo && w[0].hi < w[1].hi));
    }
}
