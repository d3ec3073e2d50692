//! Bounded-variable revised primal simplex on the computational form
//! `min c'x  s.t.  Ax = b,  l <= x <= u`.
//!
//! The basis inverse is kept dense (column-major) and updated with a rank-one
//! product-form step per pivot; it is rebuilt from scratch periodically. Pricing
//! is Dantzig's rule; after a long run of degenerate pivots the entering column
//! is drawn at random among the improving ones, which breaks cycling with
//! probability one without the slow crawl of Bland's rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse column-wise constraint matrix plus bounds and costs.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub m: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
    /// A unit column (+1 in row i only) that may start in the basis.
    pub slack_of_row: Vec<Option<usize>>,
}

impl StandardForm {
    pub fn new(m: usize, rhs: Vec<f64>) -> Self {
        StandardForm {
            m,
            cols: Vec::new(),
            cost: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            rhs,
            slack_of_row: vec![None; m],
        }
    }

    pub fn push_col(&mut self, col: Vec<(usize, f64)>, cost: f64, lower: f64, upper: f64) -> usize {
        self.cols.push(col);
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cols.len() - 1
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub pivot: f64,
    pub feas: f64,
    pub opt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EngineStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN_FOR_RANDOM: usize = 50;

pub(crate) struct Engine {
    sf: StandardForm,
    artificial: Vec<bool>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    binv: Vec<f64>,
    tol: Tolerances,
    phase_one_done: bool,
    since_refactor: usize,
    rng: ChaCha8Rng,
    pub iterations: usize,
}

impl Engine {
    pub fn new(sf: StandardForm, tol: Tolerances) -> Self {
        let n = sf.cols.len();
        let m = sf.m;
        let mut eng = Engine {
            artificial: vec![false; n],
            basis: Vec::with_capacity(m),
            state: Vec::with_capacity(n),
            x: vec![0.0; n],
            binv: vec![0.0; m * m],
            tol,
            phase_one_done: false,
            since_refactor: 0,
            rng: ChaCha8Rng::seed_from_u64(0x5eed),
            iterations: 0,
            sf,
        };
        for j in 0..n {
            let (st, v) = nonbasic_start(eng.sf.lower[j], eng.sf.upper[j]);
            eng.state.push(st);
            eng.x[j] = v;
        }
        let mut resid = eng.sf.rhs.clone();
        for j in 0..n {
            if eng.x[j] != 0.0 {
                for &(i, a) in &eng.sf.cols[j] {
                    resid[i] -= a * eng.x[j];
                }
            }
        }
        for i in 0..m {
            let slack = eng.sf.slack_of_row[i].filter(|&s| {
                eng.x[s] == 0.0
                    && resid[i] >= eng.sf.lower[s] - 1e-12
                    && resid[i] <= eng.sf.upper[s] + 1e-12
            });
            let (col, sign) = match slack {
                Some(s) => (s, 1.0),
                None => {
                    let sign = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
                    let a = eng.sf.push_col(vec![(i, sign)], 0.0, 0.0, f64::INFINITY);
                    eng.artificial.push(true);
                    eng.state.push(VarState::Lower);
                    eng.x.push(0.0);
                    (a, sign)
                }
            };
            eng.x[col] = resid[i] * sign;
            eng.state[col] = VarState::Basic(i);
            eng.basis.push(col);
            eng.binv[i * m + i] = sign;
        }
        if !eng.artificial.iter().any(|&a| a) {
            eng.phase_one_done = true;
        }
        eng
    }

    pub fn num_cols(&self) -> usize {
        self.sf.cols.len()
    }

    pub fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    /// Appends a column that starts nonbasic; its resting value must be zero so
    /// the current basis stays primal feasible.
    pub fn add_column(&mut self, col: Vec<(usize, f64)>, cost: f64, lower: f64, upper: f64) -> usize {
        let (st, v) = nonbasic_start(lower, upper);
        debug_assert!(v == 0.0, "new columns must rest at zero");
        let j = self.sf.push_col(col, cost, lower, upper);
        self.artificial.push(false);
        self.state.push(st);
        self.x.push(v);
        j
    }

    /// Runs phase one (if still needed) and phase two.
    pub fn optimize(&mut self, max_iters: usize) -> EngineStatus {
        if !self.phase_one_done {
            let cost: Vec<f64> = self.artificial.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
            match self.iterate(&cost, max_iters) {
                EngineStatus::Optimal => {}
                EngineStatus::IterationLimit => return EngineStatus::IterationLimit,
                // Phase one is bounded below; failure here is numerical.
                _ => return EngineStatus::Infeasible,
            }
            let infeas: f64 = (0..self.num_cols())
                .filter(|&j| self.artificial[j])
                .map(|j| self.x[j].abs())
                .sum();
            let scale = 1.0 + self.sf.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if infeas > self.tol.feas * scale {
                return EngineStatus::Infeasible;
            }
            for j in 0..self.num_cols() {
                if self.artificial[j] {
                    self.sf.upper[j] = 0.0;
                    self.x[j] = 0.0;
                    if !matches!(self.state[j], VarState::Basic(_)) {
                        self.state[j] = VarState::Lower;
                    }
                }
            }
            self.drive_out_artificials();
            self.refactor();
            self.phase_one_done = true;
        }
        let cost = self.sf.cost.clone();
        self.iterate(&cost, max_iters)
    }

    /// Simplex multipliers `y = c_B B^{-1}` for the phase-two costs.
    pub fn duals(&self) -> Vec<f64> {
        self.multipliers(&self.sf.cost)
    }

    fn multipliers(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let cb: Vec<f64> = self.basis.iter().map(|&b| cost[b]).collect();
        (0..m)
            .map(|r| {
                let col = &self.binv[r * m..(r + 1) * m];
                col.iter().zip(&cb).map(|(a, c)| a * c).sum()
            })
            .collect()
    }

    /// `B^{-1} a` for a sparse column `a`.
    fn ftran(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let m = self.sf.m;
        let mut w = vec![0.0; m];
        for &(r, a) in col {
            let c = &self.binv[r * m..(r + 1) * m];
            for (wi, ci) in w.iter_mut().zip(c) {
                *wi += a * ci;
            }
        }
        w
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        cost[j] - self.sf.cols[j].iter().map(|&(i, a)| a * y[i]).sum::<f64>()
    }

    fn iterate(&mut self, cost: &[f64], max_iters: usize) -> EngineStatus {
        let m = self.sf.m;
        let mut degenerate_run = 0usize;
        let mut local_iters = 0usize;
        loop {
            if local_iters >= max_iters {
                return EngineStatus::IterationLimit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let random = degenerate_run >= DEGENERATE_RUN_FOR_RANDOM;
            let mut improving = 0usize;
            let y = self.multipliers(cost);

            // pricing
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.num_cols() {
                let dir = match self.state[j] {
                    VarState::Basic(_) => continue,
                    _ if self.sf.lower[j] == self.sf.upper[j] => continue,
                    VarState::Lower => {
                        let d = self.reduced_cost(j, cost, &y);
                        if d < -self.tol.opt { Some((1.0, -d)) } else { None }
                    }
                    VarState::Upper => {
                        let d = self.reduced_cost(j, cost, &y);
                        if d > self.tol.opt { Some((-1.0, d)) } else { None }
                    }
                    VarState::Zero => {
                        let d = self.reduced_cost(j, cost, &y);
                        if d.abs() > self.tol.opt { Some((-d.signum(), d.abs())) } else { None }
                    }
                };
                if let Some((dir, score)) = dir {
                    if random {
                        // reservoir sample over the improving columns
                        improving += 1;
                        if self.rng.random_range(0..improving) == 0 {
                            entering = Some((j, dir));
                        }
                        continue;
                    }
                    if score > best {
                        best = score;
                        entering = Some((j, dir));
                    }
                }
            }
            let Some((q, dir)) = entering else {
                return EngineStatus::Optimal;
            };

            let w = self.ftran(&self.sf.cols[q]);
            let mut theta = self.sf.upper[q] - self.sf.lower[q];
            let mut leave: Option<usize> = None;
            let mut leave_piv = 0.0f64;
            for i in 0..m {
                let alpha = dir * w[i];
                if w[i].abs() < self.tol.pivot {
                    continue;
                }
                let b = self.basis[i];
                let ratio = if alpha > 0.0 {
                    if self.sf.lower[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (self.x[b] - self.sf.lower[b]) / alpha
                } else {
                    if self.sf.upper[b] == f64::INFINITY {
                        continue;
                    }
                    (self.sf.upper[b] - self.x[b]) / -alpha
                };
                let ratio = ratio.max(0.0);
                if ratio < theta - 1e-12 {
                    theta = ratio;
                    leave = Some(i);
                    leave_piv = w[i].abs();
                } else if ratio <= theta + 1e-12 && leave.is_some() && w[i].abs() > leave_piv {
                    theta = theta.min(ratio);
                    leave = Some(i);
                    leave_piv = w[i].abs();
                }
            }
            if !theta.is_finite() {
                return EngineStatus::Unbounded;
            }

            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            local_iters += 1;
            self.iterations += 1;

            // move
            self.x[q] += dir * theta;
            for i in 0..m {
                if w[i] != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= theta * dir * w[i];
                }
            }
            match leave {
                None => {
                    self.state[q] = match self.state[q] {
                        VarState::Lower => VarState::Upper,
                        _ => VarState::Lower,
                    };
                    self.x[q] = if self.state[q] == VarState::Lower { self.sf.lower[q] } else { self.sf.upper[q] };
                }
                Some(r) => {
                    let b = self.basis[r];
                    let alpha = dir * w[r];
                    if alpha > 0.0 {
                        self.state[b] = VarState::Lower;
                        self.x[b] = self.sf.lower[b];
                    } else {
                        self.state[b] = VarState::Upper;
                        self.x[b] = self.sf.upper[b];
                    }
                    self.basis[r] = q;
                    self.state[q] = VarState::Basic(r);
                    self.pivot_update(r, &w);
                }
            }
        }
    }

    fn pivot_update(&mut self, r: usize, w: &[f64]) {
        let m = self.sf.m;
        let wr = w[r];
        for c in 0..m {
            let col = &mut self.binv[c * m..(c + 1) * m];
            let t = col[r] / wr;
            if t != 0.0 {
                for (i, wi) in w.iter().enumerate() {
                    if *wi != 0.0 {
                        col[i] -= wi * t;
                    }
                }
            }
            col[r] = t;
        }
        self.since_refactor += 1;
    }

    /// Pivots basic artificials (now fixed at zero) out of the basis where a
    /// non-artificial column can replace them; redundant rows keep theirs.
    fn drive_out_artificials(&mut self) {
        let m = self.sf.m;
        for r in 0..m {
            let b = self.basis[r];
            if !self.artificial[b] {
                continue;
            }
            let rho: Vec<f64> = (0..m).map(|c| self.binv[c * m + r]).collect();
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..self.num_cols() {
                if self.artificial[j] || matches!(self.state[j], VarState::Basic(_)) {
                    continue;
                }
                let v: f64 = self.sf.cols[j].iter().map(|&(i, a)| a * rho[i]).sum();
                if v.abs() > 1e-7 && pick.is_none_or(|(_, pv)| v.abs() > pv.abs() * 10.0) {
                    pick = Some((j, v));
                }
            }
            if let Some((q, _)) = pick {
                let w = self.ftran(&self.sf.cols[q]);
                self.state[b] = VarState::Lower;
                self.x[b] = 0.0;
                self.basis[r] = q;
                self.state[q] = VarState::Basic(r);
                self.pivot_update(r, &w);
            }
        }
    }

    /// Rebuilds `B^{-1}` by Gauss-Jordan elimination and recomputes basic values.
    fn refactor(&mut self) {
        let m = self.sf.m;
        self.since_refactor = 0;
        if m == 0 {
            return;
        }
        // dense B, row-major, augmented with identity
        let mut a = vec![0.0; m * m];
        for (k, &b) in self.basis.iter().enumerate() {
            for &(i, v) in &self.sf.cols[b] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (p, pv) = (c..m)
                .map(|r| (r, a[r * m + c].abs()))
                .fold((c, -1.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            if pv < 1e-13 {
                // numerically singular; keep the updated inverse
                return;
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        // inv is row-major B^{-1}; store column-major
        for i in 0..m {
            for j in 0..m {
                self.binv[j * m + i] = inv[i * m + j];
            }
        }
        let mut resid = self.sf.rhs.clone();
        for j in 0..self.num_cols() {
            if matches!(self.state[j], VarState::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            for &(i, v) in &self.sf.cols[j] {
                resid[i] -= v * self.x[j];
            }
        }
        let xb: Vec<f64> = {
            let mut out = vec![0.0; m];
            for (r, &rv) in resid.iter().enumerate() {
                if rv == 0.0 {
                    continue;
                }
                let c = &self.binv[r * m..(r + 1) * m];
                for (o, ci) in out.iter_mut().zip(c) {
                    *o += rv * ci;
                }
            }
            out
        };
        for (k, &b) in self.basis.iter().enumerate() {
            self.x[b] = xb[k];
        }
    }

    pub fn finish(&mut self) {
        self.refactor();
    }
}

fn nonbasic_start(lower: f64, upper: f64) -> (VarState, f64) {
    if lower.is_finite() {
        (VarState::Lower, lower)
    } else if upper.is_finite() {
        (VarState::Upper, upper)
    } else {
        (VarState::Zero, 0.0)
    }
}
