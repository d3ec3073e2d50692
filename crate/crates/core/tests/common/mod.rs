#![allow(dead_code)]

use drmot::drmot::{minimum_radius, DrmotProblem};
use drmot::grid::build_grid;
use drmot::joint::JointMeasure;
use drmot::measures::{DiscreteMeasure, Interval, MarginalSequence};
use drmot::payoffs::Payoff;
use rand::Rng;

pub fn interval(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).unwrap()
}

/// `[-i, i]` for coordinate `i` (1-based).
pub fn nested_boxes(d: usize) -> Vec<Interval> {
    (1..=d).map(|i| interval(-(i as f64), i as f64)).collect()
}

pub fn random_measure<R: Rng>(rng: &mut R, max_atoms: usize, lo: f64, hi: f64) -> DiscreteMeasure {
    let k = rng.random_range(1..=max_atoms);
    let atoms: Vec<f64> = (0..k).map(|_| rng.random_range(lo..=hi)).collect();
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = weights.iter().sum();
    DiscreteMeasure::new(atoms, weights.iter().map(|w| w / s).collect()).unwrap()
}

fn quarter<R: Rng>(rng: &mut R, lo: i32, hi: i32) -> f64 {
    rng.random_range(lo..=hi) as f64 * 0.25
}

/// A convex-ordered chain built by splitting atoms along a martingale kernel.
/// Atoms are multiples of 1/4, so every weight is exact in binary.
pub fn convex_chain<R: Rng>(rng: &mut R, d: usize, max_atoms: usize) -> Vec<DiscreteMeasure> {
    loop {
        let mut atoms = vec![(quarter(rng, -2, 2), 1.0)];
        if rng.random_bool(0.5) {
            let b = quarter(rng, 1, 4);
            let x = atoms[0].0;
            atoms = vec![(x - b, 0.5), (x + b, 0.5)];
        }
        let mut chain = vec![to_measure(&atoms)];
        let mut ok = true;
        for _ in 1..d {
            let mut next = Vec::new();
            for &(x, w) in &atoms {
                let a = quarter(rng, 0, 4);
                let b = quarter(rng, 0, 4);
                if a == 0.0 || b == 0.0 {
                    next.push((x, w));
                } else {
                    next.push((x - a, w * b / (a + b)));
                    next.push((x + b, w * a / (a + b)));
                }
            }
            atoms = merge(next);
            if atoms.len() > max_atoms {
                ok = false;
                break;
            }
            chain.push(to_measure(&atoms));
        }
        if ok {
            return chain;
        }
    }
}

fn merge(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (x, w) in v {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

fn to_measure(atoms: &[(f64, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::new(atoms.iter().map(|a| a.0).collect(), atoms.iter().map(|a| a.1).collect()).unwrap()
}

/// A random discrete martingale with `X_i ∈ [-i, i]`: each path forks into two
/// children `x - a`, `x + b` with `a, b ∈ (0, 1)` and martingale weights.
pub fn random_martingale<R: Rng>(rng: &mut R, d: usize, roots: usize) -> JointMeasure {
    let mut paths: Vec<(Vec<f64>, f64)> = (0..roots)
        .map(|_| (vec![rng.random_range(-1.0..=1.0)], 1.0 / roots as f64))
        .collect();
    for _ in 1..d {
        let mut next = Vec::with_capacity(2 * paths.len());
        for (p, w) in paths {
            let x = *p.last().unwrap();
            if rng.random_bool(0.2) {
                let mut q = p.clone();
                q.push(x);
                next.push((q, w));
                continue;
            }
            let a: f64 = rng.random_range(0.05..1.0);
            let b: f64 = rng.random_range(0.05..1.0);
            let mut lo = p.clone();
            lo.push(x - a);
            let mut hi = p;
            hi.push(x + b);
            next.push((lo, w * b / (a + b)));
            next.push((hi, w * a / (a + b)));
        }
        paths = next;
    }
    let (support, weights) = paths.into_iter().unzip();
    JointMeasure::new(support, weights).unwrap()
}

pub fn random_payoff<R: Rng>(rng: &mut R, d: usize) -> Payoff {
    match rng.random_range(0..4) {
        0 => Payoff::spread(d).unwrap(),
        1 => Payoff::asian_call(d, rng.random_range(-0.5..0.5)).unwrap(),
        2 => Payoff::lookback(d).unwrap(),
        _ => Payoff::coordinate(d, d - 1).unwrap().shifted(0.0).unwrap(),
    }
}

/// A small random instance whose radius exceeds the minimum feasible one.
pub fn random_problem<R: Rng>(rng: &mut R) -> DrmotProblem {
    let d = rng.random_range(2..=3);
    let resolution = if d == 2 { rng.random_range(1..=5) } else { rng.random_range(1..=3) };
    let supports = nested_boxes(d);
    let measures: Vec<DiscreteMeasure> = (0..d)
        .map(|i| {
            let h = (i + 1) as f64;
            random_measure(rng, 3, -h, h)
        })
        .collect();
    let marg = MarginalSequence::new(measures, supports.clone()).unwrap();
    let grid = build_grid(supports, resolution).unwrap();
    let delta = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..0.5) };
    let payoff = random_payoff(rng, d);
    let probe = DrmotProblem::new(marg, grid, 0.0, delta, payoff).unwrap();
    let r = minimum_radius(&probe).unwrap();
    probe.with_epsilon(r + rng.random_range(0.05..1.0)).unwrap()
}
