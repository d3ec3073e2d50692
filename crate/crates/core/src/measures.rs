//! Finite probability measures on the real line.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::JointMeasure;
use crate::lp::{self, LpProblem, RowSense, Sense, SolveOptions, Status};

/// Atoms closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;
/// Tolerance for mean equality and call-function domination in convex order.
pub const CONVEX_ORDER_TOL: f64 = 1e-9;

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::Interval(lo, hi));
        }
        Ok(Interval { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo - MERGE_TOL && x <= self.hi + MERGE_TOL
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo + MERGE_TOL && other.hi <= self.hi + MERGE_TOL
    }
}

/// Sorted atoms with strictly positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Sorts atoms, merges duplicates and renormalizes. Zero weights are dropped.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "atoms and weights",
                left: atoms.len(),
                right: weights.len(),
            });
        }
        if atoms.is_empty() {
            return Err(Error::Empty("measure"));
        }
        if atoms.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measure"));
        }
        if let Some(&w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(Error::NegativeWeight(w));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).filter(|p| p.1 > 0.0).collect();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if pairs.is_empty() || total <= 0.0 {
            return Err(Error::Empty("measure with positive mass"));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match atoms.last() {
                Some(&last) if (x - last).abs() <= MERGE_TOL => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(x);
                    weights.push(w);
                }
            }
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(DiscreteMeasure { atoms, weights })
    }

    pub fn dirac(x: f64) -> Self {
        DiscreteMeasure { atoms: vec![x], weights: vec![1.0] }
    }

    /// Empirical measure: each distinct value carries multiplicity / n.
    pub fn empirical(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("sample list"));
        }
        Self::new(samples.to_vec(), vec![1.0; samples.len()])
    }

    /// Uniform weights on the given atoms (duplicates merged).
    pub fn uniform(atoms: &[f64]) -> Result<Self> {
        Self::empirical(atoms)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, w)| x * w).sum()
    }

    pub fn first_abs_moment(&self) -> f64 {
        self.iter().map(|(x, w)| x.abs() * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(x, w)| (x - m) * (x - m) * w).sum()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    /// `∫ (x - t)_+ dμ`.
    pub fn call(&self, strike: f64) -> f64 {
        self.iter().map(|(x, w)| (x - strike).max(0.0) * w).sum()
    }

    /// Reads `atom,weight` CSV with a one-line header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for rec in rdr.deserialize::<(f64, f64)>() {
            let (a, w) = rec?;
            atoms.push(a);
            weights.push(w);
        }
        Self::new(atoms, weights)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["atom", "weight"])?;
        for (x, w) in self.iter() {
            wtr.write_record([format_f64(x), format_f64(w)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Round-trip float formatting.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Parses whitespace- or newline-separated samples.
pub fn parse_samples(text: &str) -> Result<Vec<f64>> {
    let samples = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("sample `{t}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    Ok(samples)
}

/// Exact 1-D Wasserstein-1 distance, `∫ |F_a - F_b| dx` over merged breakpoints.
pub fn wasserstein1(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut prev: Option<f64> = None;
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.atoms.get(i), b.atoms.get(j)) {
            (Some(&xa), Some(&xb)) => xa.min(xb),
            (Some(&xa), None) => xa,
            (None, Some(&xb)) => xb,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            total += (fa - fb).abs() * (x - p);
        }
        while i < a.len() && a.atoms[i] <= x {
            fa += a.weights[i];
            i += 1;
        }
        while j < b.len() && b.atoms[j] <= x {
            fb += b.weights[j];
            j += 1;
        }
        prev = Some(x);
    }
    total
}

/// Wasserstein-1 as the `|a| x |b|` transport LP.
pub fn wasserstein1_lp(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    let mut p = LpProblem::new(Sense::Minimize);
    let mut vars = Vec::with_capacity(a.len() * b.len());
    for &x in a.atoms() {
        for &y in b.atoms() {
            vars.push(p.add_variable(0.0, f64::INFINITY, (x - y).abs())?);
        }
    }
    for (i, &w) in a.weights().iter().enumerate() {
        p.add_constraint((0..b.len()).map(|j| (vars[i * b.len() + j], 1.0)), RowSense::Eq, w)?;
    }
    for (j, &w) in b.weights().iter().enumerate() {
        p.add_constraint((0..a.len()).map(|i| (vars[i * b.len() + j], 1.0)), RowSense::Eq, w)?;
    }
    let sol = lp::solve(&p, &SolveOptions::default());
    match sol.status {
        Status::Optimal => Ok(sol.objective),
        s => Err(Error::Lp(format!("transport LP ended with {s:?}"))),
    }
}

/// `a ⪯c b`: equal means and dominated call prices at every atom of either measure.
pub fn convex_order_leq(a: &DiscreteMeasure, b: &DiscreteMeasure) -> bool {
    if (a.mean() - b.mean()).abs() > CONVEX_ORDER_TOL {
        return false;
    }
    a.atoms()
        .iter()
        .chain(b.atoms())
        .all(|&t| a.call(t) <= b.call(t) + CONVEX_ORDER_TOL)
}

/// Marginals `μ_1, …, μ_d` with their support intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSequence {
    measures: Vec<DiscreteMeasure>,
    supports: Vec<Interval>,
}

impl MarginalSequence {
    /// Requires nested supports `[a_1,b_1] ⊆ … ⊆ [a_d,b_d]`.
    pub fn new(measures: Vec<DiscreteMeasure>, supports: Vec<Interval>) -> Result<Self> {
        Self::build(measures, supports, true)
    }

    /// As [`MarginalSequence::new`] but without the nesting requirement, for raw data.
    pub fn new_unnested(measures: Vec<DiscreteMeasure>, supports: Vec<Interval>) -> Result<Self> {
        Self::build(measures, supports, false)
    }

    /// Uses each measure's own hull as its support, without nesting.
    pub fn from_measures(measures: Vec<DiscreteMeasure>) -> Result<Self> {
        let supports = measures
            .iter()
            .map(|m| Interval::new(m.min_atom(), m.max_atom()))
            .collect::<Result<Vec<_>>>()?;
        Self::build(measures, supports, false)
    }

    fn build(measures: Vec<DiscreteMeasure>, supports: Vec<Interval>, nested: bool) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::Empty("marginal sequence"));
        }
        if measures.len() != supports.len() {
            return Err(Error::LengthMismatch {
                what: "measures and supports",
                left: measures.len(),
                right: supports.len(),
            });
        }
        for (m, s) in measures.iter().zip(&supports) {
            if let Some(&x) = m.atoms().iter().find(|&&x| !s.contains(x)) {
                return Err(Error::OutsideDomain { point: vec![x] });
            }
        }
        if nested {
            for w in supports.windows(2) {
                if !w[1].contains_interval(&w[0]) {
                    return Err(Error::InvalidParameter(format!(
                        "supports are not nested: [{}, {}] ⊄ [{}, {}]",
                        w[0].lo, w[0].hi, w[1].lo, w[1].hi
                    )));
                }
            }
        }
        Ok(MarginalSequence { measures, supports })
    }

    pub fn dims(&self) -> usize {
        self.measures.len()
    }

    pub fn measures(&self) -> &[DiscreteMeasure] {
        &self.measures
    }

    pub fn supports(&self) -> &[Interval] {
        &self.supports
    }

    pub fn get(&self, i: usize) -> &DiscreteMeasure {
        &self.measures[i]
    }
}

/// Strassen feasibility: consecutive marginals increase in convex order.
pub fn check_convex_chain(seq: &MarginalSequence) -> bool {
    seq.measures().windows(2).all(|w| convex_order_leq(&w[0], &w[1]))
}

/// Distance from `pi` to the couplings of `marg` under l1 cost, which splits into
/// the sum of per-coordinate W1 distances.
pub fn marginal_set_distance(pi: &JointMeasure, marg: &MarginalSequence) -> Result<f64> {
    if pi.dims() != marg.dims() {
        return Err(Error::Dimension { expected: marg.dims(), got: pi.dims() });
    }
    Ok((0..pi.dims())
        .map(|i| wasserstein1(&pi.marginal(i), marg.get(i)))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(atoms: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn construction_sorts_merges_and_normalizes() {
        let a = m(&[1.0, 0.0], &[0.5, 0.5]);
        assert_eq!(a.atoms(), &[0.0, 1.0]);
        assert_eq!(a.weights(), &[0.5, 0.5]);
        let b = m(&[0.0, 0.0, 1.0], &[0.25, 0.25, 0.5]);
        assert_eq!(b.atoms(), &[0.0, 1.0]);
        assert_eq!(b.weights(), &[0.5, 0.5]);
        let c = m(&[0.0, 1.0], &[1.0, 3.0]);
        assert_eq!(c.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(DiscreteMeasure::new(vec![], vec![]), Err(Error::Empty(_))));
        assert!(matches!(DiscreteMeasure::new(vec![0.0], vec![-1.0]), Err(Error::NegativeWeight(_))));
        assert!(matches!(DiscreteMeasure::new(vec![f64::NAN], vec![1.0]), Err(Error::NonFinite(_))));
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn empirical_counts_multiplicity() {
        let e = DiscreteMeasure::empirical(&[2.0, 2.0, 5.0, 1.0]).unwrap();
        assert_eq!(e.atoms(), &[1.0, 2.0, 5.0]);
        assert_eq!(e.weights(), &[0.25, 0.5, 0.25]);
        assert_eq!(DiscreteMeasure::empirical(&[7.0]).unwrap(), DiscreteMeasure::dirac(7.0));
        let e = DiscreteMeasure::empirical(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(e.weights(), &[0.5, 0.5]);
        assert!(DiscreteMeasure::empirical(&[]).is_err());
    }

    #[test]
    fn moments() {
        let a = m(&[-1.0, 1.0], &[0.5, 0.5]);
        assert_eq!((a.mean(), a.first_abs_moment()), (0.0, 1.0));
        let b = DiscreteMeasure::dirac(0.0);
        assert_eq!((b.mean(), b.first_abs_moment()), (0.0, 0.0));
        let c = m(&[1.0, 3.0], &[0.25, 0.75]);
        assert_eq!((c.mean(), c.first_abs_moment()), (2.5, 2.5));
    }

    #[test]
    fn wasserstein_examples() {
        let d0 = DiscreteMeasure::dirac(0.0);
        let d1 = DiscreteMeasure::dirac(1.0);
        assert_eq!(wasserstein1(&d0, &d1), 1.0);
        assert!((wasserstein1_lp(&d0, &d1).unwrap() - 1.0).abs() < 1e-12);
        // couplings of {0,1} and {0,2}: identity pairing costs 0.5, the swap 1.5
        let a = m(&[0.0, 1.0], &[0.5, 0.5]);
        let b = m(&[0.0, 2.0], &[0.5, 0.5]);
        assert!((wasserstein1(&a, &b) - 0.5).abs() < 1e-15);
        assert!((wasserstein1_lp(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(wasserstein1(&a, &a), 0.0);
        // only one coupling with a Dirac: cost 0.5*1 + 0.5*1
        let s = m(&[-1.0, 1.0], &[0.5, 0.5]);
        assert!((wasserstein1_lp(&s, &d0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convex_order_examples() {
        let d0 = DiscreteMeasure::dirac(0.0);
        let s = m(&[-1.0, 1.0], &[0.5, 0.5]);
        let t = m(&[-2.0, 0.0, 2.0], &[0.25, 0.5, 0.25]);
        assert!(convex_order_leq(&d0, &s));
        assert!(!convex_order_leq(&s, &d0));
        // calls of s at -2..2: 1, 1, .5, 0, 0; of t: 2, 1.25, .5, .25, 0
        assert!(convex_order_leq(&s, &t));
    }

    #[test]
    fn convex_chain_examples() {
        let d0 = DiscreteMeasure::dirac(0.0);
        let s = m(&[-1.0, 1.0], &[0.5, 0.5]);
        let t = m(&[-2.0, 0.0, 2.0], &[0.25, 0.5, 0.25]);
        let seq = MarginalSequence::from_measures(vec![d0.clone(), s, t]).unwrap();
        assert!(check_convex_chain(&seq));
        let seq = MarginalSequence::from_measures(vec![d0.clone(), DiscreteMeasure::dirac(1.0)]).unwrap();
        assert!(!check_convex_chain(&seq));
        let seq = MarginalSequence::from_measures(vec![d0]).unwrap();
        assert!(check_convex_chain(&seq));
    }

    #[test]
    fn nesting_is_enforced_unless_relaxed() {
        let a = DiscreteMeasure::dirac(0.0);
        let wide = Interval::new(-2.0, 2.0).unwrap();
        let narrow = Interval::new(-1.0, 1.0).unwrap();
        assert!(MarginalSequence::new(vec![a.clone(), a.clone()], vec![narrow, wide]).is_ok());
        assert!(MarginalSequence::new(vec![a.clone(), a.clone()], vec![wide, narrow]).is_err());
        assert!(MarginalSequence::new_unnested(vec![a.clone(), a.clone()], vec![wide, narrow]).is_ok());
        let off = DiscreteMeasure::dirac(5.0);
        assert!(MarginalSequence::new(vec![off], vec![narrow]).is_err());
    }

    #[test]
    fn marginal_set_distance_examples() {
        let marg = MarginalSequence::from_measures(vec![DiscreteMeasure::dirac(0.0)]).unwrap();
        let pi = JointMeasure::new(vec![vec![1.0]], vec![1.0]).unwrap();
        assert_eq!(marginal_set_distance(&pi, &marg).unwrap(), 1.0);

        let marg = MarginalSequence::from_measures(vec![m(&[0.0, 1.0], &[0.5, 0.5]), m(&[0.0, 2.0], &[0.5, 0.5])])
            .unwrap();
        let pi = JointMeasure::new(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        assert!((marginal_set_distance(&pi, &marg).unwrap() - 1.5).abs() < 1e-15);
        let exact = JointMeasure::new(vec![vec![0.0, 0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(marginal_set_distance(&exact, &marg).unwrap(), 0.0);
        assert!(matches!(
            marginal_set_distance(&JointMeasure::new(vec![vec![0.0]], vec![1.0]).unwrap(), &marg),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_sample_parsing() {
        let a = m(&[-1.5, 0.25, 3.0], &[0.2, 0.3, 0.5]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("atom,weight\n"));
        assert_eq!(DiscreteMeasure::read_csv(&buf[..]).unwrap(), a);
        assert_eq!(parse_samples("1 2\n3\t4\n").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(parse_samples("1 x").is_err());
    }
}
