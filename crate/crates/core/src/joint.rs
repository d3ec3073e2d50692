//! Finite measures on R^d.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, RowSense, Sense, SolveOptions, Status};
use crate::measures::{format_f64, DiscreteMeasure, MERGE_TOL};

/// Support points with strictly positive weights summing to one. Points are
/// distinct and kept in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMeasure {
    dims: usize,
    support: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Integer key of a position after rounding to [`MERGE_TOL`].
pub(crate) fn position_key(x: f64) -> i64 {
    (x / MERGE_TOL).round() as i64
}

impl JointMeasure {
    /// Merges duplicate points, drops zero weights and renormalizes.
    pub fn new(support: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "support and weights",
                left: support.len(),
                right: weights.len(),
            });
        }
        let dims = support.first().map(Vec::len).ok_or(Error::Empty("joint measure"))?;
        if dims == 0 {
            return Err(Error::Empty("joint measure dimension"));
        }
        let mut merged: BTreeMap<Vec<i64>, (Vec<f64>, f64)> = BTreeMap::new();
        for (x, w) in support.into_iter().zip(weights) {
            if x.len() != dims {
                return Err(Error::Dimension { expected: dims, got: x.len() });
            }
            if !w.is_finite() || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("joint measure"));
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight(w));
            }
            if w == 0.0 {
                continue;
            }
            let key: Vec<i64> = x.iter().map(|&v| position_key(v)).collect();
            merged.entry(key).or_insert_with(|| (x, 0.0)).1 += w;
        }
        let total: f64 = merged.values().map(|v| v.1).sum();
        if merged.is_empty() || total <= 0.0 {
            return Err(Error::Empty("joint measure with positive mass"));
        }
        let mut entries: Vec<(Vec<f64>, f64)> = merged.into_values().collect();
        entries.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let (support, weights): (Vec<_>, Vec<_>) = entries.into_iter().map(|(x, w)| (x, w / total)).unzip();
        Ok(JointMeasure { dims, support, weights })
    }

    pub fn dirac(x: Vec<f64>) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    /// Product measure of 1-D marginals.
    pub fn product(marginals: &[DiscreteMeasure]) -> Result<Self> {
        let mut support = vec![Vec::new()];
        let mut weights = vec![1.0];
        for m in marginals {
            let mut s2 = Vec::with_capacity(support.len() * m.len());
            let mut w2 = Vec::with_capacity(support.len() * m.len());
            for (x, w) in support.iter().zip(&weights) {
                for (a, v) in m.iter() {
                    let mut y = x.clone();
                    y.push(a);
                    s2.push(y);
                    w2.push(w * v);
                }
            }
            support = s2;
            weights = w2;
        }
        Self::new(support, weights)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.support.iter().map(Vec::as_slice).zip(self.weights.iter().copied())
    }

    /// The law of coordinate `i`.
    pub fn marginal(&self, i: usize) -> DiscreteMeasure {
        DiscreteMeasure::new(self.support.iter().map(|x| x[i]).collect(), self.weights.clone())
            .expect("marginal of a valid joint measure")
    }

    pub fn coordinate_mean(&self, i: usize) -> f64 {
        self.iter().map(|(x, w)| x[i] * w).sum()
    }

    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| f(x) * w).sum()
    }

    /// Reads CSV with `d` position columns followed by a weight column.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut support = Vec::new();
        let mut weights = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("`{t}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() < 2 {
                return Err(Error::Parse("joint measure rows need positions and a weight".into()));
            }
            let (x, w) = vals.split_at(vals.len() - 1);
            support.push(x.to_vec());
            weights.push(w[0]);
        }
        Self::new(support, weights)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dims).map(|i| format!("x{i}")).collect();
        header.push("weight".into());
        wtr.write_record(&header)?;
        for (x, w) in self.iter() {
            let mut rec: Vec<String> = x.iter().map(|&v| format_f64(v)).collect();
            rec.push(format_f64(w));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Wasserstein-1 between two joint measures under l1 ground cost, by the dense
/// transport LP over the product of their supports.
pub fn joint_wasserstein1(a: &JointMeasure, b: &JointMeasure) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension { expected: a.dims(), got: b.dims() });
    }
    let mut p = LpProblem::new(Sense::Minimize);
    let nb = b.len();
    let mut vars = Vec::with_capacity(a.len() * nb);
    for x in a.support() {
        for y in b.support() {
            let c: f64 = x.iter().zip(y).map(|(u, v)| (u - v).abs()).sum();
            vars.push(p.add_variable(0.0, f64::INFINITY, c)?);
        }
    }
    for (i, &w) in a.weights().iter().enumerate() {
        p.add_constraint((0..nb).map(|j| (vars[i * nb + j], 1.0)), RowSense::Eq, w)?;
    }
    for (j, &w) in b.weights().iter().enumerate() {
        p.add_constraint((0..a.len()).map(|i| (vars[i * nb + j], 1.0)), RowSense::Eq, w)?;
    }
    let sol = lp::solve(&p, &SolveOptions::default());
    match sol.status {
        Status::Optimal => Ok(sol.objective),
        s => Err(Error::Lp(format!("joint transport LP ended with {s:?}"))),
    }
}
