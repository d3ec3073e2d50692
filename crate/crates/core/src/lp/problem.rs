use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

/// A sparse constraint row. Entries are sorted by variable index and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl LpRow {
    /// Builds a row, summing duplicate variable entries and dropping exact zeros.
    pub fn new(entries: impl IntoIterator<Item = (VarId, f64)>, sense: RowSense, rhs: f64) -> Self {
        let mut coeffs: Vec<(usize, f64)> = entries.into_iter().map(|(v, c)| (v.0, c)).collect();
        coeffs.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (v, c) in coeffs {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        LpRow { coeffs: merged, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            RowSense::Le => (a - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - a).max(0.0),
            RowSense::Eq => (a - self.rhs).abs(),
        }
    }

    /// Violation divided by `1 + |rhs| + Σ|a_j x_j|`, so that rounding in rows
    /// with large cancelling terms is not mistaken for a violation.
    pub fn relative_violation(&self, x: &[f64]) -> f64 {
        let scale: f64 = self.coeffs.iter().map(|&(j, a)| (a * x[j]).abs()).sum();
        self.violation(x) / (1.0 + self.rhs.abs() + scale)
    }
}

/// A linear program `opt c'x  s.t.  rows, lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub obj: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new(sense: Sense) -> Self {
        LpProblem {
            sense,
            obj: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_variable(&mut self, lower: f64, upper: f64, obj: f64) -> Result<VarId> {
        if lower.is_nan() || upper.is_nan() || !obj.is_finite() {
            return Err(Error::NonFinite("variable definition"));
        }
        if lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(format!(
                "inverted variable bounds [{lower}, {upper}]"
            )));
        }
        self.obj.push(obj);
        self.lower.push(lower);
        self.upper.push(upper);
        Ok(VarId(self.obj.len() - 1))
    }

    pub fn add_constraint(
        &mut self,
        entries: impl IntoIterator<Item = (VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> Result<RowId> {
        let row = LpRow::new(entries, sense, rhs);
        self.push_row(row)
    }

    pub fn push_row(&mut self, row: LpRow) -> Result<RowId> {
        if !row.rhs.is_finite() || row.coeffs.iter().any(|&(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite("constraint row"));
        }
        if let Some(&(j, _)) = row.coeffs.iter().find(|&&(j, _)| j >= self.num_vars()) {
            return Err(Error::InvalidParameter(format!("unknown variable id {j}")));
        }
        self.rows.push(row);
        Ok(RowId(self.rows.len() - 1))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Writes the problem in fixed-column MPS format.
    pub fn to_mps(&self, name: &str) -> String {
        let mut out = String::new();
        let rname = |i: usize| format!("R{:07}", i);
        let cname = |j: usize| format!("C{:07}", j);
        let name: String = name.chars().filter(|c| !c.is_whitespace()).take(8).collect();
        let _ = writeln!(out, "NAME          {}", if name.is_empty() { "LP" } else { &name });
        if self.sense == Sense::Maximize {
            let _ = writeln!(out, "OBJSENSE\n    MAX");
        }
        let _ = writeln!(out, "ROWS");
        let _ = writeln!(out, " N  COST");
        for (i, r) in self.rows.iter().enumerate() {
            let t = match r.sense {
                RowSense::Le => 'L',
                RowSense::Eq => 'E',
                RowSense::Ge => 'G',
            };
            let _ = writeln!(out, " {}  {}", t, rname(i));
        }
        // column-major view of the rows
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_vars()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, c) in &r.coeffs {
                cols[j].push((i, c));
            }
        }
        let _ = writeln!(out, "COLUMNS");
        for (j, col) in cols.iter().enumerate() {
            if self.obj[j] != 0.0 {
                let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", cname(j), "COST", mps_num(self.obj[j]));
            }
            for &(i, c) in col {
                let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", cname(j), rname(i), mps_num(c));
            }
            if self.obj[j] == 0.0 && col.is_empty() {
                let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", cname(j), "COST", "0");
            }
        }
        let _ = writeln!(out, "RHS");
        for (i, r) in self.rows.iter().enumerate() {
            if r.rhs != 0.0 {
                let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", rname(i), mps_num(r.rhs));
            }
        }
        let _ = writeln!(out, "BOUNDS");
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            let c = cname(j);
            if l == u {
                let _ = writeln!(out, " FX {:<8}  {:<8}  {:>12}", "BND", c, mps_num(l));
                continue;
            }
            match (l.is_finite(), u.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " FR {:<8}  {:<8}", "BND", c);
                }
                (false, true) => {
                    let _ = writeln!(out, " MI {:<8}  {:<8}", "BND", c);
                    let _ = writeln!(out, " UP {:<8}  {:<8}  {:>12}", "BND", c, mps_num(u));
                }
                (true, fin_u) => {
                    if l != 0.0 {
                        let _ = writeln!(out, " LO {:<8}  {:<8}  {:>12}", "BND", c, mps_num(l));
                    }
                    if fin_u {
                        let _ = writeln!(out, " UP {:<8}  {:<8}  {:>12}", "BND", c, mps_num(u));
                    }
                }
            }
        }
        let _ = writeln!(out, "ENDATA");
        out
    }
}

fn mps_num(v: f64) -> String {
    let s = format!("{}", v);
    if s.len() <= 12 {
        s
    } else {
        format!("{:.5e}", v)
    }
}
