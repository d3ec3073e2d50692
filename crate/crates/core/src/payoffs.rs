//! Lipschitz payoff functions `f: R^d -> R`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::Interval;

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// One term `c_i(x_i, x_{i+1})` of a two-period sum.
pub type PairTerm = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A payoff together with its l1-Lipschitz constant and an optional sup bound.
#[derive(Clone)]
pub struct Payoff {
    name: String,
    dims: usize,
    lipschitz_l1: f64,
    declared_bound: Option<f64>,
    evaluator: Evaluator,
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Payoff")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("lipschitz_l1", &self.lipschitz_l1)
            .field("declared_bound", &self.declared_bound)
            .finish()
    }
}

impl Payoff {
    pub fn new(
        name: impl Into<String>,
        dims: usize,
        lipschitz_l1: f64,
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidParameter("payoff dimension must be at least 1".into()));
        }
        if !lipschitz_l1.is_finite() || lipschitz_l1 < 0.0 {
            return Err(Error::InvalidParameter(format!("Lipschitz constant {lipschitz_l1}")));
        }
        Ok(Payoff {
            name: name.into(),
            dims,
            lipschitz_l1,
            declared_bound: None,
            evaluator: Arc::new(evaluator),
        })
    }

    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !bound.is_finite() || bound < 0.0 {
            return Err(Error::InvalidParameter(format!("payoff bound {bound}")));
        }
        self.declared_bound = Some(bound);
        Ok(self)
    }

    /// `|x_d - x_1|`.
    pub fn spread(dims: usize) -> Result<Self> {
        Self::new("spread", dims, 2.0, |x: &[f64]| (x[x.len() - 1] - x[0]).abs())
    }

    /// Asian call `(mean(x) - K)_+`.
    pub fn asian_call(dims: usize, strike: f64) -> Result<Self> {
        if !strike.is_finite() {
            return Err(Error::NonFinite("strike"));
        }
        Self::new("asian", dims, 1.0, move |x: &[f64]| {
            (x.iter().sum::<f64>() / x.len() as f64 - strike).max(0.0)
        })
    }

    /// Lookback `max_i x_i - x_d`.
    pub fn lookback(dims: usize) -> Result<Self> {
        Self::new("lookback", dims, 2.0, |x: &[f64]| {
            x.iter().copied().fold(f64::NEG_INFINITY, f64::max) - x[x.len() - 1]
        })
    }

    pub fn constant(dims: usize, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::NonFinite("constant payoff"));
        }
        Self::new("constant", dims, 0.0, move |_: &[f64]| c)
    }

    /// The coordinate `x_i` (0-based).
    pub fn coordinate(dims: usize, i: usize) -> Result<Self> {
        if i >= dims {
            return Err(Error::Dimension { expected: dims, got: i + 1 });
        }
        Self::new(format!("coordinate{}", i + 1), dims, 1.0, move |x: &[f64]| x[i])
    }

    /// `Σ_i c_i(x_i, x_{i+1})`; `lipschitz_l1` must bound the whole sum.
    pub fn two_period_sum(dims: usize, terms: Vec<PairTerm>, lipschitz_l1: f64) -> Result<Self> {
        if dims < 2 || terms.len() != dims - 1 {
            return Err(Error::LengthMismatch {
                what: "two-period terms",
                left: terms.len(),
                right: dims.saturating_sub(1),
            });
        }
        Self::new("two_period_sum", dims, lipschitz_l1, move |x: &[f64]| {
            terms.iter().enumerate().map(|(i, c)| c(x[i], x[i + 1])).sum()
        })
    }

    /// `x ↦ f(x + shift·1)`: the payoff seen from paths translated by `-shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::NonFinite("payoff shift"));
        }
        let inner = Arc::clone(&self.evaluator);
        let evaluator: Evaluator = Arc::new(move |x: &[f64]| {
            let y: Vec<f64> = x.iter().map(|v| v + shift).collect();
            inner(&y)
        });
        Ok(Payoff { evaluator, ..self.clone() })
    }

    /// Looks up a built-in family by name.
    pub fn by_name(name: &str, dims: usize, strike: f64, constant: f64) -> Result<Self> {
        match name {
            "spread" => Self::spread(dims),
            "asian" | "asian_call" => Self::asian_call(dims, strike),
            "lookback" => Self::lookback(dims),
            "constant" => Self::constant(dims, constant),
            "zero" => Self::constant(dims, 0.0),
            other => Err(Error::Unknown { kind: "payoff", name: other.to_string() }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn lipschitz_l1(&self) -> f64 {
        self.lipschitz_l1
    }

    pub fn declared_bound(&self) -> Option<f64> {
        self.declared_bound
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dims {
            return Err(Error::Dimension { expected: self.dims, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("payoff argument"));
        }
        let v = (self.evaluator)(x);
        if !v.is_finite() {
            return Err(Error::NonFinite("payoff value"));
        }
        Ok(v)
    }

    /// A certified bound on `|f|` over the box: the declared bound if any,
    /// otherwise the linear-growth bound `|f(0)| + L Σ_i (half_width_i + |center_i|)`.
    pub fn sup_bound(&self, domain: &[Interval]) -> Result<f64> {
        if let Some(b) = self.declared_bound {
            return Ok(b);
        }
        if domain.len() != self.dims {
            return Err(Error::Dimension { expected: self.dims, got: domain.len() });
        }
        if domain.iter().any(|iv| !iv.lo.is_finite() || !iv.hi.is_finite()) {
            return Err(Error::UnboundedPayoff);
        }
        let f0 = self.eval(&vec![0.0; self.dims])?.abs();
        let reach: f64 = domain.iter().map(|iv| 0.5 * iv.len() + iv.center().abs()).sum();
        Ok(f0 + self.lipschitz_l1 * reach)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Payoff::spread(2).unwrap().eval(&[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(Payoff::asian_call(2, 0.0).unwrap().eval(&[-1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(Payoff::lookback(3).unwrap().eval(&[0.0, 2.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn eval_errors() {
        let p = Payoff::spread(2).unwrap();
        assert!(matches!(p.eval(&[0.0]), Err(Error::Dimension { .. })));
        assert!(p.eval(&[f64::NAN, 0.0]).is_err());
        let bad = Payoff::new("bad", 1, 1.0, |x: &[f64]| 1.0 / x[0]).unwrap();
        assert!(matches!(bad.eval(&[0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sup_bound_examples() {
        let s = Payoff::spread(2).unwrap();
        let b = s.sup_bound(&[iv(0.0, 1.0), iv(0.0, 1.0)]).unwrap();
        assert!(b >= 1.0 && b.is_finite());
        assert_eq!(Payoff::constant(3, -2.5).unwrap().sup_bound(&[iv(0.0, 1.0); 3]).unwrap(), 2.5);
        let x1 = Payoff::coordinate(1, 0).unwrap();
        assert_eq!(x1.sup_bound(&[iv(-3.0, 3.0)]).unwrap(), 3.0);
        assert_eq!(x1.clone().with_bound(3.0).unwrap().sup_bound(&[]).unwrap(), 3.0);
        assert!(Payoff::spread(2).unwrap().sup_bound(&[iv(0.0, 1.0)]).is_err());
    }

    #[test]
    fn two_period_sum_evaluates_each_pair() {
        let terms: Vec<PairTerm> = vec![Arc::new(|a, b| a * 0.5 + b), Arc::new(|a, b| (b - a).sin())];
        let p = Payoff::two_period_sum(3, terms, 3.0).unwrap();
        let v = p.eval(&[1.0, 2.0, 2.0]).unwrap();
        assert!((v - 2.5).abs() < 1e-15);
        assert!(Payoff::two_period_sum(3, vec![], 1.0).is_err());
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(Payoff::by_name("digital", 2, 0.0, 0.0), Err(Error::Unknown { .. })));
    }
}
