use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{truncation_domain, Grid};
use crate::measures::Interval;

/// Radius and martingale slack for a compact grid of resolution `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub eps_eff: f64,
    pub delta_eff: f64,
}

/// `(ε + l√d/N, l/N)`.
pub fn schedule_params(epsilon: f64, grid: &Grid) -> Schedule {
    let n = grid.resolution() as f64;
    let l = grid.max_length();
    Schedule {
        eps_eff: epsilon + l * (grid.dims() as f64).sqrt() / n,
        delta_eff: l / n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoncompactSchedule {
    pub eps_eff: f64,
    pub tau_eff: f64,
    pub domain: Vec<Interval>,
}

/// With `C = c'√(log(1/δ))`: `(ε + 2d^{3/2}C/N, 2dC/N)` on the truncation domain `Λ^δ`.
pub fn schedule_params_noncompact(
    epsilon: f64,
    delta: f64,
    c_prime: f64,
    dims: usize,
    resolution: usize,
) -> Result<NoncompactSchedule> {
    if resolution == 0 {
        return Err(Error::InvalidParameter("grid resolution must be at least 1".into()));
    }
    let domain = truncation_domain(dims, delta, c_prime)?;
    let c = c_prime * (1.0 / delta).ln().sqrt();
    let d = dims as f64;
    let n = resolution as f64;
    Ok(NoncompactSchedule {
        eps_eff: epsilon + 2.0 * d.powf(1.5) * c / n,
        tau_eff: 2.0 * d * c / n,
        domain,
    })
}

/// Subtracts the coordinate-one sample mean from every coordinate. Returns the
/// shifted samples and the shift that was subtracted.
pub fn preprocess_mean_zero(samples: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
    let first = samples.first().filter(|s| !s.is_empty()).ok_or(Error::Empty("samples"))?;
    if samples.iter().any(Vec::is_empty) {
        return Err(Error::Empty("samples"));
    }
    let shift = first.iter().sum::<f64>() / first.len() as f64;
    let shifted = samples.iter().map(|s| s.iter().map(|x| x - shift).collect()).collect();
    Ok((shifted, shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn compact_schedule_examples() {
        let iv = Interval::new(0.0, 2.0).unwrap();
        let g = build_grid(vec![iv; 4], 10).unwrap();
        let s = schedule_params(0.1, &g);
        assert!((s.eps_eff - 0.5).abs() < 1e-15 && (s.delta_eff - 0.2).abs() < 1e-15);
        let g = build_grid(vec![Interval::new(0.0, 1.0).unwrap()], 1).unwrap();
        assert_eq!(schedule_params(0.0, &g), Schedule { eps_eff: 1.0, delta_eff: 1.0 });
        let g = build_grid(vec![iv; 2], 1_000_000).unwrap();
        let s = schedule_params(0.3, &g);
        assert!((s.eps_eff - 0.3).abs() < 1e-5 && s.delta_eff < 1e-5);
    }

    #[test]
    fn noncompact_schedule_examples() {
        let e = std::f64::consts::E;
        let s = schedule_params_noncompact(0.0, 1.0 / e, 1.0, 1, 2).unwrap();
        assert!((s.eps_eff - 1.0).abs() < 1e-14 && (s.tau_eff - 1.0).abs() < 1e-14);
        assert!((s.domain[0].hi - 1.0).abs() < 1e-14);
        let s = schedule_params_noncompact(0.25, 1.0 / e, 1.0, 4, 8).unwrap();
        assert!((s.eps_eff - 2.25).abs() < 1e-13 && (s.tau_eff - 1.0).abs() < 1e-14);
        let s = schedule_params_noncompact(0.25, 0.1, 1.0, 2, 10_000_000).unwrap();
        assert!((s.eps_eff - 0.25).abs() < 1e-6 && s.tau_eff < 1e-6);
        assert!(schedule_params_noncompact(0.0, 1.5, 1.0, 1, 2).is_err());
    }

    #[test]
    fn mean_zero_shift() {
        let (s, shift) = preprocess_mean_zero(&[vec![2.0, 4.0], vec![0.0, 6.0]]).unwrap();
        assert_eq!(shift, 3.0);
        assert_eq!(s, vec![vec![-1.0, 1.0], vec![-3.0, 3.0]]);
        let (s, shift) = preprocess_mean_zero(&[vec![-1.0, 1.0], vec![5.0]]).unwrap();
        assert_eq!(shift, 0.0);
        assert_eq!(s, vec![vec![-1.0, 1.0], vec![5.0]]);
        // paths (1,0) and (1,2)
        let (s, _) = preprocess_mean_zero(&[vec![1.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(s, vec![vec![0.0, 0.0], vec![-1.0, 1.0]]);
        assert!(preprocess_mean_zero(&[]).is_err());
    }
}
