//! Seeded sample families and convergence experiments.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drmot::{
    preprocess_mean_zero, schedule_params, schedule_params_noncompact, solve_drmot, DrmotOptions, DrmotProblem,
};
use crate::error::{Error, Result};
use crate::grid::build_grid;
use crate::measures::{format_f64, DiscreteMeasure, Interval, MarginalSequence};
use crate::payoffs::Payoff;

/// Truncation level of each Gaussian increment, in standard deviations.
pub const GAUSSIAN_TRUNCATION: f64 = 4.0;

/// Families whose marginals increase in convex order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `X_i ~ Uniform[-i s, i s]`.
    UniformSpread,
    /// `X_i = s Σ_{k <= i} ξ_k` with Rademacher `ξ_k`.
    BinomialWalk,
    /// Partial sums of centered Gaussians with deviation `s`, each truncated at `±4s`.
    TruncatedGaussianWalk,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::UniformSpread => "uniform_spread",
            Family::BinomialWalk => "binomial_walk",
            Family::TruncatedGaussianWalk => "truncated_gaussian_walk",
        }
    }

    /// Nested intervals containing every possible sample of coordinate `i`.
    pub fn supports(&self, dims: usize, scale: f64) -> Result<Vec<Interval>> {
        let unit = match self {
            Family::UniformSpread | Family::BinomialWalk => scale,
            Family::TruncatedGaussianWalk => GAUSSIAN_TRUNCATION * scale,
        };
        (1..=dims).map(|i| Interval::new(-(i as f64) * unit, i as f64 * unit)).collect()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_spread" => Ok(Family::UniformSpread),
            "binomial_walk" => Ok(Family::BinomialWalk),
            "truncated_gaussian_walk" => Ok(Family::TruncatedGaussianWalk),
            other => Err(Error::Unknown { kind: "family", name: other.to_string() }),
        }
    }
}

/// `d` lists of `n` samples. Coordinate `i` draws from its own ChaCha8 stream,
/// so coordinates are independent and each is reproducible on its own.
pub fn sample_family(family: Family, dims: usize, n: usize, seed: u64, scale: f64) -> Result<Vec<Vec<f64>>> {
    if dims == 0 || n == 0 {
        return Err(Error::Empty("sample request"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale {scale} must be positive")));
    }
    (0..dims)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let steps = i + 1;
            let out = match family {
                Family::UniformSpread => {
                    let h = steps as f64 * scale;
                    let u = Uniform::new_inclusive(-h, h).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    (0..n).map(|_| u.sample(&mut rng)).collect()
                }
                Family::BinomialWalk => (0..n)
                    .map(|_| (0..steps).map(|_| if rng.random::<bool>() { scale } else { -scale }).sum())
                    .collect(),
                Family::TruncatedGaussianWalk => {
                    let g = Normal::new(0.0, scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    let cut = GAUSSIAN_TRUNCATION * scale;
                    (0..n)
                        .map(|_| {
                            (0..steps)
                                .map(|_| loop {
                                    let z: f64 = g.sample(&mut rng);
                                    if z.abs() <= cut {
                                        break z;
                                    }
                                })
                                .sum()
                        })
                        .collect()
                }
            };
            Ok(out)
        })
        .collect()
}

/// Empirical marginals of per-coordinate samples with the given supports.
pub fn empirical_marginals(samples: &[Vec<f64>], supports: Vec<Interval>) -> Result<MarginalSequence> {
    let measures = samples.iter().map(|s| DiscreteMeasure::empirical(s)).collect::<Result<Vec<_>>>()?;
    MarginalSequence::new(measures, supports)
}

/// Least-squares slope of `log y` against `log x`.
pub fn rate_estimate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidParameter(format!("rate fit needs positive coordinates, got ({x}, {y})")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct x values".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Settings shared by both convergence experiments.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub family: Family,
    pub dims: usize,
    pub scale: f64,
    pub payoff: Payoff,
    pub epsilon: f64,
    pub options: DrmotOptions,
}

impl ExperimentSetup {
    /// Solves one instance; `delta = None` applies the grid schedule to `epsilon`.
    fn solve(&self, n: usize, seed: u64, resolution: usize, delta: Option<f64>) -> Cell {
        let run = || -> Result<(f64, f64, f64, bool)> {
            let supports = self.family.supports(self.dims, self.scale)?;
            let samples = sample_family(self.family, self.dims, n, seed, self.scale)?;
            let marg = empirical_marginals(&samples, supports.clone())?;
            let grid = build_grid(supports, resolution)?;
            let (eps, del) = match delta {
                Some(d) => (self.epsilon, d),
                None => {
                    let s = schedule_params(self.epsilon, &grid);
                    (s.eps_eff, s.delta_eff)
                }
            };
            let prob = DrmotProblem::new(marg, grid, eps, del, self.payoff.clone())?;
            let r = solve_drmot(&prob, &self.options)?;
            Ok((r.value, eps, del, r.verification.passes(r.value)))
        };
        match run() {
            Ok((value, eps, del, verified)) => Cell { status: "ok".into(), value: Some(value), eps, delta: del, verified },
            Err(e) => Cell { status: status_of(&e), value: None, eps: f64::NAN, delta: f64::NAN, verified: false },
        }
    }
}

struct Cell {
    status: String,
    value: Option<f64>,
    eps: f64,
    delta: f64,
    verified: bool,
}

fn status_of(e: &Error) -> String {
    match e {
        Error::InfeasibleRadius { .. } | Error::NotConvexOrdered => "infeasible".into(),
        Error::Unbounded => "unbounded".into(),
        Error::IterationLimit => "iteration_limit".into(),
        _ => "error".into(),
    }
}

fn opt_field(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), format_f64)
}

#[derive(Debug, Clone)]
pub struct SampleRateConfig {
    pub setup: ExperimentSetup,
    pub sample_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub reference_n: usize,
    pub reference_seed: u64,
    pub resolution: usize,
    /// Martingale slack; `None` applies the grid schedule to `epsilon`.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRateRow {
    pub n: usize,
    pub seed: u64,
    pub status: String,
    pub value: Option<f64>,
    pub gap: Option<f64>,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRateReport {
    pub reference: f64,
    pub rows: Vec<SampleRateRow>,
    /// Mean absolute gap per sample size, over the seeds that solved.
    pub mean_gaps: Vec<(usize, f64)>,
    /// Log-log slope of the mean gaps; `None` when undefined.
    pub slope: Option<f64>,
}

impl SampleRateReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "seed", "status", "value", "gap", "verified"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.seed.to_string(),
                r.status.clone(),
                opt_field(r.value),
                opt_field(r.gap),
                r.verified.to_string(),
            ])?;
        }
        w.write_record(["summary", "", "slope", &opt_field(self.slope), "", ""])?;
        w.flush()?;
        Ok(())
    }
}

/// Mean absolute gap per `n` and the log-log slope of those means. Rows
/// without a gap are skipped; the slope is `None` if any mean is not positive
/// or fewer than three sizes remain.
pub fn summarize_gaps(rows: &[SampleRateRow]) -> (Vec<(usize, f64)>, Option<f64>) {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let means: Vec<(usize, f64)> = sizes
        .into_iter()
        .filter_map(|n| {
            let gaps: Vec<f64> = rows.iter().filter(|r| r.n == n).filter_map(|r| r.gap).collect();
            (!gaps.is_empty()).then(|| (n, gaps.iter().sum::<f64>() / gaps.len() as f64))
        })
        .collect();
    let pts: Vec<(f64, f64)> = means.iter().map(|&(n, g)| (n as f64, g)).collect();
    let slope = rate_estimate(&pts).ok();
    (means, slope)
}

/// Gap between DRMOT values at growing sample sizes and a reference at a much
/// larger sample size, on a fixed grid.
pub fn run_convergence_n(cfg: &SampleRateConfig) -> Result<SampleRateReport> {
    if cfg.sample_sizes.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::Empty("sample sizes and seeds"));
    }
    let reference = cfg.setup.solve(cfg.reference_n, cfg.reference_seed, cfg.resolution, cfg.delta);
    let reference = reference
        .value
        .ok_or_else(|| Error::InvalidParameter(format!("reference instance failed: {}", reference.status)))?;
    let cells: Vec<(usize, u64)> =
        cfg.sample_sizes.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect();
    let rows: Vec<SampleRateRow> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let c = cfg.setup.solve(n, seed, cfg.resolution, cfg.delta);
            SampleRateRow {
                n,
                seed,
                status: c.status,
                value: c.value,
                gap: c.value.map(|v| (v - reference).abs()),
                verified: c.verified,
            }
        })
        .collect();
    let (mean_gaps, slope) = summarize_gaps(&rows);
    Ok(SampleRateReport { reference, rows, mean_gaps, slope })
}

#[derive(Debug, Clone)]
pub struct GridRateConfig {
    pub setup: ExperimentSetup,
    pub n: usize,
    pub seed: u64,
    /// Grid resolutions, typically a doubling ladder.
    pub resolutions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRateRow {
    pub resolution: usize,
    pub eps_eff: f64,
    pub delta_eff: f64,
    pub status: String,
    pub value: Option<f64>,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRateReport {
    pub rows: Vec<GridRateRow>,
    /// `|v_{k+1} - v_k|` between consecutive resolutions.
    pub gaps: Vec<Option<f64>>,
    /// `g_{k+1} / g_k`, undefined when `g_k` is zero.
    pub ratios: Vec<Option<f64>>,
    pub mean_ratio: Option<f64>,
}

impl GridRateReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["N", "eps_eff", "delta_eff", "status", "value", "gap_to_next", "ratio", "verified"])?;
        for (i, r) in self.rows.iter().enumerate() {
            w.write_record([
                r.resolution.to_string(),
                format_f64(r.eps_eff),
                format_f64(r.delta_eff),
                r.status.clone(),
                opt_field(r.value),
                opt_field(self.gaps.get(i).copied().flatten()),
                opt_field(i.checked_sub(1).and_then(|k| self.ratios.get(k).copied().flatten())),
                r.verified.to_string(),
            ])?;
        }
        w.write_record(["summary", "", "", "mean_ratio", &opt_field(self.mean_ratio), "", "", ""])?;
        w.flush()?;
        Ok(())
    }
}

/// Successive gaps and their ratios from a value ladder.
pub fn gap_ratios(values: &[Option<f64>]) -> (Vec<Option<f64>>, Vec<Option<f64>>, Option<f64>) {
    let gaps: Vec<Option<f64>> = values
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some((b - a).abs()),
            _ => None,
        })
        .collect();
    let ratios: Vec<Option<f64>> = gaps
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) if a > 0.0 => Some(b / a),
            _ => None,
        })
        .collect();
    let defined: Vec<f64> = ratios.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    (gaps, ratios, mean)
}

/// DRMOT values on a resolution ladder with the grid schedule applied at each level.
pub fn run_convergence_grid(cfg: &GridRateConfig) -> Result<GridRateReport> {
    if cfg.resolutions.is_empty() {
        return Err(Error::Empty("grid resolutions"));
    }
    let rows: Vec<GridRateRow> = cfg
        .resolutions
        .par_iter()
        .map(|&res| {
            let c = cfg.setup.solve(cfg.n, cfg.seed, res, None);
            GridRateRow { resolution: res, eps_eff: c.eps, delta_eff: c.delta, status: c.status, value: c.value, verified: c.verified }
        })
        .collect();
    let values: Vec<Option<f64>> = rows.iter().map(|r| r.value).collect();
    let (gaps, ratios, mean_ratio) = gap_ratios(&values);
    Ok(GridRateReport { rows, gaps, ratios, mean_ratio })
}

#[derive(Debug, Clone)]
pub struct TruncationConfig {
    pub setup: ExperimentSetup,
    pub n: usize,
    pub seed: u64,
    /// Truncation levels `δ ∈ (0, 1)`.
    pub levels: Vec<f64>,
    /// Grid resolution at `δ = 1/e`.
    pub resolution: usize,
    /// Scale the resolution with `√log(1/δ)` so that the radius and slack
    /// inflations stay fixed along the ladder.
    pub scale_resolution: bool,
    /// `None` uses `max_i max_j |x_ij| / i` of the centred samples.
    pub c_prime: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub level: f64,
    pub resolution: usize,
    pub eps_eff: f64,
    pub tau_eff: f64,
    /// Half-width of the last coordinate's truncation interval.
    pub half_width: f64,
    pub status: String,
    pub value: Option<f64>,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    /// Coordinate-one sample mean removed before solving.
    pub shift: f64,
    pub c_prime: f64,
    pub rows: Vec<TruncationRow>,
    /// `|v_last - v_prev| / |v_prev|` for the last two levels.
    pub last_relative_change: Option<f64>,
}

impl TruncationReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["delta", "N", "eps_eff", "tau_eff", "half_width", "status", "value", "verified"])?;
        for r in &self.rows {
            w.write_record([
                format_f64(r.level),
                r.resolution.to_string(),
                format_f64(r.eps_eff),
                format_f64(r.tau_eff),
                format_f64(r.half_width),
                r.status.clone(),
                opt_field(r.value),
                r.verified.to_string(),
            ])?;
        }
        w.write_record(["summary", "", "", "", "last_relative_change", "", &opt_field(self.last_relative_change), ""])?;
        w.flush()?;
        Ok(())
    }
}

/// Non-compact pipeline: centre the samples, truncate to `Λ^δ` for each level,
/// and solve the mean-zero problem with the non-compact schedule. Values are
/// reported for the original (uncentred) payoff.
pub fn run_truncation(cfg: &TruncationConfig) -> Result<TruncationReport> {
    if cfg.levels.is_empty() {
        return Err(Error::Empty("truncation levels"));
    }
    let s = &cfg.setup;
    let samples = sample_family(s.family, s.dims, cfg.n, cfg.seed, s.scale)?;
    let (centred, shift) = preprocess_mean_zero(&samples)?;
    let c_prime = match cfg.c_prime {
        Some(c) => c,
        None => centred
            .iter()
            .enumerate()
            .map(|(i, xs)| xs.iter().fold(0.0f64, |a, x| a.max(x.abs())) / (i + 1) as f64)
            .fold(0.0, f64::max),
    };
    let payoff = s.payoff.shifted(shift)?;
    let rows: Vec<TruncationRow> = cfg
        .levels
        .par_iter()
        .map(|&level| {
            let resolution = if cfg.scale_resolution && level > 0.0 && level < 1.0 {
                (cfg.resolution as f64 * (1.0 / level).ln().sqrt()).round().max(1.0) as usize
            } else {
                cfg.resolution
            };
            let mut row = TruncationRow {
                level,
                resolution,
                eps_eff: f64::NAN,
                tau_eff: f64::NAN,
                half_width: f64::NAN,
                status: "ok".into(),
                value: None,
                verified: false,
            };
            let run = |row: &mut TruncationRow| -> Result<()> {
                let sched = schedule_params_noncompact(s.epsilon, level, c_prime, s.dims, resolution)?;
                row.eps_eff = sched.eps_eff;
                row.tau_eff = sched.tau_eff;
                row.half_width = sched.domain.last().map_or(0.0, |iv| iv.hi);
                let marg = empirical_marginals(&centred, sched.domain.clone())?;
                let grid = build_grid(sched.domain, resolution)?;
                let prob = DrmotProblem::new(marg, grid, sched.eps_eff, sched.tau_eff, payoff.clone())?
                    .with_mean_zero(true);
                let r = solve_drmot(&prob, &s.options)?;
                row.value = Some(r.value);
                row.verified = r.verification.passes(r.value);
                Ok(())
            };
            if let Err(e) = run(&mut row) {
                row.status = status_of(&e);
            }
            row
        })
        .collect();
    let last_relative_change = match rows.as_slice() {
        [.., a, b] => match (a.value, b.value) {
            (Some(a), Some(b)) if a != 0.0 => Some((b - a).abs() / a.abs()),
            _ => None,
        },
        _ => None,
    };
    Ok(TruncationReport { shift, c_prime, rows, last_relative_change })
}
