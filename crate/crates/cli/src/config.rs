use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use drmot::drmot::{schedule_params, DrmotOptions, DrmotProblem, RowMode};
use drmot::experiment::{ExperimentSetup, Family};
use drmot::grid::build_grid;
use drmot::measures::{parse_samples, DiscreteMeasure, Interval, MarginalSequence};
use drmot::payoffs::Payoff;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSpec {
    pub name: String,
    #[serde(default)]
    pub strike: f64,
    #[serde(default)]
    pub constant: f64,
    /// Declared bound on `|f|`, used instead of the linear-growth bound.
    pub bound: Option<f64>,
}

impl PayoffSpec {
    pub fn build(&self, dims: usize) -> Result<Payoff, CliError> {
        let p = Payoff::by_name(&self.name, dims, self.strike, self.constant).map_err(CliError::config)?;
        match self.bound {
            Some(b) => p.with_bound(b).map_err(CliError::config),
            None => Ok(p),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub mode: Option<String>,
    pub rows_per_round: Option<usize>,
    pub eager_row_limit: Option<u128>,
    pub violation_tol: Option<f64>,
    pub max_rounds: Option<usize>,
}

impl SolverSpec {
    pub fn build(&self) -> Result<DrmotOptions, CliError> {
        let mut o = DrmotOptions::default();
        if let Some(m) = &self.mode {
            o.mode = match m.as_str() {
                "auto" => RowMode::Auto,
                "eager" => RowMode::Eager,
                "lazy" => RowMode::Lazy,
                other => return Err(CliError::Config(format!("unknown solver mode `{other}`"))),
            };
        }
        if let Some(r) = self.rows_per_round {
            if r == 0 {
                return Err(CliError::Config("rows_per_round must be positive".into()));
            }
            o.rows_per_round = r;
        }
        if let Some(l) = self.eager_row_limit {
            o.eager_row_limit = l;
        }
        if let Some(t) = self.violation_tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config("violation_tol must be positive".into()));
            }
            o.lazy.violation_tol = t;
        }
        if let Some(r) = self.max_rounds {
            o.lazy.max_rounds = r;
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalSpec {
    /// Inline samples, one list per coordinate.
    pub samples: Option<Vec<Vec<f64>>>,
    /// One file per coordinate: `atom,weight` CSV (`.csv`) or whitespace-separated samples.
    pub files: Option<Vec<PathBuf>>,
    /// Nested support intervals `[lo, hi]`; defaults to each marginal's hull.
    pub supports: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub resolution: usize,
    /// Grid box; defaults to the marginal supports.
    pub intervals: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    /// Replace `(epsilon, delta)` by the grid schedule `(ε + l√d/N, l/N)`.
    #[serde(default)]
    pub schedule: bool,
    #[serde(default)]
    pub mean_zero: bool,
}

/// Config of `solve` and `mot`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub marginals: MarginalSpec,
    pub payoff: PayoffSpec,
    pub grid: Option<GridSpec>,
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn intervals(raw: &[[f64; 2]]) -> Result<Vec<Interval>, CliError> {
    raw.iter().map(|&[lo, hi]| Interval::new(lo, hi).map_err(CliError::config)).collect()
}

/// Loads a one-dimensional measure: `atom,weight` CSV for `.csv` files,
/// otherwise a list of samples.
pub fn load_measure(path: &Path) -> Result<DiscreteMeasure, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let m = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        DiscreteMeasure::read_csv(text.as_bytes())
    } else {
        parse_samples(&text).and_then(|s| DiscreteMeasure::empirical(&s))
    };
    m.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl SolveConfig {
    /// Relative file paths are resolved against `base`.
    pub fn marginals(&self, base: &Path) -> Result<MarginalSequence, CliError> {
        let m = &self.marginals;
        let measures: Vec<DiscreteMeasure> = match (&m.samples, &m.files) {
            (Some(s), None) => s
                .iter()
                .map(|xs| DiscreteMeasure::empirical(xs).map_err(CliError::config))
                .collect::<Result<_, _>>()?,
            (None, Some(f)) => f.iter().map(|p| load_measure(&base.join(p))).collect::<Result<_, _>>()?,
            _ => return Err(CliError::Config("[marginals] needs exactly one of `samples` or `files`".into())),
        };
        match &m.supports {
            Some(s) => MarginalSequence::new(measures, intervals(s)?),
            None => MarginalSequence::from_measures(measures),
        }
        .map_err(CliError::config)
    }

    pub fn problem(&self, base: &Path) -> Result<DrmotProblem, CliError> {
        let marg = self.marginals(base)?;
        let gs = self.grid.as_ref().ok_or_else(|| CliError::Config("missing [grid] section".into()))?;
        let ps = self.problem.as_ref().ok_or_else(|| CliError::Config("missing [problem] section".into()))?;
        let iv = match &gs.intervals {
            Some(raw) => intervals(raw)?,
            None => marg.supports().to_vec(),
        };
        let grid = build_grid(iv, gs.resolution).map_err(CliError::config)?;
        let (eps, delta) = if ps.schedule {
            let s = schedule_params(ps.epsilon, &grid);
            (s.eps_eff, s.delta_eff)
        } else {
            (ps.epsilon, ps.delta)
        };
        let payoff = self.payoff.build(marg.dims())?;
        Ok(DrmotProblem::new(marg, grid, eps, delta, payoff).map_err(CliError::config)?.with_mean_zero(ps.mean_zero))
    }
}

/// Config of `converge-n`, `converge-grid` and `truncate`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSpec,
    pub payoff: PayoffSpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub family: String,
    pub dims: usize,
    #[serde(default = "one")]
    pub scale: f64,
    pub epsilon: OneOrMany,
    pub sample_sizes: Vec<usize>,
    pub resolutions: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Reference sample size for `converge-n`; defaults to four times the largest size.
    pub reference_n: Option<usize>,
    #[serde(default = "reference_seed")]
    pub reference_seed: u64,
    /// Fixed martingale slack; omitted means the grid schedule is applied.
    pub delta: Option<f64>,
    /// Truncation levels for `truncate`.
    pub levels: Option<Vec<f64>>,
    pub c_prime: Option<f64>,
    #[serde(default = "yes")]
    pub scale_resolution: bool,
    pub output: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn reference_seed() -> u64 {
    u64::MAX
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let e = &self.experiment;
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if e.sample_sizes.is_empty() || e.resolutions.is_empty() || e.seeds.is_empty() || e.epsilon.values().is_empty() {
            return bad("sample_sizes, resolutions, seeds and epsilon must be non-empty");
        }
        if e.seeds.iter().collect::<HashSet<_>>().len() != e.seeds.len() {
            return bad("seeds must be distinct");
        }
        if e.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sample_sizes must be strictly increasing");
        }
        if e.sample_sizes[0] == 0 || e.resolutions.contains(&0) {
            return bad("sample sizes and resolutions must be positive");
        }
        if e.epsilon.values().iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("epsilon values must be finite and nonnegative");
        }
        if e.dims == 0 {
            return bad("dims must be positive");
        }
        Ok(())
    }

    pub fn setup(&self, epsilon: f64) -> Result<ExperimentSetup, CliError> {
        let e = &self.experiment;
        let family: Family = e.family.parse().map_err(CliError::config)?;
        Ok(ExperimentSetup {
            family,
            dims: e.dims,
            scale: e.scale,
            payoff: self.payoff.build(e.dims)?,
            epsilon,
            options: self.solver.build()?,
        })
    }
}
