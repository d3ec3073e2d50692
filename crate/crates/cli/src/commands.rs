use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use drmot::drmot::{solve_drmot, solve_mot_exact};
use drmot::experiment::{
    run_convergence_grid, run_convergence_n, run_truncation, GridRateConfig, SampleRateConfig, TruncationConfig,
};
use drmot::grid::{build_grid, project_martingale, verify_delta_martingale};
use drmot::joint::{joint_wasserstein1, JointMeasure};
use drmot::measures::{convex_order_leq, wasserstein1};
use serde_json::{json, Value};

use crate::config::{intervals, load_measure, read_toml, ExperimentConfig, SolveConfig};
use crate::error::CliError;

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn print_json(v: &Value) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Writes `csv` to `output` and the summary to stdout, or both to the
/// terminal with the CSV on stdout and the summary on stderr.
fn emit(csv: &[u8], summary: &Value, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(p) => {
            fs::write(p, csv)?;
            print_json(summary)
        }
        None => {
            io::stdout().lock().write_all(csv)?;
            let mut err = io::stderr().lock();
            serde_json::to_writer_pretty(&mut err, summary)?;
            writeln!(err)?;
            Ok(())
        }
    }
}

/// Prepends an `epsilon` column to each record of a report CSV.
fn with_epsilon(
    out: &mut csv::Writer<Vec<u8>>,
    epsilon: f64,
    report: &[u8],
    header: bool,
) -> Result<(), CliError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(report);
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if i == 0 && !header {
            continue;
        }
        let first = if i == 0 { "epsilon".to_string() } else { format!("{epsilon:?}") };
        out.write_record(std::iter::once(first.as_str()).chain(rec.iter()))?;
    }
    Ok(())
}

pub fn solve(config: &Path, primal: Option<&Path>) -> Result<(), CliError> {
    let cfg: SolveConfig = read_toml(config)?;
    let prob = cfg.problem(base_dir(config))?;
    let opts = cfg.solver.build()?;
    let r = solve_drmot(&prob, &opts)?;
    if let Some(p) = primal {
        r.primal.write_csv(File::create(p)?)?;
    }
    print_json(&json!({
        "value": r.value,
        "epsilon": prob.epsilon,
        "delta": prob.delta,
        "verified": r.verification.passes(r.value),
        "verification": r.verification,
        "coupling_report": r.coupling_report,
        "transport_cost": r.transport_cost,
        "stats": r.stats,
        "certificate": { "gamma": r.certificate.gamma, "eta": r.certificate.eta },
    }))
}

pub fn mot(config: &Path) -> Result<(), CliError> {
    let cfg: SolveConfig = read_toml(config)?;
    let marg = cfg.marginals(base_dir(config))?;
    let payoff = cfg.payoff.build(marg.dims())?;
    let value = solve_mot_exact(&marg, &payoff)?;
    print_json(&json!({ "value": value }))
}

pub fn wasserstein(a: &Path, b: &Path) -> Result<(), CliError> {
    let (a, b) = (load_measure(a)?, load_measure(b)?);
    print_json(&json!({ "w1": wasserstein1(&a, &b) }))
}

pub fn convex_order(files: &[PathBuf]) -> Result<(), CliError> {
    if files.len() < 2 {
        return Err(CliError::Config("convex-order needs at least two measures".into()));
    }
    let ms = files.iter().map(|f| load_measure(f)).collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<bool> = ms.windows(2).map(|w| convex_order_leq(&w[0], &w[1])).collect();
    print_json(&json!({ "ordered": pairs.iter().all(|&b| b), "pairs": pairs }))
}

pub fn project_grid(joint: &Path, resolution: usize, raw: &[[f64; 2]], output: Option<&Path>) -> Result<(), CliError> {
    let text = fs::read(joint)?;
    let pi = JointMeasure::read_csv(text.as_slice()).map_err(|e| CliError::Config(format!("{}: {e}", joint.display())))?;
    if raw.len() != pi.dims() {
        return Err(CliError::Config(format!("expected {} intervals, got {}", pi.dims(), raw.len())));
    }
    let grid = build_grid(intervals(raw)?, resolution).map_err(CliError::config)?;
    let projected = project_martingale(&pi, &grid).map_err(|e| match e {
        drmot::Error::NotMartingale(_) => CliError::config(e),
        other => other.into(),
    })?;
    let slack = grid.max_length() / resolution as f64;
    let mut csv = Vec::new();
    projected.write_csv(&mut csv)?;
    let summary = json!({
        "w1": joint_wasserstein1(&pi, &projected)?,
        "w1_bound": slack * (pi.dims() as f64).sqrt(),
        "delta": slack,
        "delta_martingale": verify_delta_martingale(&projected, slack),
    });
    emit(&csv, &summary, output)
}

fn load_experiment(config: &Path) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = read_toml(config)?;
    cfg.validate()?;
    Ok(cfg)
}

fn output_path(cfg: &ExperimentConfig, config: &Path, flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf).or_else(|| cfg.experiment.output.as_ref().map(|p| base_dir(config).join(p)))
}

pub fn converge_n(config: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_experiment(config)?;
    let e = &cfg.experiment;
    let largest = *e.sample_sizes.last().expect("validated non-empty");
    let reference_n = e.reference_n.unwrap_or(4 * largest);
    let resolution = *e.resolutions.iter().max().expect("validated non-empty");
    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut runs = Vec::new();
    for (k, eps) in e.epsilon.values().into_iter().enumerate() {
        let report = run_convergence_n(&SampleRateConfig {
            setup: cfg.setup(eps)?,
            sample_sizes: e.sample_sizes.clone(),
            seeds: e.seeds.clone(),
            reference_n,
            reference_seed: e.reference_seed,
            resolution,
            delta: e.delta,
        })?;
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        with_epsilon(&mut csv, eps, &buf, k == 0)?;
        runs.push(json!({
            "epsilon": eps,
            "reference": report.reference,
            "mean_gaps": report.mean_gaps,
            "slope": report.slope,
        }));
    }
    let summary = json!({ "command": "converge-n", "resolution": resolution, "reference_n": reference_n, "runs": runs });
    emit(&csv.into_inner().map_err(|e| e.into_error())?, &summary, output_path(&cfg, config, output).as_deref())
}

pub fn converge_grid(config: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_experiment(config)?;
    let e = &cfg.experiment;
    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut runs = Vec::new();
    for (k, eps) in e.epsilon.values().into_iter().enumerate() {
        let report = run_convergence_grid(&GridRateConfig {
            setup: cfg.setup(eps)?,
            n: e.sample_sizes[0],
            seed: e.seeds[0],
            resolutions: e.resolutions.clone(),
        })?;
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        with_epsilon(&mut csv, eps, &buf, k == 0)?;
        runs.push(json!({
            "epsilon": eps,
            "gaps": report.gaps,
            "ratios": report.ratios,
            "mean_ratio": report.mean_ratio,
        }));
    }
    let summary = json!({ "command": "converge-grid", "n": e.sample_sizes[0], "seed": e.seeds[0], "runs": runs });
    emit(&csv.into_inner().map_err(|e| e.into_error())?, &summary, output_path(&cfg, config, output).as_deref())
}

pub fn truncate(config: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_experiment(config)?;
    let e = &cfg.experiment;
    let levels = match &e.levels {
        Some(l) if !l.is_empty() => l.clone(),
        _ => return Err(CliError::Config("truncate needs a non-empty `levels` list".into())),
    };
    if levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(CliError::Config("truncation levels must lie in (0, 1)".into()));
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut runs = Vec::new();
    for (k, eps) in e.epsilon.values().into_iter().enumerate() {
        let report = run_truncation(&TruncationConfig {
            setup: cfg.setup(eps)?,
            n: e.sample_sizes[0],
            seed: e.seeds[0],
            levels: levels.clone(),
            resolution: e.resolutions[0],
            scale_resolution: e.scale_resolution,
            c_prime: e.c_prime,
        })?;
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        with_epsilon(&mut csv, eps, &buf, k == 0)?;
        runs.push(json!({
            "epsilon": eps,
            "shift": report.shift,
            "c_prime": report.c_prime,
            "last_relative_change": report.last_relative_change,
        }));
    }
    let summary = json!({ "command": "truncate", "n": e.sample_sizes[0], "seed": e.seeds[0], "runs": runs });
    emit(&csv.into_inner().map_err(|e| e.into_error())?, &summary, output_path(&cfg, config, output).as_deref())
}
