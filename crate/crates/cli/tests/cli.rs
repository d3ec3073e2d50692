use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SOLVE: &str = r#"
[marginals]
samples = [[-0.5, 0.5], [-1.0, 0.0, 0.0, 1.0]]
supports = [[-1.0, 1.0], [-2.0, 2.0]]

[grid]
resolution = 4

[problem]
epsilon = 0.3
delta = 0.1

[payoff]
name = "spread"
"#;

const EXPERIMENT: &str = r#"
[experiment]
family = "uniform_spread"
dims = 2
epsilon = 0.5
sample_sizes = [8, 16]
resolutions = [2, 4]
seeds = [1, 2]
reference_n = 32

[payoff]
name = "constant"
constant = 1.5
"#;

fn drmot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drmot")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn solve_reports_verified_value_and_primal() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "solve.toml", SOLVE);
    let primal = dir.path().join("primal.csv");
    let out = drmot(&["solve", &cfg, "--primal", primal.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["verified"], Value::Bool(true));
    let text = fs::read_to_string(&primal).unwrap();
    assert!(text.starts_with("x1,x2,weight\n"));
}

#[test]
fn schedule_flag_inflates_radius_and_slack() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.toml", &SOLVE.replace("delta = 0.1", "schedule = true"));
    let v = json(&drmot(&["solve", &cfg]));
    assert!((v["delta"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["epsilon"].as_f64().unwrap() - (0.3 + 2f64.sqrt())).abs() < 1e-12);
}

#[test]
fn infeasible_radius_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let text = SOLVE.replace("epsilon = 0.3", "epsilon = 0.0").replace("delta = 0.1", "delta = 0.0");
    let text = text.replace("[-1.0, 0.0, 0.0, 1.0]", "[0.3, 0.3]");
    let cfg = write(&dir, "inf.toml", &text);
    assert_eq!(code(&drmot(&["solve", &cfg])), 2);
    assert_eq!(code(&drmot(&["mot", &cfg])), 2);
}

#[test]
fn config_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let garbage = write(&dir, "bad.toml", "not toml at all");
    assert_eq!(code(&drmot(&["solve", &garbage])), 3);
    let unknown = write(&dir, "unknown.toml", &SOLVE.replace("spread", "butterfly"));
    assert_eq!(code(&drmot(&["solve", &unknown])), 3);
    assert_eq!(code(&drmot(&["solve", "/nonexistent/config.toml"])), 3);
    let dup = write(&dir, "dup.toml", &EXPERIMENT.replace("seeds = [1, 2]", "seeds = [1, 1]"));
    assert_eq!(code(&drmot(&["converge-n", &dup])), 3);
    let order = write(&dir, "order.toml", &EXPERIMENT.replace("[8, 16]", "[16, 8]"));
    assert_eq!(code(&drmot(&["converge-grid", &order])), 3);
    let empty = write(&dir, "empty.toml", &EXPERIMENT.replace("resolutions = [2, 4]", "resolutions = []"));
    assert_eq!(code(&drmot(&["converge-grid", &empty])), 3);
    assert_eq!(code(&drmot(&["truncate", &write(&dir, "t.toml", EXPERIMENT)])), 3);
}

#[test]
fn mot_value_of_spread() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "solve.toml", SOLVE);
    let out = drmot(&["mot", &cfg]);
    assert_eq!(code(&out), 0);
    assert!((json(&out)["value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn wasserstein_and_convex_order() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.txt", "0 0\n");
    let b = write(&dir, "b.csv", "atom,weight\n-1,0.5\n1,0.5\n");
    let out = drmot(&["wasserstein", &a, &b]);
    assert_eq!(code(&out), 0);
    assert!((json(&out)["w1"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let v = json(&drmot(&["convex-order", &a, &b]));
    assert_eq!(v["ordered"], Value::Bool(true));
    let v = json(&drmot(&["convex-order", &b, &a]));
    assert_eq!(v["ordered"], Value::Bool(false));
}

#[test]
fn project_grid_moves_atoms_onto_nodes() {
    let dir = TempDir::new().unwrap();
    let joint = write(&dir, "pi.csv", "x1,x2,weight\n0.1,-0.7,0.5\n0.1,0.9,0.5\n");
    let out_csv = dir.path().join("proj.csv");
    let out = drmot(&[
        "project-grid",
        &joint,
        "--resolution",
        "4",
        "--interval=-1,1",
        "--interval=-2,2",
        "-o",
        out_csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["w1"].as_f64().unwrap() <= v["w1_bound"].as_f64().unwrap() + 1e-12);
    assert_eq!(v["delta_martingale"]["ok"], Value::Bool(true));
    let text = fs::read_to_string(&out_csv).unwrap();
    for line in text.lines().skip(1) {
        let x: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!((x[0] * 2.0).fract(), 0.0);
        assert_eq!(x[1].fract(), 0.0);
    }

    let drift = write(&dir, "drift.csv", "x1,x2,weight\n0,0.5,1\n");
    let out = drmot(&["project-grid", &drift, "--resolution", "2", "--interval=-1,1", "--interval=-1,1"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn constant_payoff_converges_immediately() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "exp.toml", EXPERIMENT);
    let out = drmot(&["converge-grid", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("epsilon,N,eps_eff,delta_eff,status,value,gap_to_next,ratio,verified\n"));
    let summary: Value = serde_json::from_slice(&out.stderr).unwrap();
    let gap = summary["runs"][0]["gaps"][0].as_f64().unwrap();
    assert!(gap < 1e-9);
}

#[test]
fn experiment_csv_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "exp.toml", &EXPERIMENT.replace("name = \"constant\"", "name = \"spread\""));
    let run = |name: &str| {
        let p = dir.path().join(name);
        let out = drmot(&["converge-n", &cfg, "-o", p.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(p).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("epsilon,n,seed,status,value,gap,verified\n"));
    assert_eq!(text.lines().count(), 1 + 4 + 1);
}

#[test]
fn truncate_reports_relative_change() {
    let dir = TempDir::new().unwrap();
    let text = r#"
[experiment]
family = "truncated_gaussian_walk"
dims = 2
scale = 0.25
epsilon = 0.1
sample_sizes = [20]
resolutions = [8]
seeds = [3]
levels = [0.3678794411714424, 0.1353352832366127]
output = "trunc.csv"

[payoff]
name = "spread"
"#;
    let cfg = write(&dir, "trunc.toml", text);
    let out = drmot(&["truncate", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["runs"][0]["last_relative_change"].as_f64().is_some());
    let csv = fs::read_to_string(Path::new(&dir.path().join("trunc.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 + 1);
}
