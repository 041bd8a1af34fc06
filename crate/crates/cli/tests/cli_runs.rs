use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use comp_cli::output::read_csv;
use comp_cli::run::{CheckFile, SolutionFile, SolveSummary, SweepRow, SweepSummary, TraceCsvRow};
use serde_json::{json, Value};

fn run(mode: &str, config: &Value, dir: &Path, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config.to_string()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_comp-dbrb"))
        .arg(mode)
        .arg("--config")
        .arg(&path)
        .args(extra)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn tiny_solve(dir: &Path) -> Value {
    json!({
        "mode": "solve",
        "num_bs": 2,
        "antennas_per_bs": 2,
        "num_users": 2,
        "backhaul_mnats_per_s": 50.0,
        "bandwidth_mhz": 10.0,
        "seeds": [3],
        "output_dir": dir.join("out"),
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_solve(dir.path());
    let out = dir.path().join("out");

    let first = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let trace_text = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace_text.starts_with("# config_sha256="));
    assert!(trace_text.lines().next().unwrap().contains("seed=3"));
    assert_eq!(trace_text.lines().nth(1).unwrap(), "iter,ub,lb,live_boxes,socp_solves,feas_solves");

    let trace: Vec<TraceCsvRow> = read_csv(&out.join("trace.csv")).unwrap();
    assert!(!trace.is_empty());
    assert!(trace.windows(2).all(|w| w[1].ub <= w[0].ub && w[1].lb >= w[0].lb));

    let solution: Option<SolutionFile> =
        serde_json::from_str(&fs::read_to_string(out.join("solution.json")).unwrap()).unwrap();
    let solution = solution.unwrap();
    assert!(solution.violations.is_empty());
    for usage in &solution.backhaul_usage_mnats_per_s {
        assert!(*usage <= solution.backhaul_cap_mnats_per_s * (1.0 + 1e-6));
    }
    let summary: SolveSummary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.exit_code, 0);
    assert!(summary.relative_gap.unwrap() <= 1e-3 + 1e-12);
    assert!((summary.lower_nats.unwrap() - solution.sum_rate_nats).abs() < 1e-12);

    let second = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(fs::read_to_string(out.join("trace.csv")).unwrap(), trace_text);
}

#[test]
fn several_seeds_get_their_own_directories() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_solve(dir.path());
    cfg["seeds"] = json!([0, 1]);
    let o = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for s in [0, 1] {
        assert!(dir.path().join(format!("out/seed-{s}/trace.csv")).exists());
    }
}

#[test]
fn exit_codes_follow_termination() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_solve(dir.path());
    cfg["sinr_target_db"] = json!(200.0);
    assert_eq!(run("solve", &cfg, dir.path(), &[]).status.code(), Some(2));

    let mut cfg = tiny_solve(dir.path());
    cfg["num_bs"] = json!(3);
    cfg["num_users"] = json!(3);
    cfg["backhaul_mnats_per_s"] = json!(200.0);
    let o = run("solve", &cfg, dir.path(), &["--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_solve(dir.path());
    cfg["power_budget_w"] = json!(1.0);
    let o = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("power_budget_dbm"), "{}", stderr(&o));

    let o = run("sweep", &tiny_solve(dir.path()), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mode"), "{}", stderr(&o));

    let mut cfg = tiny_solve(dir.path());
    cfg["frobnicate"] = json!(true);
    assert_eq!(run("solve", &cfg, dir.path(), &[]).status.code(), Some(1));
}

#[test]
fn sweep_reports_ratios_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "mode": "sweep",
        "num_bs": 2,
        "antennas_per_bs": 2,
        "num_users": 2,
        "bandwidth_mhz": 10.0,
        "backhaul_grid_mnats_per_s": [30.0, 60.0],
        "seeds": [0, 1],
        "epsilon_abs_nats": 1e-2,
        "threads": 2,
        "output_dir": dir.path().join("out"),
    });
    let o = run("sweep", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    let header = fs::read_to_string(out.join("sweep.csv")).unwrap().lines().nth(1).unwrap().to_string();
    assert_eq!(header, "backhaul,seed,opt_rate,heur_rate,ratio,iters,wall_ms,opt_upper,status");
    let rows: Vec<SweepRow> = read_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let ratio = r.ratio.unwrap();
        assert!(ratio > 0.0 && ratio <= 1.0 + 1e-12, "{r:?}");
    }
    for seed in [0, 1] {
        let opt: Vec<f64> = rows.iter().filter(|r| r.seed == seed).map(|r| r.opt_rate.unwrap()).collect();
        assert!(opt[1] >= opt[0] - 1e-9);
    }
    let summary: SweepSummary =
        serde_json::from_str(&fs::read_to_string(out.join("sweep_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.ratio_distribution.unwrap().count, 4);
    assert_eq!(summary.failed_cells, 0);
    assert!(out.join("sweep_summary.csv").exists());
}

#[test]
fn oracle_check_passes_and_guards_cost() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "mode": "oracle-check",
        "backhaul_mnats_per_s": 50.0,
        "bandwidth_mhz": 10.0,
        "seeds": [1],
        "output_dir": dir.path().join("out"),
    });
    let o = run("oracle-check", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let check: CheckFile =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/check.json")).unwrap()).unwrap();
    assert!(check.pass);
    assert_eq!(check.results.len(), 1);

    let mut big = cfg.clone();
    big["num_bs"] = json!(3);
    big["num_users"] = json!(3);
    let o = run("oracle-check", &big, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("too large"), "{}", stderr(&o));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = comp_cli::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), cfg.mode.as_str());
        seen += 1;
    }
    assert_eq!(seen, 3);
}
