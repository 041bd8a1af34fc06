use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use comp_core::cones::ClarabelSolver;
use comp_core::dbrb::root_heuristic;
use comp_core::oracle::{oracle_vs_dbrb, ComparisonReport, MAX_LINKS, MAX_USERS};
use comp_core::problem::Violation;
use comp_core::units::nats_per_use_to_mnats_per_s;
use comp_core::{
    backhaul_usage, solve_dbrb, solve_dbrb_with, Incumbent, Instance, SolveResult, Termination, FEASIBILITY_TOL,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};
use crate::output::{provenance_line, write_csv, write_json, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_ITERATION_LIMIT: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

pub fn exit_code_for(t: Termination) -> i32 {
    match t {
        Termination::Converged | Termination::Exhausted => EXIT_OK,
        Termination::Infeasible => EXIT_INFEASIBLE,
        Termination::IterationLimit => EXIT_ITERATION_LIMIT,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// First nonzero per-seed code, or 0.
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

fn merge_code(acc: i32, code: i32) -> i32 {
    if acc == EXIT_OK {
        code
    } else {
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub iter: usize,
    pub ub: f64,
    pub lb: f64,
    pub live_boxes: usize,
    pub socp_solves: usize,
    pub feas_solves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub sum_rate_nats: f64,
    pub sum_rate_mnats_per_s: f64,
    /// `w[k]` is the aggregate beamformer of user `k`, entries `[re, im]` in √W.
    pub beamformer: Vec<Vec<[f64; 2]>>,
    /// `selection[b][k]`.
    pub selection: Vec<Vec<u8>>,
    /// `soft_power_w[b][k]`.
    pub soft_power_w: Vec<Vec<f64>>,
    pub rates_mnats_per_s: Vec<f64>,
    pub backhaul_usage_mnats_per_s: Vec<f64>,
    pub backhaul_cap_mnats_per_s: f64,
    pub violations: Vec<Violation>,
}

impl SolutionFile {
    pub fn new(inst: &Instance, inc: &Incumbent) -> Self {
        let (nb, nk) = (inst.num_bs(), inst.num_users());
        let w = inst.params().bandwidth_hz;
        let to_mnats = |v: f64| nats_per_use_to_mnats_per_s(v, w);
        let x = inc.selection.as_f64();
        Self {
            sum_rate_nats: inc.objective,
            sum_rate_mnats_per_s: to_mnats(inc.objective),
            beamformer: (0..nk).map(|k| inc.beamformer.column(k).iter().map(|c| [c.re, c.im]).collect()).collect(),
            selection: (0..nb).map(|b| (0..nk).map(|k| u8::from(inc.selection.get(b, k, nk))).collect()).collect(),
            soft_power_w: (0..nb).map(|b| inc.soft_power.0[b * nk..(b + 1) * nk].to_vec()).collect(),
            rates_mnats_per_s: inc.rates.0.iter().map(|&r| to_mnats(r)).collect(),
            backhaul_usage_mnats_per_s: (0..nb).map(|b| to_mnats(backhaul_usage(&x, &inc.rates, b))).collect(),
            backhaul_cap_mnats_per_s: to_mnats(inst.params().backhaul_cap),
            violations: inc.check(inst, FEASIBILITY_TOL).violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub termination: Option<Termination>,
    pub error: Option<String>,
    pub upper_nats: Option<f64>,
    pub lower_nats: Option<f64>,
    pub upper_mnats_per_s: Option<f64>,
    pub lower_mnats_per_s: Option<f64>,
    pub gap_nats: Option<f64>,
    pub relative_gap: Option<f64>,
    pub iterations: usize,
    pub socp_solves: usize,
    pub feas_solves: usize,
    pub wall_ms: f64,
    pub exit_code: i32,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn trace_rows(res: &SolveResult) -> Vec<TraceCsvRow> {
    res.trace
        .iter()
        .map(|t| TraceCsvRow {
            iter: t.iter,
            ub: t.ub,
            lb: t.lb,
            live_boxes: t.live_boxes,
            socp_solves: t.socp_solves,
            feas_solves: t.feas_solves,
        })
        .collect()
}

fn ensure_mode(cfg: &ExperimentConfig, mode: Mode) -> Result<()> {
    if cfg.mode != mode {
        bail!("config is for `{}`, not `{}`", cfg.mode, mode);
    }
    Ok(())
}

/// Solves each configured seed and writes `trace.csv`, `solution.json` and
/// `summary.json` (into `seed-N/` subdirectories when there are several seeds).
pub fn run_solve(cfg: &ExperimentConfig) -> Result<RunReport> {
    ensure_mode(cfg, Mode::Solve)?;
    let hash = cfg.hash();
    let opts = cfg.dbrb_options();
    let to_mnats = |v: f64| nats_per_use_to_mnats_per_s(v, cfg.params.bandwidth_hz);
    let mut report = RunReport { exit_code: EXIT_OK, files: Vec::new() };
    for &seed in &cfg.seeds {
        let dir =
            if cfg.seeds.len() == 1 { cfg.output_dir.clone() } else { cfg.output_dir.join(format!("seed-{seed}")) };
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let start = Instant::now();
        let outcome = Instance::generate(cfg.params.clone(), seed)
            .and_then(|inst| solve_dbrb(&inst, &opts).map(|res| (inst, res)));
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let summary = match &outcome {
            Ok((inst, res)) => {
                let trace_path = dir.join("trace.csv");
                write_csv(&trace_path, &provenance_line(&hash, Some(seed)), &trace_rows(res))?;
                let solution_path = dir.join("solution.json");
                write_json(&solution_path, &res.incumbent.as_ref().map(|inc| SolutionFile::new(inst, inc)))?;
                report.files.extend([trace_path, solution_path]);
                let last = res.trace.last();
                let ok = res.termination != Termination::Infeasible;
                SolveSummary {
                    version: VERSION.into(),
                    config_sha256: hash.clone(),
                    seed,
                    termination: Some(res.termination),
                    error: None,
                    upper_nats: ok.then_some(res.upper).and_then(finite),
                    lower_nats: ok.then_some(res.lower).and_then(finite),
                    upper_mnats_per_s: ok.then(|| to_mnats(res.upper)).and_then(finite),
                    lower_mnats_per_s: ok.then(|| to_mnats(res.lower)).and_then(finite),
                    gap_nats: ok.then(|| res.gap()).and_then(finite),
                    relative_gap: ok.then(|| res.relative_gap()).and_then(finite),
                    iterations: res.iterations,
                    socp_solves: last.map_or(0, |t| t.socp_solves),
                    feas_solves: last.map_or(0, |t| t.feas_solves),
                    wall_ms,
                    exit_code: exit_code_for(res.termination),
                }
            }
            Err(e) => {
                log::error!("seed {seed}: {e}");
                SolveSummary {
                    version: VERSION.into(),
                    config_sha256: hash.clone(),
                    seed,
                    termination: None,
                    error: Some(e.to_string()),
                    upper_nats: None,
                    lower_nats: None,
                    upper_mnats_per_s: None,
                    lower_mnats_per_s: None,
                    gap_nats: None,
                    relative_gap: None,
                    iterations: 0,
                    socp_solves: 0,
                    feas_solves: 0,
                    wall_ms,
                    exit_code: EXIT_OTHER,
                }
            }
        };
        let summary_path = dir.join("summary.json");
        write_json(&summary_path, &summary)?;
        report.files.push(summary_path);
        report.exit_code = merge_code(report.exit_code, summary.exit_code);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Backhaul capacity, Mnats/s.
    pub backhaul: f64,
    pub seed: u64,
    /// Best verified sum rate, Mnats/s.
    pub opt_rate: Option<f64>,
    /// One-shot heuristic sum rate, Mnats/s.
    pub heur_rate: Option<f64>,
    pub ratio: Option<f64>,
    pub iters: usize,
    pub wall_ms: f64,
    /// Final upper bound, Mnats/s.
    pub opt_upper: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub backhaul: f64,
    pub cells: usize,
    pub solved: usize,
    pub mean_opt_rate: Option<f64>,
    pub mean_heur_rate: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioDistribution {
    pub count: usize,
    pub min: f64,
    pub p10: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p90: f64,
    pub max: f64,
    pub mean: f64,
}

impl RatioDistribution {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (i, f) = (pos.floor() as usize, pos.fract());
            if i + 1 < v.len() {
                v[i] + f * (v[i + 1] - v[i])
            } else {
                v[i]
            }
        };
        Some(Self {
            count: v.len(),
            min: v[0],
            p10: q(0.1),
            p25: q(0.25),
            median: q(0.5),
            p75: q(0.75),
            p90: q(0.9),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub version: String,
    pub config_sha256: String,
    pub aggregates: Vec<SweepAggregate>,
    pub ratio_distribution: Option<RatioDistribution>,
    pub failed_cells: usize,
}

fn status_label(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::Exhausted => "exhausted",
        Termination::IterationLimit => "iteration-limit",
        Termination::Infeasible => "infeasible",
    }
}

/// One seed across the whole (increasing) backhaul grid. Each cell starts
/// from the better of the previous cell's incumbent and its own heuristic
/// point; a larger capacity only relaxes the constraints, so both stay valid.
fn sweep_seed(cfg: &ExperimentConfig, seed: u64) -> Vec<SweepRow> {
    let mut opts = cfg.dbrb_options();
    opts.threads = 0;
    let solver = ClarabelSolver::with_tol(opts.solver_tol);
    let to_mnats = |v: f64| nats_per_use_to_mnats_per_s(v, cfg.params.bandwidth_hz);
    let error_row = |cap: f64, wall_ms: f64, e: &comp_core::Error| {
        log::error!("sweep cell seed {seed}, backhaul {}: {e}", to_mnats(cap));
        SweepRow {
            backhaul: to_mnats(cap),
            seed,
            opt_rate: None,
            heur_rate: None,
            ratio: None,
            iters: 0,
            wall_ms,
            opt_upper: None,
            status: format!("error: {e}"),
        }
    };
    let base = match Instance::generate(cfg.params.clone(), seed) {
        Ok(base) => base,
        Err(e) => return cfg.backhaul_grid.iter().map(|&cap| error_row(cap, 0.0, &e)).collect(),
    };
    let mut prev: Option<Incumbent> = None;
    let mut rows = Vec::with_capacity(cfg.backhaul_grid.len());
    for &cap in &cfg.backhaul_grid {
        let start = Instant::now();
        let cell = (|| {
            let inst = base.with_backhaul(cap)?;
            let heur = root_heuristic(&inst, &solver)?;
            let warm = match (&prev, &heur) {
                (Some(p), Some(h)) => Some(if h.objective > p.objective { h } else { p }),
                (p, h) => p.as_ref().or(h.as_ref()),
            };
            let res = solve_dbrb_with(&inst, &opts, &solver, warm)?;
            Ok::<_, comp_core::Error>((heur, res))
        })();
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let row = match cell {
            Ok((heur, res)) => {
                let opt = res.incumbent.as_ref().map(|i| i.objective);
                let heur_rate = heur.as_ref().map(|h| h.objective);
                if res.incumbent.is_some() {
                    prev = res.incumbent.clone();
                }
                SweepRow {
                    backhaul: to_mnats(cap),
                    seed,
                    opt_rate: opt.map(to_mnats),
                    heur_rate: heur_rate.map(to_mnats),
                    ratio: match (heur_rate, opt) {
                        (Some(h), Some(o)) if o > 0.0 => Some(h / o),
                        _ => None,
                    },
                    iters: res.iterations,
                    wall_ms,
                    opt_upper: (res.termination != Termination::Infeasible).then(|| to_mnats(res.upper)),
                    status: status_label(res.termination).into(),
                }
            }
            Err(e) => error_row(cap, wall_ms, &e),
        };
        rows.push(row);
    }
    rows
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(rows: &[SweepRow], grid_mnats: &[f64]) -> Vec<SweepAggregate> {
    grid_mnats
        .iter()
        .map(|&c| {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.backhaul == c).collect();
            let ratios = || cell.iter().filter_map(|r| r.ratio);
            SweepAggregate {
                backhaul: c,
                cells: cell.len(),
                solved: cell.iter().filter(|r| r.opt_rate.is_some()).count(),
                mean_opt_rate: mean(cell.iter().filter_map(|r| r.opt_rate)),
                mean_heur_rate: mean(cell.iter().filter_map(|r| r.heur_rate)),
                mean_ratio: mean(ratios()),
                min_ratio: ratios().reduce(f64::min),
                max_ratio: ratios().reduce(f64::max),
            }
        })
        .collect()
}

/// Optimal and heuristic sum rates over the backhaul grid for every seed.
/// Writes `sweep.csv`, `sweep_summary.csv` and `sweep_summary.json`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RunReport> {
    ensure_mode(cfg, Mode::Sweep)?;
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let hash = cfg.hash();
    let per_seed: Vec<Vec<SweepRow>> = if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
        pool.install(|| cfg.seeds.par_iter().map(|&s| sweep_seed(cfg, s)).collect())
    } else {
        cfg.seeds.iter().map(|&s| sweep_seed(cfg, s)).collect()
    };
    let mut rows: Vec<SweepRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.backhaul.total_cmp(&b.backhaul).then(a.seed.cmp(&b.seed)));

    let grid_mnats: Vec<f64> =
        cfg.backhaul_grid.iter().map(|&c| nats_per_use_to_mnats_per_s(c, cfg.params.bandwidth_hz)).collect();
    let aggregates = aggregate(&rows, &grid_mnats);
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let failed_cells = rows.iter().filter(|r| r.status.starts_with("error")).count();
    let summary = SweepSummary {
        version: VERSION.into(),
        config_sha256: hash.clone(),
        aggregates: aggregates.clone(),
        ratio_distribution: RatioDistribution::from_values(&ratios),
        failed_cells,
    };

    let provenance = provenance_line(&hash, None);
    let files = vec![
        cfg.output_dir.join("sweep.csv"),
        cfg.output_dir.join("sweep_summary.csv"),
        cfg.output_dir.join("sweep_summary.json"),
    ];
    write_csv(&files[0], &provenance, &rows)?;
    write_csv(&files[1], &provenance, &aggregates)?;
    write_json(&files[2], &summary)?;
    if let Some(d) = &summary.ratio_distribution {
        log::info!(
            "heuristic/optimal ratio over {} cells: min {:.3}, median {:.3}, max {:.3}",
            d.count,
            d.min,
            d.median,
            d.max
        );
    }
    Ok(RunReport { exit_code: EXIT_OK, files })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedCheck {
    pub seed: u64,
    pub report: ComparisonReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFile {
    pub version: String,
    pub config_sha256: String,
    pub grid_step_nats: f64,
    pub epsilon_abs_nats: f64,
    pub pass: bool,
    pub results: Vec<SeedCheck>,
}

/// Brute force against DBRB for every seed; writes `check.json` and exits
/// nonzero if any seed diverges.
pub fn run_oracle_check(cfg: &ExperimentConfig) -> Result<RunReport> {
    ensure_mode(cfg, Mode::OracleCheck)?;
    let p = &cfg.params;
    let links = p.num_links();
    if links > MAX_LINKS || p.num_users > MAX_USERS {
        bail!(
            "instance too large for the brute-force oracle: {links} links and {} users \
             (limit {MAX_LINKS} links, {MAX_USERS} users)",
            p.num_users
        );
    }
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let opts = cfg.dbrb_options();
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        let inst = Instance::generate(p.clone(), seed)?;
        let report = oracle_vs_dbrb(&inst, cfg.grid_step, &opts)?;
        if !report.pass {
            log::error!("seed {seed}: DBRB and oracle disagree");
        }
        results.push(SeedCheck { seed, report });
    }
    let pass = results.iter().all(|r| r.report.pass);
    let check = CheckFile {
        version: VERSION.into(),
        config_sha256: cfg.hash(),
        grid_step_nats: cfg.grid_step,
        epsilon_abs_nats: cfg.eps_abs,
        pass,
        results,
    };
    let path = cfg.output_dir.join("check.json");
    write_json(&path, &check)?;
    Ok(RunReport { exit_code: if pass { EXIT_OK } else { EXIT_DIVERGENCE }, files: vec![path] })
}
