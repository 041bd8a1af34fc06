//! Experiment configuration.
//!
//! Config files are JSON objects whose physical keys carry their unit as a
//! suffix (`power_budget_dbm`, `bandwidth_mhz`, ...). Values are converted to
//! SI units and nats per channel use once, here, and nowhere else.

use std::fs;
use std::path::{Path, PathBuf};

use comp_core::oracle::DEFAULT_GRID_STEP;
use comp_core::units;
use comp_core::{DbrbOptions, SystemParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config must be a JSON object")]
    NotAnObject,
    #[error("config has no `mode`; expected one of solve, sweep, oracle-check")]
    MissingMode,
    #[error("unknown mode `{0}`; expected one of solve, sweep, oracle-check")]
    UnknownMode(String),
    #[error("key `{found}` has the wrong unit; expected `{expected}` ({unit})")]
    UnitMismatch { found: String, expected: &'static str, unit: &'static str },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("config mode is `{file}` but the `{requested}` command was run")]
    ModeConflict { file: Mode, requested: Mode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    Sweep,
    OracleCheck,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "solve" => Ok(Mode::Solve),
            "sweep" => Ok(Mode::Sweep),
            "oracle-check" => Ok(Mode::OracleCheck),
            other => Err(ConfigError::UnknownMode(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Sweep => "sweep",
            Mode::OracleCheck => "oracle-check",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Recognized keys: `(key, stem, unit)`. Keys without a unit have an empty unit.
const KEYS: &[(&str, &str, &str)] = &[
    ("mode", "mode", ""),
    ("num_bs", "num_bs", ""),
    ("antennas_per_bs", "antennas_per_bs", ""),
    ("num_users", "num_users", ""),
    ("power_budget_dbm", "power_budget", "dBm"),
    ("noise_density_dbm_per_hz", "noise_density", "dBm/Hz"),
    ("backhaul_mnats_per_s", "backhaul", "Mnats/s"),
    ("backhaul_grid_mnats_per_s", "backhaul_grid", "Mnats/s"),
    ("sinr_target_db", "sinr_target", "dB"),
    ("bandwidth_mhz", "bandwidth", "MHz"),
    ("inter_site_distance_km", "inter_site_distance", "km"),
    ("shadowing_std_db", "shadowing_std", "dB"),
    ("seeds", "seeds", ""),
    ("epsilon_rel", "epsilon_rel", ""),
    ("epsilon_abs_nats", "epsilon_abs", "nats/use"),
    ("max_iter", "max_iter", ""),
    ("grid_step_nats", "grid_step", "nats/use"),
    ("threads", "threads", ""),
    ("output_dir", "output_dir", ""),
];

const UNIT_SUFFIXES: &[&str] = &[
    "_dbm_per_hz", "_w_per_hz", "_mnats_per_s", "_nats_per_s", "_nats_per_use", "_bits_per_s", "_mbps", "_bps",
    "_dbm", "_dbw", "_mw", "_w", "_db", "_linear", "_ghz", "_mhz", "_khz", "_hz", "_km", "_m", "_nats",
];

fn stem(key: &str) -> &str {
    UNIT_SUFFIXES.iter().find_map(|s| key.strip_suffix(s)).unwrap_or(key)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<String>,
    num_bs: Option<usize>,
    antennas_per_bs: Option<usize>,
    num_users: Option<usize>,
    power_budget_dbm: Option<f64>,
    noise_density_dbm_per_hz: Option<f64>,
    backhaul_mnats_per_s: Option<f64>,
    backhaul_grid_mnats_per_s: Option<Vec<f64>>,
    sinr_target_db: Option<f64>,
    bandwidth_mhz: Option<f64>,
    inter_site_distance_km: Option<f64>,
    shadowing_std_db: Option<f64>,
    seeds: Option<Vec<u64>>,
    epsilon_rel: Option<f64>,
    epsilon_abs_nats: Option<f64>,
    max_iter: Option<usize>,
    grid_step_nats: Option<f64>,
    threads: Option<usize>,
    output_dir: Option<PathBuf>,
}

/// A validated experiment in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub params: SystemParams,
    /// Backhaul capacities for a sweep, nats per channel use, increasing.
    pub backhaul_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eps_rel: f64,
    pub eps_abs: f64,
    pub max_iter: usize,
    pub grid_step: f64,
    pub threads: usize,
    pub output_dir: PathBuf,
}

pub const DEFAULT_SWEEP_GRID_MNATS: [f64; 7] = [100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0];
pub const DEFAULT_SWEEP_SEEDS: u64 = 20;
pub const DEFAULT_ORACLE_SEEDS: u64 = 10;

impl ExperimentConfig {
    /// Defaults for a mode with nothing overridden.
    pub fn defaults(mode: Mode) -> Self {
        build(mode, RawConfig::default()).expect("defaults are valid")
    }

    pub fn dbrb_options(&self) -> DbrbOptions {
        DbrbOptions {
            eps_rel: self.eps_rel,
            eps_abs: self.eps_abs,
            max_iter: self.max_iter,
            threads: self.threads,
            ..DbrbOptions::default()
        }
    }

    /// SHA-256 of the resolved configuration, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate().map_err(|e| ConfigError::Invalid { key: "params", reason: e.to_string() })?;
        let positive = |key: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid { key, reason: format!("must be positive, got {v}") })
            }
        };
        positive("epsilon_rel", self.eps_rel)?;
        positive("epsilon_abs_nats", self.eps_abs)?;
        positive("grid_step_nats", self.grid_step)?;
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid { key: "seeds", reason: "must not be empty".into() });
        }
        if self.mode == Mode::Sweep && self.backhaul_grid.is_empty() {
            return Err(ConfigError::Invalid { key: "backhaul_grid_mnats_per_s", reason: "must not be empty".into() });
        }
        for &c in &self.backhaul_grid {
            positive("backhaul_grid_mnats_per_s", c)?;
        }
        Ok(())
    }
}

fn check_keys(map: &Map<String, Value>) -> Result<(), ConfigError> {
    for key in map.keys() {
        if KEYS.iter().any(|(k, _, _)| k == key) {
            continue;
        }
        let s = stem(key);
        if let Some((expected, _, unit)) = KEYS.iter().find(|(_, st, u)| !u.is_empty() && *st == s) {
            return Err(ConfigError::UnitMismatch { found: key.clone(), expected, unit });
        }
        return Err(ConfigError::UnknownKey(key.clone()));
    }
    Ok(())
}

fn build(mode: Mode, raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let (nb, m, nk, seeds, eps_abs, out) = match mode {
        Mode::Solve => (3, 4, 6, vec![0], 1e-4, "results/solve"),
        Mode::Sweep => (3, 2, 3, (0..DEFAULT_SWEEP_SEEDS).collect(), 1e-4, "results/sweep"),
        Mode::OracleCheck => (2, 2, 2, (0..DEFAULT_ORACLE_SEEDS).collect(), 1e-2, "results/oracle-check"),
    };
    let bandwidth_hz = raw.bandwidth_mhz.unwrap_or(10.0) * 1e6;
    let to_nats = |mnats: f64| units::mnats_per_s_to_nats_per_use(mnats, bandwidth_hz);
    let params = SystemParams {
        num_bs: raw.num_bs.unwrap_or(nb),
        antennas_per_bs: raw.antennas_per_bs.unwrap_or(m),
        num_users: raw.num_users.unwrap_or(nk),
        power_budget_w: units::dbm_to_watts(raw.power_budget_dbm.unwrap_or(46.0)),
        backhaul_cap: to_nats(raw.backhaul_mnats_per_s.unwrap_or(200.0)),
        sinr_target: units::db_to_linear(raw.sinr_target_db.unwrap_or(0.0)),
        bandwidth_hz,
        noise_density_w_per_hz: units::dbm_to_watts(raw.noise_density_dbm_per_hz.unwrap_or(-174.0)),
        inter_site_distance_m: raw.inter_site_distance_km.unwrap_or(1.0) * 1e3,
        shadowing_std_db: raw.shadowing_std_db.unwrap_or(8.0),
    };
    let mut backhaul_grid: Vec<f64> = match (mode, raw.backhaul_grid_mnats_per_s) {
        (_, Some(grid)) => grid.into_iter().map(to_nats).collect(),
        (Mode::Sweep, None) => DEFAULT_SWEEP_GRID_MNATS.iter().map(|&c| to_nats(c)).collect(),
        _ => Vec::new(),
    };
    backhaul_grid.sort_by(f64::total_cmp);
    backhaul_grid.dedup();
    let defaults = DbrbOptions::default();
    let cfg = ExperimentConfig {
        mode,
        params,
        backhaul_grid,
        seeds: raw.seeds.unwrap_or(seeds),
        eps_rel: raw.epsilon_rel.unwrap_or(defaults.eps_rel),
        eps_abs: raw.epsilon_abs_nats.unwrap_or(eps_abs),
        max_iter: raw.max_iter.unwrap_or(defaults.max_iter),
        grid_step: raw.grid_step_nats.unwrap_or(DEFAULT_GRID_STEP),
        threads: raw.threads.unwrap_or(0),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(out)),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a config from JSON text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text)?;
    let map = value.as_object().ok_or(ConfigError::NotAnObject)?;
    check_keys(map)?;
    let raw: RawConfig = serde_json::from_value(value)?;
    let mode = Mode::parse(raw.mode.as_deref().ok_or(ConfigError::MissingMode)?)?;
    build(mode, raw)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse_config(&text)
}
