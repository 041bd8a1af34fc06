//! Reproducible multicell instances: site layout, user drops, pathloss,
//! log-normal shadowing and Rayleigh fading.
//!
//! Every stochastic component is drawn from its own ChaCha8 stream keyed by
//! the scenario seed (stream 0: user geometry, stream 1: shadowing, stream 2:
//! small-scale fading), so changing how one component is sampled never shifts
//! the others and a `(params, seed)` pair always maps to the same channels.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Users closer than this to any site are redrawn.
pub const MIN_USER_DISTANCE_M: f64 = 35.0;

const GEOMETRY_STREAM: u64 = 0;
const SHADOWING_STREAM: u64 = 1;
const FADING_STREAM: u64 = 2;

/// System constants in SI units. Rates and the backhaul capacity are in nats
/// per channel use (bandwidth-normalized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub num_bs: usize,
    pub antennas_per_bs: usize,
    pub num_users: usize,
    pub power_budget_w: f64,
    pub backhaul_cap: f64,
    pub sinr_target: f64,
    pub bandwidth_hz: f64,
    pub noise_density_w_per_hz: f64,
    pub inter_site_distance_m: f64,
    pub shadowing_std_db: f64,
}

impl Default for SystemParams {
    /// Three 4-antenna sites serving six users, 46 dBm per site, -174 dBm/Hz
    /// noise over 10 MHz, 0 dB SINR target and 200 Mnats/s of backhaul.
    fn default() -> Self {
        let bandwidth_hz = 10e6;
        Self {
            num_bs: 3,
            antennas_per_bs: 4,
            num_users: 6,
            power_budget_w: units::dbm_to_watts(46.0),
            backhaul_cap: units::mnats_per_s_to_nats_per_use(200.0, bandwidth_hz),
            sinr_target: units::db_to_linear(0.0),
            bandwidth_hz,
            noise_density_w_per_hz: units::dbm_to_watts(-174.0),
            inter_site_distance_m: 1000.0,
            shadowing_std_db: 8.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParam { name, reason: format!("must be positive and finite, got {v}") })
            }
        }
        for (name, v) in [
            ("num_bs", self.num_bs),
            ("antennas_per_bs", self.antennas_per_bs),
            ("num_users", self.num_users),
        ] {
            if v == 0 {
                return Err(Error::InvalidParam { name, reason: "must be at least 1".into() });
            }
        }
        positive("power_budget_w", self.power_budget_w)?;
        positive("backhaul_cap", self.backhaul_cap)?;
        positive("sinr_target", self.sinr_target)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("noise_density_w_per_hz", self.noise_density_w_per_hz)?;
        positive("inter_site_distance_m", self.inter_site_distance_m)?;
        if !(self.shadowing_std_db.is_finite() && self.shadowing_std_db >= 0.0) {
            return Err(Error::InvalidParam {
                name: "shadowing_std_db",
                reason: format!("must be nonnegative, got {}", self.shadowing_std_db),
            });
        }
        Ok(())
    }

    /// Number of BS-user links, the length of the Boolean block.
    pub fn num_links(&self) -> usize {
        self.num_bs * self.num_users
    }

    /// Length of an aggregate channel or beamforming vector.
    pub fn aggregate_len(&self) -> usize {
        self.num_bs * self.antennas_per_bs
    }

    pub fn noise_power(&self) -> f64 {
        self.bandwidth_hz * self.noise_density_w_per_hz
    }

    pub fn with_backhaul(&self, backhaul_cap: f64) -> Self {
        Self { backhaul_cap, ..self.clone() }
    }
}

/// Distance-dependent pathloss in dB for a distance in km.
pub fn pathloss_db(distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0 && distance_km.is_finite()) {
        return Err(Error::Domain(format!("pathloss distance must be positive, got {distance_km} km")));
    }
    Ok(128.1 + 37.6 * distance_km.log10())
}

pub fn noise_power(noise_density_w_per_hz: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(noise_density_w_per_hz > 0.0 && bandwidth_hz > 0.0) {
        return Err(Error::Domain(format!(
            "noise density and bandwidth must be positive, got {noise_density_w_per_hz} W/Hz, {bandwidth_hz} Hz"
        )));
    }
    Ok(noise_density_w_per_hz * bandwidth_hz)
}

/// Site coordinates in metres: a regular polygon with side equal to the
/// inter-site distance, centred on the origin (an equilateral triangle for
/// three sites). A single site sits at the origin.
pub fn site_positions(params: &SystemParams) -> Vec<[f64; 2]> {
    let b = params.num_bs;
    if b == 1 {
        return vec![[0.0, 0.0]];
    }
    let radius = params.inter_site_distance_m / (2.0 * (PI / b as f64).sin());
    (0..b)
        .map(|i| {
            let angle = PI / 2.0 + 2.0 * PI * i as f64 / b as f64;
            [radius * angle.cos(), radius * angle.sin()]
        })
        .collect()
}

/// Radius of the disk users are dropped in: the circumscribed circle of the
/// site polygon, or that of the equilateral triangle when there are fewer than
/// three sites.
pub fn coverage_radius_m(params: &SystemParams) -> f64 {
    let d = params.inter_site_distance_m;
    if params.num_bs >= 3 {
        d / (2.0 * (PI / params.num_bs as f64).sin())
    } else {
        d / 3f64.sqrt()
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Aggregate channels of one realization plus the geometry that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub seed: u64,
    pub bs_positions_m: Vec<[f64; 2]>,
    pub user_positions_m: Vec<[f64; 2]>,
    /// Shadowing in dB, indexed `b * K + k`.
    pub shadowing_db: Vec<f64>,
    /// `rows[k]` is `h_k = [h_{1,k}, ..., h_{B,k}]`, length `B * M`.
    pub rows: Vec<Vec<Complex64>>,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.user_positions_m.len()
    }

    pub fn user(&self, k: usize) -> &[Complex64] {
        &self.rows[k]
    }

    pub fn norm_sqr(&self, k: usize) -> f64 {
        self.rows[k].iter().map(|h| h.norm_sqr()).sum()
    }

    /// Large-scale power gain `10^(-(PL + S) / 10)` of link `(b, k)`.
    pub fn large_scale_gain(&self, b: usize, k: usize) -> Result<f64> {
        let [bx, by] = self.bs_positions_m[b];
        let [ux, uy] = self.user_positions_m[k];
        let d_km = ((bx - ux).powi(2) + (by - uy).powi(2)).sqrt() / 1000.0;
        let loss = pathloss_db(d_km)? + self.shadowing_db[b * self.num_users() + k];
        Ok(units::db_to_linear(-loss))
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        let k = params.num_users;
        if self.rows.len() != k {
            return Err(Error::Shape(format!("expected {k} channel rows, got {}", self.rows.len())));
        }
        if self.bs_positions_m.len() != params.num_bs
            || self.user_positions_m.len() != k
            || self.shadowing_db.len() != params.num_links()
        {
            return Err(Error::Shape("geometry does not match the system dimensions".into()));
        }
        for (user, row) in self.rows.iter().enumerate() {
            if row.len() != params.aggregate_len() {
                return Err(Error::Shape(format!(
                    "channel of user {user} has length {}, expected {}",
                    row.len(),
                    params.aggregate_len()
                )));
            }
            if row.iter().any(|h| !h.re.is_finite() || !h.im.is_finite()) {
                return Err(Error::Domain(format!("channel of user {user} has non-finite entries")));
            }
            if row.iter().all(|h| h.norm_sqr() == 0.0) {
                return Err(Error::DegenerateChannel(user));
            }
        }
        Ok(())
    }
}

/// Draws a full channel realization. Pure in `(params, seed)`.
pub fn generate_scenario(params: &SystemParams, seed: u64) -> Result<ChannelSet> {
    params.validate()?;
    let (nb, m, nk) = (params.num_bs, params.antennas_per_bs, params.num_users);

    let bs_positions_m = site_positions(params);
    let radius = coverage_radius_m(params);
    let min_dist = MIN_USER_DISTANCE_M.min(0.5 * radius);

    let mut geo = substream(seed, GEOMETRY_STREAM);
    let user_positions_m: Vec<[f64; 2]> = (0..nk)
        .map(|_| loop {
            let r = radius * geo.random::<f64>().sqrt();
            let theta = 2.0 * PI * geo.random::<f64>();
            let p = [r * theta.cos(), r * theta.sin()];
            let clear = bs_positions_m
                .iter()
                .all(|s| ((s[0] - p[0]).powi(2) + (s[1] - p[1]).powi(2)).sqrt() >= min_dist);
            if clear {
                break p;
            }
        })
        .collect();

    let mut shadow = substream(seed, SHADOWING_STREAM);
    let shadowing_db: Vec<f64> = (0..nb * nk)
        .map(|_| {
            let n: f64 = StandardNormal.sample(&mut shadow);
            params.shadowing_std_db * n
        })
        .collect();

    let mut set = ChannelSet { seed, bs_positions_m, user_positions_m, shadowing_db, rows: Vec::with_capacity(nk) };

    let mut fading = substream(seed, FADING_STREAM);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..nk {
        let mut row = Vec::with_capacity(nb * m);
        for b in 0..nb {
            let amplitude = set.large_scale_gain(b, k)?.sqrt();
            for _ in 0..m {
                let re: f64 = StandardNormal.sample(&mut fading);
                let im: f64 = StandardNormal.sample(&mut fading);
                row.push(Complex64::new(re * half, im * half) * amplitude);
            }
        }
        set.rows.push(row);
    }
    Ok(set)
}

/// Unit-variance small-scale fading coefficients recovered from a channel set
/// by dividing out the large-scale gain. Used to audit the generator.
pub fn fading_coefficients(params: &SystemParams, set: &ChannelSet) -> Result<Vec<Complex64>> {
    let m = params.antennas_per_bs;
    let mut out = Vec::with_capacity(params.num_users * params.aggregate_len());
    for k in 0..params.num_users {
        for b in 0..params.num_bs {
            let amplitude = set.large_scale_gain(b, k)?.sqrt();
            out.extend(set.rows[k][b * m..(b + 1) * m].iter().map(|h| h / amplitude));
        }
    }
    Ok(out)
}

/// On-disk form of a scenario. Channel entries are `[re, im]` pairs; every
/// quantity is in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub params: SystemParams,
    pub seed: u64,
    pub bs_positions_m: Vec<[f64; 2]>,
    pub user_positions_m: Vec<[f64; 2]>,
    pub shadowing_db: Vec<f64>,
    pub channels: Vec<Vec<[f64; 2]>>,
}

impl ScenarioFile {
    pub fn new(params: &SystemParams, set: &ChannelSet) -> Self {
        Self {
            params: params.clone(),
            seed: set.seed,
            bs_positions_m: set.bs_positions_m.clone(),
            user_positions_m: set.user_positions_m.clone(),
            shadowing_db: set.shadowing_db.clone(),
            channels: set.rows.iter().map(|row| row.iter().map(|h| [h.re, h.im]).collect()).collect(),
        }
    }

    /// Validates and splits into parameters and channels.
    pub fn into_parts(self) -> Result<(SystemParams, ChannelSet)> {
        self.params.validate()?;
        let set = ChannelSet {
            seed: self.seed,
            bs_positions_m: self.bs_positions_m,
            user_positions_m: self.user_positions_m,
            shadowing_db: self.shadowing_db,
            rows: self
                .channels
                .into_iter()
                .map(|row| row.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                .collect(),
        };
        set.validate(&self.params)?;
        Ok((self.params, set))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pathloss_reference_points() {
        assert!((pathloss_db(1.0).unwrap() - 128.1).abs() < 1e-12);
        assert!((pathloss_db(10.0).unwrap() - 165.7).abs() < 1e-12);
        assert!((pathloss_db(0.1).unwrap() - 90.5).abs() < 1e-12);
        assert!(pathloss_db(0.0).is_err());
        assert!(pathloss_db(-1.0).is_err());
    }

    #[test]
    fn pathloss_increasing() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..2000 {
            let pl = pathloss_db(i as f64 * 1e-3).unwrap();
            assert!(pl > prev);
            prev = pl;
        }
    }

    #[test]
    fn noise_power_values() {
        let n0 = units::dbm_to_watts(-174.0);
        let p = noise_power(n0, 1e7).unwrap();
        assert!((p / 10f64.powf(-13.4) - 1.0).abs() < 1e-12);
        assert!((units::watts_to_dbm(p) + 104.0).abs() < 1e-9);
        assert_eq!(noise_power(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(noise_power(2.0, 3.0).unwrap(), 6.0);
        assert!(noise_power(0.0, 1.0).is_err());
    }

    #[test]
    fn triangle_layout() {
        let params = SystemParams::default();
        let sites = site_positions(&params);
        assert_eq!(sites.len(), 3);
        for i in 0..3 {
            let (a, b) = (sites[i], sites[(i + 1) % 3]);
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            assert!((d - 1000.0).abs() < 1e-9);
        }
        assert!((coverage_radius_m(&params) - 1000.0 / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn deterministic_and_shaped() {
        let params = SystemParams::default();
        let a = generate_scenario(&params, 7).unwrap();
        let b = generate_scenario(&params, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows[0].len(), 12);
        assert_ne!(a, generate_scenario(&params, 8).unwrap());
        a.validate(&params).unwrap();
        let radius = coverage_radius_m(&params);
        for p in &a.user_positions_m {
            assert!((p[0] * p[0] + p[1] * p[1]).sqrt() <= radius + 1e-9);
        }
    }

    #[test]
    fn rejects_zero_channel() {
        let params = SystemParams { num_users: 1, num_bs: 1, antennas_per_bs: 2, ..Default::default() };
        let mut set = generate_scenario(&params, 1).unwrap();
        set.rows[0].iter_mut().for_each(|h| *h = Complex64::new(0.0, 0.0));
        assert!(matches!(set.validate(&params), Err(Error::DegenerateChannel(0))));
    }

    #[test]
    fn json_round_trip() {
        let params = SystemParams { num_users: 2, ..Default::default() };
        let set = generate_scenario(&params, 3).unwrap();
        let text = serde_json::to_string(&ScenarioFile::new(&params, &set)).unwrap();
        let (p2, s2) = serde_json::from_str::<ScenarioFile>(&text).unwrap().into_parts().unwrap();
        assert_eq!(p2, params);
        assert_eq!(s2, set);
    }
}
