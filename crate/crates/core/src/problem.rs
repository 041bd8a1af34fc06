//! Physical quantities and constraint evaluation for the joint beamforming and
//! link-selection problem.
//!
//! Link-indexed vectors (`x`, `u`) use the fixed ordering `b * K + k`
//! (BS-major, user-minor). Beamformer block `(b, k)` is rows
//! `b * M .. (b + 1) * M` of column `k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ChannelSet, SystemParams};
use crate::search_box::SearchBox;

/// Default feasibility tolerance shared by constraint reports and incumbent
/// acceptance.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// A validated problem instance: parameters, channels and the derived
/// normalized channels used to build well-scaled cone programs.
#[derive(Debug, Clone)]
pub struct Instance {
    params: SystemParams,
    channels: ChannelSet,
    noise_power: f64,
    /// `h_k * sqrt(P / (W N0))`: with this scaling the noise power is one and
    /// a per-BS power budget of one corresponds to the physical budget.
    normalized: Vec<Vec<Complex64>>,
}

impl Instance {
    pub fn new(params: SystemParams, channels: ChannelSet) -> Result<Self> {
        params.validate()?;
        channels.validate(&params)?;
        let noise_power = params.noise_power();
        let scale = (params.power_budget_w / noise_power).sqrt();
        let normalized = channels.rows.iter().map(|row| row.iter().map(|h| h * scale).collect()).collect();
        Ok(Self { params, channels, noise_power, normalized })
    }

    pub fn generate(params: SystemParams, seed: u64) -> Result<Self> {
        let channels = crate::scenario::generate_scenario(&params, seed)?;
        Self::new(params, channels)
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn normalized_channel(&self, k: usize) -> &[Complex64] {
        &self.normalized[k]
    }

    pub fn num_bs(&self) -> usize {
        self.params.num_bs
    }

    pub fn num_users(&self) -> usize {
        self.params.num_users
    }

    pub fn antennas(&self) -> usize {
        self.params.antennas_per_bs
    }

    pub fn num_links(&self) -> usize {
        self.params.num_links()
    }

    pub fn link(&self, b: usize, k: usize) -> usize {
        b * self.params.num_users + k
    }

    /// Same channels with a different backhaul capacity.
    pub fn with_backhaul(&self, backhaul_cap: f64) -> Result<Self> {
        Self::new(self.params.with_backhaul(backhaul_cap), self.channels.clone())
    }

    /// Same channels with a different SINR target.
    pub fn with_sinr_target(&self, sinr_target: f64) -> Result<Self> {
        Self::new(SystemParams { sinr_target, ..self.params.clone() }, self.channels.clone())
    }

    /// Same channels with a different per-BS power budget.
    pub fn with_power_budget(&self, power_budget_w: f64) -> Result<Self> {
        Self::new(SystemParams { power_budget_w, ..self.params.clone() }, self.channels.clone())
    }

    /// Rate every user must reach, `log(1 + target SINR)`.
    pub fn min_rate(&self) -> f64 {
        self.params.sinr_target.ln_1p()
    }
}

/// Aggregate beamformers, one column `w_k` of length `B * M` per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beamformer {
    len: usize,
    columns: Vec<Vec<Complex64>>,
}

impl Beamformer {
    pub fn zeros(len: usize, num_users: usize) -> Self {
        Self { len, columns: vec![vec![Complex64::new(0.0, 0.0); len]; num_users] }
    }

    pub fn from_columns(columns: Vec<Vec<Complex64>>) -> Result<Self> {
        let len = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::Shape("beamformer columns differ in length".into()));
        }
        Ok(Self { len, columns })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_users(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        &self.columns[k]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.columns[k]
    }

    pub fn block(&self, b: usize, k: usize, antennas: usize) -> &[Complex64] {
        &self.columns[k][b * antennas..(b + 1) * antennas]
    }

    pub fn block_mut(&mut self, b: usize, k: usize, antennas: usize) -> &mut [Complex64] {
        &mut self.columns[k][b * antennas..(b + 1) * antennas]
    }

    pub fn block_power(&self, b: usize, k: usize, antennas: usize) -> f64 {
        self.block(b, k, antennas).iter().map(Complex64::norm_sqr).sum()
    }
}

/// Link selection `x`, ordered `b * K + k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionVector(pub Vec<bool>);

impl SelectionVector {
    pub fn get(&self, b: usize, k: usize, num_users: usize) -> bool {
        self.0[b * num_users + k]
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect()
    }

    /// Every user has at least one active link.
    pub fn connects_all(&self, num_bs: usize, num_users: usize) -> bool {
        (0..num_users).all(|k| (0..num_bs).any(|b| self.0[b * num_users + k]))
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&v| v).count()
    }
}

/// Soft power levels `u`, ordered `b * K + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftPower(pub Vec<f64>);

/// Per-user rates in nats per channel use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// A verified feasible point and its sum rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub beamformer: Beamformer,
    pub selection: SelectionVector,
    pub soft_power: SoftPower,
    pub rates: RateVector,
    pub objective: f64,
}

impl Incumbent {
    /// Builds an incumbent from a selection and physical beamformers.
    ///
    /// Blocks of inactive links are zeroed, columns are phase-rotated so that
    /// `h_k w_k` is real, soft powers are set to the block powers, and the
    /// result is accepted only if the constraint report is empty at `tol`.
    pub fn from_beamformer(inst: &Instance, selection: SelectionVector, w: Beamformer, tol: f64) -> Option<Self> {
        let (nb, nk, m) = (inst.num_bs(), inst.num_users(), inst.antennas());
        let mut w = w;
        for b in 0..nb {
            for k in 0..nk {
                if !selection.get(b, k, nk) {
                    w.block_mut(b, k, m).iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                }
            }
        }
        let w = soc_rotate(inst, &w);
        let mut u = vec![0.0; nb * nk];
        for b in 0..nb {
            for k in 0..nk {
                if selection.get(b, k, nk) {
                    u[b * nk + k] = w.block_power(b, k, m);
                }
            }
        }
        let soft_power = SoftPower(u);
        let report = check_feasible(inst, &w, &selection.as_f64(), &soft_power, tol);
        if !report.is_feasible() {
            log::debug!("rejected candidate: {:?}", report.violations);
            return None;
        }
        let rates = rates(inst, &w);
        let objective = rates.sum();
        Some(Self { beamformer: w, selection, soft_power, rates, objective })
    }

    pub fn check(&self, inst: &Instance, tol: f64) -> FeasibilityReport {
        check_feasible(inst, &self.beamformer, &self.selection.as_f64(), &self.soft_power, tol)
    }
}

fn dot(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// SINR of user `k` with interference from all other columns treated as noise.
pub fn sinr(inst: &Instance, w: &Beamformer, k: usize) -> f64 {
    let h = inst.channels().user(k);
    let signal = dot(h, w.column(k)).norm_sqr();
    let interference: f64 =
        (0..w.num_users()).filter(|&j| j != k).map(|j| dot(h, w.column(j)).norm_sqr()).sum();
    signal / (interference + inst.noise_power())
}

/// Achievable rate of user `k` in nats per channel use.
pub fn rate(inst: &Instance, w: &Beamformer, k: usize) -> f64 {
    sinr(inst, w, k).ln_1p()
}

pub fn rates(inst: &Instance, w: &Beamformer) -> RateVector {
    RateVector((0..inst.num_users()).map(|k| rate(inst, w, k)).collect())
}

/// Backhaul load of BS `b`: the rates of the users it serves.
pub fn backhaul_usage(x: &[f64], rates: &RateVector, b: usize) -> f64 {
    let nk = rates.0.len();
    (0..nk).map(|k| x[b * nk + k] * rates.0[k]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum ConstraintKind {
    Backhaul { bs: usize },
    Sinr { user: usize },
    SoftPower { bs: usize, user: usize },
    Power { bs: usize },
    Connectivity { user: usize },
    Boolean { bs: usize, user: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ConstraintKind,
    /// How far past the tolerance-adjusted limit the constraint is.
    pub margin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, pred: impl Fn(&ConstraintKind) -> bool) -> bool {
        self.violations.iter().any(|v| pred(&v.kind))
    }
}

/// Evaluates every constraint of the original problem at `(w, x, u)`.
///
/// Power and backhaul limits are checked relative to their budgets, the SINR
/// target absolutely, the soft-power coupling relative to the power budget.
pub fn check_feasible(inst: &Instance, w: &Beamformer, x: &[f64], u: &SoftPower, tol: f64) -> FeasibilityReport {
    let p = inst.params();
    let (nb, nk, m) = (p.num_bs, p.num_users, p.antennas_per_bs);
    let mut violations = Vec::new();
    let mut push = |kind, margin: f64| {
        if margin > 0.0 {
            violations.push(Violation { kind, margin });
        }
    };

    let r = rates(inst, w);
    for b in 0..nb {
        let limit = p.backhaul_cap * (1.0 + tol);
        push(ConstraintKind::Backhaul { bs: b }, backhaul_usage(x, &r, b) - limit);
    }
    for k in 0..nk {
        push(ConstraintKind::Sinr { user: k }, p.sinr_target - tol - sinr(inst, w, k));
    }
    for b in 0..nb {
        for k in 0..nk {
            let i = b * nk + k;
            let limit = x[i] * u.0[i] + tol * p.power_budget_w;
            push(ConstraintKind::SoftPower { bs: b, user: k }, w.block_power(b, k, m) - limit);
        }
    }
    for b in 0..nb {
        let total: f64 = (0..nk).map(|k| u.0[b * nk + k]).sum();
        push(ConstraintKind::Power { bs: b }, total - p.power_budget_w * (1.0 + tol));
    }
    for k in 0..nk {
        let served: f64 = (0..nb).map(|b| x[b * nk + k]).sum();
        push(ConstraintKind::Connectivity { user: k }, 1.0 - tol - served);
    }
    for b in 0..nb {
        for k in 0..nk {
            let v = x[b * nk + k];
            let off = v.abs().min((v - 1.0).abs());
            push(ConstraintKind::Boolean { bs: b, user: k }, off - tol);
        }
    }
    for b in 0..nb {
        for k in 0..nk {
            let v = u.0[b * nk + k];
            push(ConstraintKind::SoftPower { bs: b, user: k }, -v - tol * p.power_budget_w);
        }
    }
    FeasibilityReport { violations }
}

/// Rotates each column by a unit-modulus scalar so that `h_k w_k` is real and
/// nonnegative. Every `|h_k w_j|`, and hence every SINR, is unchanged.
pub fn soc_rotate(inst: &Instance, w: &Beamformer) -> Beamformer {
    let mut out = w.clone();
    for k in 0..w.num_users() {
        let s = dot(inst.channels().user(k), w.column(k));
        let mag = s.norm();
        if mag > 0.0 {
            let phase = s.conj() / mag;
            out.column_mut(k).iter_mut().for_each(|v| *v *= phase);
        }
    }
    out
}

/// The root box: links in `[0, 1]`, user rates between the SINR-target rate
/// and the smaller of the total backhaul and the full-cooperation single-user
/// rate.
pub fn compute_root_box(inst: &Instance) -> Result<SearchBox> {
    let p = inst.params();
    let nl = inst.num_links();
    let lo_rate = inst.min_rate();
    let mut lower = vec![0.0; nl];
    let mut upper = vec![1.0; nl];
    for k in 0..inst.num_users() {
        let snr = p.num_bs as f64 * p.power_budget_w * inst.channels().norm_sqr(k) / inst.noise_power();
        let hi = (p.num_bs as f64 * p.backhaul_cap).min(snr.ln_1p());
        if lo_rate > hi {
            return Err(Error::InfeasibleInstance { user: k, lower: lo_rate, upper: hi });
        }
        lower.push(lo_rate);
        upper.push(hi);
    }
    SearchBox::new(lower, upper, nl)
}
