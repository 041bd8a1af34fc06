//! Conversions between the logarithmic units used in configuration files and
//! the linear SI quantities used everywhere else.

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts) + 30.0
}

/// Rates are carried internally per channel use; the bandwidth is the only
/// link to the per-second figures used at I/O.
pub fn mnats_per_s_to_nats_per_use(mnats_per_s: f64, bandwidth_hz: f64) -> f64 {
    mnats_per_s * 1e6 / bandwidth_hz
}

pub fn nats_per_use_to_mnats_per_s(nats_per_use: f64, bandwidth_hz: f64) -> f64 {
    nats_per_use * bandwidth_hz / 1e6
}
