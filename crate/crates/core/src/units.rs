//! dB conversions and small special functions shared across modules.
//!
//! Everything internal is linear; conversions happen only at the
//! configuration and CSV boundaries.

use std::f64::consts::PI;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Normalized sinc, `sin(pi x) / (pi x)`, with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        // Taylor expansion; the second-order term is below f64 resolution here.
        1.0 - (PI * x).powi(2) / 6.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Thermal noise power in dBm over `bandwidth_hz` for a receiver with the
/// given noise figure.
pub fn noise_power_dbm(noise_psd_dbm_hz: f64, bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Inclusive decibel grid `lo, lo + step, ...` up to `hi` (with a small
/// tolerance so that `hi` itself is included when it lies on the grid).
pub fn db_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| lo + step * i as f64).collect()
}
