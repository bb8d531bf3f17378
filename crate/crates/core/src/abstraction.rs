//! First-order system-level SINR model.
//!
//! A transmitter misaligned by `d` samples contributes `g(d)` of its received
//! energy as useful signal and the remaining `1 - g(d)` as self-interference;
//! every other transmitter contributes its full received energy as
//! interference regardless of its own offset.

use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::ofdm_link::OfdmConfig;
use crate::units::db_to_linear;

/// A weight `w(d)` in `[0, 1]` on the timing domain: the plain prefix weight
/// `g(d)` or a multi-hypothesis envelope of it.
pub trait OffsetWeight: Sync {
    /// Weight at offset `d`; zero outside the timing domain.
    fn weight(&self, d: f64) -> f64;

    /// Points where the weight is not smooth.
    fn kinks(&self) -> Vec<f64>;

    /// Points where the weight crosses `level` for `level` in `(0, 1)`.
    /// The superlevel set `{d : w(d) > level}` has its boundary within this
    /// set.
    fn level_crossings(&self, level: f64) -> Vec<f64>;

    fn domain(&self) -> (f64, f64);
}

/// Fraction of useful energy `g(d)` retained by a receiver misaligned by `d`
/// samples, for real `d` in `[-(n + n_cp), n + n_cp)`.
pub fn cp_weight(config: &OfdmConfig, d: f64) -> Result<f64> {
    config.check_offset(d)?;
    Ok(cp_weight_unchecked(config, d))
}

fn cp_weight_unchecked(config: &OfdmConfig, d: f64) -> f64 {
    let n = config.n() as f64;
    let n_cp = config.n_cp() as f64;
    if d < -n {
        0.0
    } else if d < 0.0 {
        ((n + d) / n).powi(2)
    } else if d < n_cp {
        1.0
    } else {
        ((n + n_cp - d) / n).powi(2)
    }
}

impl OffsetWeight for OfdmConfig {
    fn weight(&self, d: f64) -> f64 {
        if self.contains_offset(d) {
            cp_weight_unchecked(self, d)
        } else {
            0.0
        }
    }

    fn kinks(&self) -> Vec<f64> {
        vec![-(self.n() as f64), 0.0, self.n_cp() as f64]
    }

    fn level_crossings(&self, level: f64) -> Vec<f64> {
        if !(level > 0.0 && level < 1.0) {
            return Vec::new();
        }
        let n = self.n() as f64;
        let root = level.sqrt();
        vec![n * (root - 1.0), n + self.n_cp() as f64 - n * root]
    }

    fn domain(&self) -> (f64, f64) {
        OfdmConfig::domain(self)
    }
}

/// `h(tau, T) = T / ((1 + T) g - T)` from a weight value `g`; `None` when
/// `g <= T / (1 + T)`, i.e. self-interference alone already prevents
/// decoding.
pub fn interference_factor(weight: f64, threshold: f64) -> Option<f64> {
    let denom = (1.0 + threshold) * weight - threshold;
    (weight > threshold / (1.0 + threshold) && denom > 0.0).then(|| threshold / denom)
}

/// `h(tau, T)` for the prefix weight of `config`.
pub fn self_interference_factor(config: &OfdmConfig, tau: f64, threshold: f64) -> Result<Option<f64>> {
    if !(threshold > 0.0) {
        return Err(Error::config("detection.threshold", "threshold must be positive"));
    }
    Ok(interference_factor(cp_weight(config, tau)?, threshold))
}

/// Receiver timing hypotheses `{-n1 delta, ..., 0, ..., n2 delta}` (or any
/// explicit offset set).
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    config: OfdmConfig,
    offsets: Vec<f64>,
}

impl HypothesisSet {
    pub fn new(config: &OfdmConfig, offsets: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut offsets: Vec<f64> = offsets.into_iter().collect();
        if offsets.is_empty() {
            return Err(Error::config("hypotheses", "hypothesis set is empty"));
        }
        if let Some(&bad) = offsets.iter().find(|&&t| !config.contains_offset(t)) {
            let (lo, hi) = config.domain();
            return Err(Error::config(
                "hypotheses",
                format!("hypothesis {bad} outside timing domain [{lo}, {hi})"),
            ));
        }
        offsets.sort_by(f64::total_cmp);
        offsets.dedup();
        Ok(Self {
            config: config.clone(),
            offsets,
        })
    }

    pub fn evenly_spaced(config: &OfdmConfig, n1: u32, n2: u32, delta: f64) -> Result<Self> {
        if !(delta > 0.0) && n1 + n2 > 0 {
            return Err(Error::config("hypotheses.delta", "spacing must be positive"));
        }
        let offsets = (-(n1 as i64)..=n2 as i64).map(|i| i as f64 * delta);
        Self::new(config, offsets)
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

impl OffsetWeight for HypothesisSet {
    /// `max over tau in H of g(x - tau)`, with out-of-domain arguments of `g`
    /// contributing zero.
    fn weight(&self, d: f64) -> f64 {
        self.offsets
            .iter()
            .map(|&tau| self.config.weight(d - tau))
            .fold(0.0, f64::max)
    }

    fn kinks(&self) -> Vec<f64> {
        let (lo, hi) = self.config.domain();
        let n_cp = self.config.n_cp() as f64;
        let mut out = Vec::new();
        for &tau in &self.offsets {
            out.extend(self.config.kinks().into_iter().map(|k| k + tau));
            out.extend([lo + tau, hi + tau]);
        }
        // The falling branch of an earlier hypothesis meets the rising branch
        // of a later one halfway, shifted by the prefix.
        for (i, &a) in self.offsets.iter().enumerate() {
            for &b in &self.offsets[i + 1..] {
                out.push((a + b + n_cp) / 2.0);
            }
        }
        out
    }

    fn level_crossings(&self, level: f64) -> Vec<f64> {
        let base = self.config.level_crossings(level);
        self.offsets
            .iter()
            .flat_map(|&tau| base.iter().map(move |&c| c + tau))
            .collect()
    }

    fn domain(&self) -> (f64, f64) {
        self.config.domain()
    }
}

/// `g~(x)` for a hypothesis set.
pub fn hypothesis_weight(hypotheses: &HypothesisSet, x: f64) -> f64 {
    hypotheses.weight(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimingKind {
    Delta { offset: f64 },
    /// Gaussian restricted to the timing domain and renormalized to unit mass.
    TruncatedGaussian { mean: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// Distribution `F_D` of the timing misalignment on the domain
/// `[-(n + n_cp), n + n_cp)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingModel {
    kind: TimingKind,
    lo: f64,
    hi: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

impl TimingModel {
    pub fn delta(config: &OfdmConfig, offset: f64) -> Result<Self> {
        if !config.contains_offset(offset) {
            return Err(Error::config("timing.offset", "offset outside timing domain"));
        }
        Ok(Self::with_kind(config, TimingKind::Delta { offset }))
    }

    pub fn synchronized(config: &OfdmConfig) -> Self {
        Self::with_kind(config, TimingKind::Delta { offset: 0.0 })
    }

    pub fn truncated_gaussian(config: &OfdmConfig, mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config("timing.sigma_over_n", "sigma must be positive"));
        }
        if !mean.is_finite() {
            return Err(Error::config("timing.mean", "mean must be finite"));
        }
        Ok(Self::with_kind(config, TimingKind::TruncatedGaussian { mean, sigma }))
    }

    /// Zero-mean truncated Gaussian with `sigma = sigma_over_n * n`;
    /// `sigma_over_n = 0` gives the synchronized network.
    pub fn from_sigma_over_n(config: &OfdmConfig, sigma_over_n: f64) -> Result<Self> {
        if sigma_over_n == 0.0 {
            Ok(Self::synchronized(config))
        } else {
            Self::truncated_gaussian(config, 0.0, sigma_over_n * config.n() as f64)
        }
    }

    pub fn uniform(config: &OfdmConfig, lo: f64, hi: f64) -> Result<Self> {
        let (dlo, dhi) = config.domain();
        if !(lo < hi && lo >= dlo && hi <= dhi) {
            return Err(Error::config(
                "timing",
                format!("uniform range must satisfy {dlo} <= lo < hi <= {dhi}"),
            ));
        }
        Ok(Self::with_kind(config, TimingKind::Uniform { lo, hi }))
    }

    fn with_kind(config: &OfdmConfig, kind: TimingKind) -> Self {
        let (lo, hi) = config.domain();
        Self { kind, lo, hi }
    }

    pub fn kind(&self) -> TimingKind {
        self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, TimingKind::Delta { .. })
    }

    /// Interval carrying all the probability mass.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            TimingKind::Delta { offset } => (offset, offset),
            TimingKind::TruncatedGaussian { .. } => (self.lo, self.hi),
            TimingKind::Uniform { lo, hi } => (lo, hi),
        }
    }

    /// Offsets every draw by `shift` samples, as when the receiver advances
    /// its window. Gaussian models keep their truncation to the domain.
    pub fn shifted(&self, config: &OfdmConfig, shift: f64) -> Result<Self> {
        match self.kind {
            TimingKind::Delta { offset } => Self::delta(config, offset + shift),
            TimingKind::TruncatedGaussian { mean, sigma } => Self::truncated_gaussian(config, mean + shift, sigma),
            TimingKind::Uniform { lo, hi } => Self::uniform(config, lo + shift, hi + shift),
        }
    }

    fn gaussian_bounds(&self, mean: f64, sigma: f64) -> (f64, f64) {
        (
            std_normal_cdf((self.lo - mean) / sigma),
            std_normal_cdf((self.hi - mean) / sigma),
        )
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        match self.kind {
            TimingKind::Delta { offset } => (x >= offset) as u8 as f64,
            TimingKind::TruncatedGaussian { mean, sigma } => {
                let (a, b) = self.gaussian_bounds(mean, sigma);
                ((std_normal_cdf((x - mean) / sigma) - a) / (b - a)).clamp(0.0, 1.0)
            }
            TimingKind::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    /// Density on the domain; `None` for the atomic (delta) kind.
    pub fn density(&self, x: f64) -> Option<f64> {
        let inside = x >= self.lo && x < self.hi;
        match self.kind {
            TimingKind::Delta { .. } => None,
            TimingKind::TruncatedGaussian { mean, sigma } => {
                let (a, b) = self.gaussian_bounds(mean, sigma);
                Some(if inside {
                    std_normal_pdf((x - mean) / sigma) / (sigma * (b - a))
                } else {
                    0.0
                })
            }
            TimingKind::Uniform { lo, hi } => Some(if x >= lo && x < hi { 1.0 / (hi - lo) } else { 0.0 }),
        }
    }

    /// One in-domain draw by inversion. Every kind consumes exactly one
    /// uniform variate so that per-trial streams stay aligned across models.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let x = match self.kind {
            TimingKind::Delta { offset } => return offset,
            TimingKind::TruncatedGaussian { mean, sigma } => {
                let (a, b) = self.gaussian_bounds(mean, sigma);
                let p = (a + u * (b - a)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                mean + sigma * std_normal_quantile(p)
            }
            TimingKind::Uniform { lo, hi } => lo + u * (hi - lo),
        };
        x.clamp(self.lo, self.hi.next_down())
    }
}

/// Network-level parameters in linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    /// Transmitter density per square meter.
    pub density: f64,
    pub alpha: f64,
    /// `E / N0`; `f64::INFINITY` for the interference-limited regime.
    pub snr: f64,
    /// Detection threshold `T` (linear).
    pub threshold: f64,
}

impl NetworkParams {
    pub fn new(density: f64, alpha: f64, snr: f64, threshold: f64) -> Result<Self> {
        if !(density > 0.0 && density.is_finite()) {
            return Err(Error::config("network.density_per_m2", "density must be positive"));
        }
        if !(alpha > 2.0 && alpha.is_finite()) {
            return Err(Error::config("network.alpha", "alpha must exceed 2"));
        }
        if !(snr > 0.0) {
            return Err(Error::config("network.snr_db", "snr must be positive"));
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::config("detection.threshold_db", "threshold must be positive"));
        }
        Ok(Self {
            density,
            alpha,
            snr,
            threshold,
        })
    }

    /// SNR from a dBm power budget, pathloss normalized to unit gain at 1 m.
    pub fn snr_from_budget_db(tx_power_dbm: f64, bandwidth_hz: f64, noise_psd_dbm_hz: f64, noise_figure_db: f64) -> f64 {
        tx_power_dbm - crate::units::noise_power_dbm(noise_psd_dbm_hz, bandwidth_hz, noise_figure_db)
    }

    /// Density 1/400^2 m^-2, alpha 3.8, 23 dBm over 10 MHz at -174 dBm/Hz
    /// with a 9 dB noise figure (SNR 118 dB), T = -12 dB.
    pub fn reference() -> Self {
        let snr_db = Self::snr_from_budget_db(23.0, 10e6, -174.0, 9.0);
        Self::new(1.0 / 400f64.powi(2), 3.8, db_to_linear(snr_db), db_to_linear(-12.0)).expect("reference parameters are valid")
    }

    pub fn with_threshold(self, threshold: f64) -> Result<Self> {
        Self::new(self.density, self.alpha, self.snr, threshold)
    }

    pub fn with_density(self, density: f64) -> Result<Self> {
        Self::new(density, self.alpha, self.snr, self.threshold)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(self.density, alpha, self.snr, self.threshold)
    }

    pub fn interference_limited(self) -> Self {
        Self {
            snr: f64::INFINITY,
            ..self
        }
    }

    /// `N0 / E`.
    pub fn noise_over_e(&self) -> f64 {
        1.0 / self.snr
    }

    /// `T / (1 + T)`: the weight a transmitter must exceed to be decodable.
    pub fn weight_floor(&self) -> f64 {
        self.threshold / (1.0 + self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmitter {
    /// Distance to the receiver at the origin, meters.
    pub distance: f64,
    /// Rayleigh fade power.
    pub fade: f64,
    /// Timing misalignment relative to the receiver, samples.
    pub offset: f64,
}

impl Transmitter {
    pub fn received_power(&self, alpha: f64) -> f64 {
        self.distance.powf(-alpha) * self.fade
    }
}

/// One realization of the transmitter field as seen by the typical receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub alpha: f64,
    pub transmitters: Vec<Transmitter>,
    /// `N0 / E`.
    pub noise_over_e: f64,
}

impl NetworkSnapshot {
    fn received_powers(&self) -> Vec<f64> {
        self.transmitters.iter().map(|t| t.received_power(self.alpha)).collect()
    }

    /// SINR of every transmitter from one pass over the field. Uses the
    /// compensated total minus the own power for the interference sum.
    pub fn sinr_all<W: OffsetWeight + ?Sized>(&self, weight: &W) -> Vec<f64> {
        let powers = self.received_powers();
        let total = neumaier_sum(powers.iter().copied());
        self.transmitters
            .iter()
            .zip(&powers)
            .map(|(t, &p)| {
                let g = weight.weight(t.offset);
                let others = (total - p).max(0.0);
                sinr_ratio(g, p, others, self.noise_over_e)
            })
            .collect()
    }

    /// Index of the closest transmitter, lowest index on ties.
    pub fn nearest(&self) -> Option<usize> {
        self.transmitters
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.distance.total_cmp(&b.distance))
            .map(|(i, _)| i)
    }
}

fn sinr_ratio(g: f64, p: f64, others: f64, noise: f64) -> f64 {
    let signal = g * p;
    if signal == 0.0 {
        return 0.0;
    }
    signal / ((1.0 - g) * p + others + noise)
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// SINR of transmitter `i` under the first-order model, summing the
/// interference of all other transmitters directly.
pub fn snapshot_sinr<W: OffsetWeight + ?Sized>(snapshot: &NetworkSnapshot, i: usize, weight: &W) -> Result<f64> {
    if snapshot.transmitters.is_empty() {
        return Err(Error::Input("snapshot has no transmitters".into()));
    }
    let me = snapshot.transmitters.get(i).ok_or_else(|| {
        Error::Input(format!(
            "transmitter index {i} out of range for {} transmitters",
            snapshot.transmitters.len()
        ))
    })?;
    let p = me.received_power(snapshot.alpha);
    let others: f64 = snapshot
        .transmitters
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, t)| t.received_power(snapshot.alpha))
        .sum();
    Ok(sinr_ratio(weight.weight(me.offset), p, others, snapshot.noise_over_e))
}
