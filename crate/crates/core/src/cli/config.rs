//! TOML run configuration. Every section and key is optional; missing
//! values take the reference deployment (1024 subcarriers with a 72-sample
//! prefix, 1/400^2 m^-2, alpha 3.8, 118 dB SNR budget, T = -12 dB,
//! sigma = 0.2 N).

use std::path::Path;

use serde::Deserialize;

use crate::abstraction::{HypothesisSet, NetworkParams, TimingModel};
use crate::error::{Error, Result};
use crate::montecarlo::{SimSpec, DEFAULT_EXPECTED_POINTS};
use crate::ofdm_link::{Alphabet, OfdmConfig};
use crate::units::{db_grid, db_to_linear};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    ofdm: RawOfdm,
    network: RawNetwork,
    timing: RawTiming,
    detection: RawDetection,
    sim: RawSim,
    hypotheses: Option<RawHypotheses>,
    link: RawLink,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOfdm {
    n: Option<usize>,
    n_cp: Option<usize>,
    used_range: Option<[i64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNetwork {
    density_per_m2: Option<f64>,
    alpha: Option<f64>,
    tx_power_dbm: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_psd_dbm_hz: Option<f64>,
    noise_figure_db: Option<f64>,
    snr_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTiming {
    kind: Option<String>,
    sigma_over_n: Option<OneOrMany>,
    offset: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    lo_db: f64,
    hi_db: f64,
    step_db: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawDetection {
    threshold_db: Option<f64>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSim {
    trials: Option<usize>,
    expected_points: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHypotheses {
    n1: u32,
    n2: u32,
    delta: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawLink {
    offset: Option<i64>,
    trials: Option<usize>,
    mode: Option<String>,
    alphabet: Option<String>,
    seed: Option<u64>,
}

/// Threshold sweep in dB, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub lo_db: f64,
    pub hi_db: f64,
    pub step_db: f64,
}

impl Sweep {
    pub fn new(lo_db: f64, hi_db: f64, step_db: f64) -> Result<Self> {
        if !(step_db > 0.0 && lo_db.is_finite() && hi_db.is_finite() && lo_db <= hi_db) {
            return Err(Error::config("detection.sweep", "need lo_db <= hi_db and step_db > 0"));
        }
        Ok(Self { lo_db, hi_db, step_db })
    }

    /// Parses `LO:HI:STEP`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::config("--sweep", format!("expected LO:HI:STEP in dB, got {text:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Self::new(nums[0], nums[1], nums[2])
    }

    pub fn grid(&self) -> Vec<f64> {
        db_grid(self.lo_db, self.hi_db, self.step_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    Threshold(f64),
    Sweep(Sweep),
}

impl Detection {
    pub fn thresholds_db(&self) -> Vec<f64> {
        match self {
            Detection::Threshold(t) => vec![*t],
            Detection::Sweep(s) => s.grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimingSpec {
    TruncatedGaussian { sigmas_over_n: Vec<f64> },
    Delta { offset: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// One timing model together with its CSV labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledTiming {
    pub kind: &'static str,
    pub sigma_over_n: Option<f64>,
    pub model: TimingModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSettings {
    pub offset: i64,
    pub trials: usize,
    pub mode: LinkMode,
    pub alphabet: Alphabet,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisSettings {
    pub n1: u32,
    pub n2: u32,
    pub delta: f64,
}

impl HypothesisSettings {
    /// Parses `N1,N2,DELTA`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::config("--hypotheses", format!("expected N1,N2,DELTA, got {text:?}"));
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(Self {
            n1: parts[0].parse().map_err(|_| bad())?,
            n2: parts[1].parse().map_err(|_| bad())?,
            delta: parts[2].parse().map_err(|_| bad())?,
        })
    }
}

/// The default hypothesis layout: one advanced and one delayed window.
pub const DEFAULT_HYPOTHESES: HypothesisSettings = HypothesisSettings {
    n1: 1,
    n2: 1,
    delta: 150.0,
};

/// Validated configuration in user units (dB, dBm, meters).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ofdm: OfdmConfig,
    pub density_per_m2: f64,
    pub alpha: f64,
    /// `+inf` selects the interference-limited regime.
    pub snr_db: f64,
    pub timing: TimingSpec,
    pub detection: Detection,
    pub trials: usize,
    pub expected_points: u64,
    pub seed: u64,
    pub workers: Option<usize>,
    pub hypotheses: Option<HypothesisSettings>,
    pub link: LinkSettings,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sweep: Option<Sweep>,
    pub sigmas_over_n: Option<Vec<f64>>,
    pub hypotheses: Option<HypothesisSettings>,
    pub trials: Option<usize>,
    pub workers: Option<usize>,
    pub offset: Option<i64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_toml_str("").expect("defaults are valid")
    }
}

fn parse_name<T>(key: &str, value: Option<&str>, default: T, table: &[(&str, T)]) -> Result<T>
where
    T: Copy,
{
    let Some(name) = value else { return Ok(default) };
    table
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
            Error::config(key, format!("unknown value {name:?}, expected one of {}", names.join(", ")))
        })
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<config>".into(),
            message: e.message().to_string(),
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let o = raw.ofdm;
        let n = o.n.unwrap_or(1024);
        let n_cp = o.n_cp.unwrap_or(72);
        let [lo, hi] = o.used_range.unwrap_or([-300, 299]);
        let ofdm = OfdmConfig::with_used_range(n, n_cp, lo, hi).map_err(|e| Error::config("ofdm", e.to_string()))?;

        let net = raw.network;
        let budget = [net.tx_power_dbm, net.bandwidth_hz, net.noise_psd_dbm_hz, net.noise_figure_db];
        let snr_db = match net.snr_db {
            Some(_) if budget.iter().any(Option::is_some) => {
                return Err(Error::config(
                    "network.snr_db",
                    "give either snr_db or the power budget (tx_power_dbm, bandwidth_hz, noise_psd_dbm_hz, noise_figure_db), not both",
                ))
            }
            Some(s) => s,
            None => {
                let bw = net.bandwidth_hz.unwrap_or(10e6);
                if !(bw > 0.0) {
                    return Err(Error::config("network.bandwidth_hz", "bandwidth must be positive"));
                }
                NetworkParams::snr_from_budget_db(
                    net.tx_power_dbm.unwrap_or(23.0),
                    bw,
                    net.noise_psd_dbm_hz.unwrap_or(-174.0),
                    net.noise_figure_db.unwrap_or(9.0),
                )
            }
        };
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::config("network.snr_db", "snr must be a number or inf"));
        }
        let density_per_m2 = net.density_per_m2.unwrap_or(1.0 / 400f64.powi(2));
        let alpha = net.alpha.unwrap_or(3.8);

        let t = raw.timing;
        let kind = t.kind.as_deref().unwrap_or("truncated_gaussian");
        let reject = |present: bool, key: &str| -> Result<()> {
            if present {
                Err(Error::config(format!("timing.{key}"), format!("not used by kind = {kind:?}")))
            } else {
                Ok(())
            }
        };
        let timing = match kind {
            "truncated_gaussian" => {
                reject(t.offset.is_some(), "offset")?;
                reject(t.lo.is_some() || t.hi.is_some(), "lo")?;
                let sigmas_over_n = match t.sigma_over_n {
                    None => vec![0.2],
                    Some(OneOrMany::One(s)) => vec![s],
                    Some(OneOrMany::Many(v)) => v,
                };
                TimingSpec::TruncatedGaussian { sigmas_over_n }
            }
            "delta" => {
                reject(t.sigma_over_n.is_some(), "sigma_over_n")?;
                reject(t.lo.is_some() || t.hi.is_some(), "lo")?;
                TimingSpec::Delta {
                    offset: t.offset.unwrap_or(0.0),
                }
            }
            "uniform" => {
                reject(t.sigma_over_n.is_some(), "sigma_over_n")?;
                reject(t.offset.is_some(), "offset")?;
                let (Some(lo), Some(hi)) = (t.lo, t.hi) else {
                    return Err(Error::config("timing.lo", "uniform timing needs lo and hi"));
                };
                TimingSpec::Uniform { lo, hi }
            }
            other => {
                return Err(Error::config(
                    "timing.kind",
                    format!("unknown kind {other:?}, expected truncated_gaussian, delta or uniform"),
                ))
            }
        };

        let detection = match (raw.detection.threshold_db, raw.detection.sweep) {
            (Some(_), Some(_)) => {
                return Err(Error::config("detection", "give either threshold_db or sweep, not both"));
            }
            (_, Some(s)) => Detection::Sweep(Sweep::new(s.lo_db, s.hi_db, s.step_db)?),
            (t, None) => Detection::Threshold(t.unwrap_or(-12.0)),
        };

        let link = LinkSettings {
            offset: raw.link.offset.unwrap_or(-6),
            trials: raw.link.trials.unwrap_or(10_000),
            mode: parse_name(
                "link.mode",
                raw.link.mode.as_deref(),
                LinkMode::Analytic,
                &[("analytic", LinkMode::Analytic), ("empirical", LinkMode::Empirical)],
            )?,
            alphabet: parse_name(
                "link.alphabet",
                raw.link.alphabet.as_deref(),
                Alphabet::Qpsk,
                &[("qpsk", Alphabet::Qpsk), ("gaussian", Alphabet::Gaussian)],
            )?,
            seed: raw.link.seed.unwrap_or(1),
        };

        let cfg = Self {
            ofdm,
            density_per_m2,
            alpha,
            snr_db,
            timing,
            detection,
            trials: raw.sim.trials.unwrap_or(2000),
            expected_points: raw.sim.expected_points.unwrap_or(DEFAULT_EXPECTED_POINTS),
            seed: raw.sim.seed.unwrap_or(1),
            workers: raw.sim.workers,
            hypotheses: raw.hypotheses.map(|h| HypothesisSettings {
                n1: h.n1,
                n2: h.n2,
                delta: h.delta,
            }),
            link,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every derived object can be built.
    pub fn validate(&self) -> Result<()> {
        self.network_params(self.detection.thresholds_db()[0])?;
        for t in self.detection.thresholds_db() {
            if !t.is_finite() {
                return Err(Error::config("detection.threshold_db", "threshold must be finite"));
            }
        }
        self.timings()?;
        self.sim_spec()?;
        if let Some(h) = self.hypotheses {
            self.hypothesis_set(h)?;
        }
        if self.link.trials == 0 {
            return Err(Error::config("link.trials", "at least one trial required"));
        }
        if !self.ofdm.contains_offset(self.link.offset as f64) {
            return Err(Error::config("link.offset", "offset outside the timing domain"));
        }
        Ok(())
    }

    pub fn apply(mut self, o: &Overrides) -> Result<Self> {
        if let Some(s) = o.seed {
            self.seed = s;
            self.link.seed = s;
        }
        if let Some(s) = o.sweep {
            self.detection = Detection::Sweep(s);
        }
        if let Some(s) = &o.sigmas_over_n {
            self.timing = TimingSpec::TruncatedGaussian { sigmas_over_n: s.clone() };
        }
        if let Some(h) = o.hypotheses {
            self.hypotheses = Some(h);
        }
        if let Some(t) = o.trials {
            self.trials = t;
            self.link.trials = t;
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
        if let Some(d) = o.offset {
            self.link.offset = d;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn snr_linear(&self) -> f64 {
        db_to_linear(self.snr_db)
    }

    pub fn network_params(&self, threshold_db: f64) -> Result<NetworkParams> {
        NetworkParams::new(self.density_per_m2, self.alpha, self.snr_linear(), db_to_linear(threshold_db))
    }

    pub fn timings(&self) -> Result<Vec<LabeledTiming>> {
        match &self.timing {
            TimingSpec::TruncatedGaussian { sigmas_over_n } => {
                if sigmas_over_n.is_empty() {
                    return Err(Error::config("timing.sigma_over_n", "at least one value required"));
                }
                sigmas_over_n
                    .iter()
                    .map(|&s| {
                        if !(s >= 0.0 && s.is_finite()) {
                            return Err(Error::config("timing.sigma_over_n", "must be nonnegative"));
                        }
                        let model = TimingModel::from_sigma_over_n(&self.ofdm, s)?;
                        Ok(LabeledTiming {
                            kind: if s == 0.0 { "delta" } else { "truncated_gaussian" },
                            sigma_over_n: Some(s),
                            model,
                        })
                    })
                    .collect()
            }
            TimingSpec::Delta { offset } => Ok(vec![LabeledTiming {
                kind: "delta",
                sigma_over_n: None,
                model: TimingModel::delta(&self.ofdm, *offset)?,
            }]),
            TimingSpec::Uniform { lo, hi } => Ok(vec![LabeledTiming {
                kind: "uniform",
                sigma_over_n: None,
                model: TimingModel::uniform(&self.ofdm, *lo, *hi)?,
            }]),
        }
    }

    pub fn sim_spec(&self) -> Result<SimSpec> {
        let spec = SimSpec::new(self.trials, self.seed)?.with_expected_points(self.expected_points)?;
        match self.workers {
            Some(w) => spec.with_workers(w),
            None => Ok(spec),
        }
    }

    pub fn hypothesis_set(&self, h: HypothesisSettings) -> Result<HypothesisSet> {
        HypothesisSet::evenly_spaced(&self.ofdm, h.n1, h.n2, h.delta)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}
