//! Seeded Monte Carlo over PPP snapshots on a finite disk around the
//! typical receiver.
//!
//! Trial `t` draws everything from `ChaCha8Rng::seed_from_u64(seed)` on
//! stream `t`, so a trial is reproducible in isolation and results do not
//! depend on how trials are spread over workers.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::abstraction::{NetworkParams, NetworkSnapshot, OffsetWeight, TimingModel, Transmitter};
use crate::error::{Error, Result};
use crate::ofdm_link::OfdmConfig;
use crate::units::linear_to_db;

pub const DEFAULT_EXPECTED_POINTS: u64 = 2000;
pub const MIN_EXPECTED_POINTS: u64 = 100;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Radius(f64),
    /// Radius chosen so that the disk holds this many points on average.
    ExpectedPoints(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSpec {
    pub trials: usize,
    pub window: Window,
    pub master_seed: u64,
    /// Size of a dedicated rayon pool; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SimSpec {
    pub fn new(trials: usize, master_seed: u64) -> Result<Self> {
        let spec = Self {
            trials,
            window: Window::ExpectedPoints(DEFAULT_EXPECTED_POINTS),
            master_seed,
            workers: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_expected_points(self, expected_points: u64) -> Result<Self> {
        let spec = Self {
            window: Window::ExpectedPoints(expected_points),
            ..self
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_radius(self, radius: f64) -> Result<Self> {
        let spec = Self {
            window: Window::Radius(radius),
            ..self
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_workers(self, workers: usize) -> Result<Self> {
        let spec = Self {
            workers: Some(workers),
            ..self
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("sim.trials", "at least one trial required"));
        }
        match self.window {
            Window::ExpectedPoints(k) if k < MIN_EXPECTED_POINTS => {
                return Err(Error::config(
                    "sim.expected_points",
                    format!("must be at least {MIN_EXPECTED_POINTS}"),
                ))
            }
            Window::Radius(r) if !(r > 0.0 && r.is_finite()) => {
                return Err(Error::config("sim.window_radius", "radius must be positive"))
            }
            _ => {}
        }
        if self.workers == Some(0) {
            return Err(Error::config("sim.workers", "at least one worker required"));
        }
        Ok(())
    }

    pub fn radius(&self, density: f64) -> f64 {
        match self.window {
            Window::Radius(r) => r,
            Window::ExpectedPoints(k) => (k as f64 / (PI * density)).sqrt(),
        }
    }

    fn rng(&self, trial_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(trial_index);
        rng
    }
}

/// Sample mean with a 95% normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_half_width: f64,
    pub trials: usize,
}

impl Estimate {
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
        for x in samples {
            n += 1;
            sum += x;
            sum_sq += x * x;
        }
        if n == 0 {
            return Self {
                mean: f64::NAN,
                ci_half_width: f64::INFINITY,
                trials: 0,
            };
        }
        let mean = sum / n as f64;
        let var = if n > 1 {
            ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            ci_half_width: Z95 * (var / n as f64).sqrt(),
            trials: n,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            ci_half_width: self.ci_half_width * factor.abs(),
            trials: self.trials,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.ci_half_width
    }
}

/// One PPP realization on the disk of radius `spec.radius(density)`.
/// Zero-point snapshots are valid.
pub fn sample_snapshot(params: &NetworkParams, timing: &TimingModel, spec: &SimSpec, trial_index: u64) -> Result<NetworkSnapshot> {
    spec.validate()?;
    let mut rng = spec.rng(trial_index);
    let radius = spec.radius(params.density);
    let mean = params.density * PI * radius * radius;
    let count = Poisson::new(mean)
        .map_err(|e| Error::Input(format!("Poisson mean {mean}: {e}")))?
        .sample(&mut rng) as usize;
    let transmitters = (0..count)
        .map(|_| {
            // 1 - u lies in (0, 1], keeping distances in (0, R].
            let u: f64 = rng.random();
            let distance = radius * (1.0 - u).sqrt();
            let fade: f64 = Exp1.sample(&mut rng);
            let offset = timing.sample(&mut rng);
            Transmitter { distance, fade, offset }
        })
        .collect();
    Ok(NetworkSnapshot {
        alpha: params.alpha,
        transmitters,
        noise_over_e: params.noise_over_e(),
    })
}

/// Number of transmitters whose SINR reaches `threshold`.
pub fn count_decodable<W: OffsetWeight + ?Sized>(snapshot: &NetworkSnapshot, threshold: f64, weight: &W) -> usize {
    snapshot.sinr_all(weight).into_iter().filter(|&s| s >= threshold).count()
}

/// Per-trial summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub trial: u64,
    pub count: usize,
    /// SINR of the nearest transmitter; `None` for an empty snapshot.
    pub nearest_sinr: Option<f64>,
}

#[derive(Serialize)]
struct TrialRow {
    trial: u64,
    count: usize,
    nearest_sinr_db: Option<f64>,
}

fn run_trial<W: OffsetWeight + ?Sized>(
    params: &NetworkParams,
    timing: &TimingModel,
    weight: &W,
    spec: &SimSpec,
    trial: u64,
) -> Result<TrialOutcome> {
    let snapshot = sample_snapshot(params, timing, spec, trial)?;
    let sinr = snapshot.sinr_all(weight);
    let count = sinr.iter().filter(|&&s| s >= params.threshold).count();
    Ok(TrialOutcome {
        trial,
        count,
        nearest_sinr: snapshot.nearest().map(|i| sinr[i]),
    })
}

fn in_pool<T: Send>(spec: &SimSpec, job: impl FnOnce() -> T + Send) -> Result<T> {
    match spec.workers {
        None => Ok(job()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(job))
            .map_err(|e| Error::Input(format!("cannot start {n} workers: {e}"))),
    }
}

/// All trial outcomes in trial-index order.
pub fn simulate_trials<W: OffsetWeight + ?Sized>(
    params: &NetworkParams,
    timing: &TimingModel,
    weight: &W,
    spec: &SimSpec,
) -> Result<Vec<TrialOutcome>> {
    spec.validate()?;
    in_pool(spec, || {
        (0..spec.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(params, timing, weight, spec, t))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Per-trial decodable counts for several thresholds from one set of
/// snapshots; `counts[k][t]` belongs to `thresholds[k]` and trial `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub thresholds: Vec<f64>,
    pub counts: Vec<Vec<usize>>,
    pub nearest_sinr: Vec<Option<f64>>,
}

impl SweepOutcome {
    pub fn mean_count(&self, k: usize) -> Estimate {
        Estimate::from_samples(self.counts[k].iter().map(|&c| c as f64))
    }

    pub fn nearest_success(&self, k: usize) -> Estimate {
        let t = self.thresholds[k];
        Estimate::from_samples(self.nearest_sinr.iter().map(|s| s.is_some_and(|s| s >= t) as u8 as f64))
    }
}

pub fn simulate_sweep<W: OffsetWeight + ?Sized>(
    params: &NetworkParams,
    timing: &TimingModel,
    weight: &W,
    thresholds: &[f64],
    spec: &SimSpec,
) -> Result<SweepOutcome> {
    spec.validate()?;
    let per_trial = in_pool(spec, || {
        (0..spec.trials as u64)
            .into_par_iter()
            .map(|t| {
                let snapshot = sample_snapshot(params, timing, spec, t)?;
                let sinr = snapshot.sinr_all(weight);
                let nearest = snapshot.nearest().map(|i| sinr[i]);
                let mut sorted = sinr;
                sorted.sort_by(f64::total_cmp);
                let counts: Vec<usize> = thresholds
                    .iter()
                    .map(|&th| sorted.len() - sorted.partition_point(|&s| s < th))
                    .collect();
                Ok((counts, nearest))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut counts = vec![Vec::with_capacity(spec.trials); thresholds.len()];
    let mut nearest_sinr = Vec::with_capacity(spec.trials);
    for (c, n) in per_trial {
        for (k, v) in c.into_iter().enumerate() {
            counts[k].push(v);
        }
        nearest_sinr.push(n);
    }
    Ok(SweepOutcome {
        thresholds: thresholds.to_vec(),
        counts,
        nearest_sinr,
    })
}

pub fn write_trials_csv<W: Write>(outcomes: &[TrialOutcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for o in outcomes {
        w.serialize(TrialRow {
            trial: o.trial,
            count: o.count,
            nearest_sinr_db: o.nearest_sinr.map(linear_to_db),
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn mean_count(outcomes: &[TrialOutcome]) -> Estimate {
    Estimate::from_samples(outcomes.iter().map(|o| o.count as f64))
}

pub fn nearest_success(outcomes: &[TrialOutcome], threshold: f64) -> Estimate {
    Estimate::from_samples(
        outcomes
            .iter()
            .map(|o| o.nearest_sinr.is_some_and(|s| s >= threshold) as u8 as f64),
    )
}

/// Sample mean of the decodable count.
pub fn estimate_mean_decodable_weighted<W: OffsetWeight + ?Sized>(
    params: &NetworkParams,
    timing: &TimingModel,
    weight: &W,
    spec: &SimSpec,
) -> Result<Estimate> {
    Ok(mean_count(&simulate_trials(params, timing, weight, spec)?))
}

pub fn estimate_mean_decodable(params: &NetworkParams, timing: &TimingModel, config: &OfdmConfig, spec: &SimSpec) -> Result<Estimate> {
    estimate_mean_decodable_weighted(params, timing, config, spec)
}

/// `ln(1 + T)` times the mean-count estimate.
pub fn estimate_throughput(params: &NetworkParams, timing: &TimingModel, config: &OfdmConfig, spec: &SimSpec) -> Result<Estimate> {
    Ok(estimate_mean_decodable(params, timing, config, spec)?.scaled(params.threshold.ln_1p()))
}

/// Fraction of trials whose nearest transmitter is decodable. Empty
/// snapshots count as failures.
pub fn estimate_nearest_prob(params: &NetworkParams, timing: &TimingModel, config: &OfdmConfig, spec: &SimSpec) -> Result<Estimate> {
    Ok(nearest_success(&simulate_trials(params, timing, config, spec)?, params.threshold))
}

/// Histogram of the decodable count on `0..=max observed`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    pub trials: usize,
    pub pmf: Vec<f64>,
    /// 95% Wilson score interval per bin.
    pub pmf_ci: Vec<(f64, f64)>,
    /// `P(count >= n)`.
    pub ccdf: Vec<f64>,
    pub ccdf_stderr: Vec<f64>,
}

fn wilson(successes: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

impl EmpiricalDistribution {
    pub fn from_counts(counts: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut hist: Vec<usize> = Vec::new();
        let mut trials = 0;
        for c in counts {
            if c >= hist.len() {
                hist.resize(c + 1, 0);
            }
            hist[c] += 1;
            trials += 1;
        }
        if trials == 0 {
            return Err(Error::Input("no trials".into()));
        }
        let n = trials as f64;
        let pmf = hist.iter().map(|&h| h as f64 / n).collect();
        let pmf_ci = hist.iter().map(|&h| wilson(h, trials)).collect();
        let mut tail = 0usize;
        let mut tails = vec![0usize; hist.len()];
        for (i, &h) in hist.iter().enumerate().rev() {
            tail += h;
            tails[i] = tail;
        }
        let ccdf: Vec<f64> = tails.iter().map(|&t| t as f64 / n).collect();
        let ccdf_stderr = ccdf.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect();
        Ok(Self {
            trials,
            pmf,
            pmf_ci,
            ccdf,
            ccdf_stderr,
        })
    }

    pub fn max_observed(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn ccdf_at(&self, n: usize) -> f64 {
        self.ccdf.get(n).copied().unwrap_or(0.0)
    }

    pub fn ccdf_stderr_at(&self, n: usize) -> f64 {
        self.ccdf_stderr.get(n).copied().unwrap_or(0.0)
    }

    /// Total-variation distance to another pmf on the nonnegative integers.
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        let len = self.pmf.len().max(other.len());
        0.5 * (0..len)
            .map(|i| (self.pmf.get(i).copied().unwrap_or(0.0) - other.get(i).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
    }
}

pub fn estimate_distribution(
    params: &NetworkParams,
    timing: &TimingModel,
    config: &OfdmConfig,
    spec: &SimSpec,
) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::from_counts(simulate_trials(params, timing, config, spec)?.iter().map(|o| o.count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::snapshot_sinr;
    use crate::analytics::{self, CountDistribution, QuadratureSpec};
    use crate::units::db_to_linear;

    fn cfg() -> OfdmConfig {
        OfdmConfig::reference()
    }

    #[test]
    fn spec_validation() {
        assert!(SimSpec::new(0, 1).is_err());
        let s = SimSpec::new(10, 1).unwrap();
        assert!(s.with_expected_points(99).is_err());
        assert!(s.with_expected_points(100).is_ok());
        assert!(s.with_radius(-1.0).is_err());
        assert!(s.with_workers(0).is_err());
        let r = s.radius(1e-3);
        assert!((1e-3 * PI * r * r - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn snapshots_are_reproducible_and_poisson() {
        let c = cfg();
        let p = NetworkParams::reference();
        let t = TimingModel::from_sigma_over_n(&c, 0.2).unwrap();
        let spec = SimSpec::new(1, 9).unwrap().with_expected_points(1000).unwrap();
        assert_eq!(sample_snapshot(&p, &t, &spec, 5).unwrap(), sample_snapshot(&p, &t, &spec, 5).unwrap());
        assert_ne!(sample_snapshot(&p, &t, &spec, 5).unwrap(), sample_snapshot(&p, &t, &spec, 6).unwrap());
        let trials = 10_000;
        let total: usize = (0..trials).map(|i| sample_snapshot(&p, &t, &spec, i).unwrap().transmitters.len()).sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 1000.0).abs() < 3.0 * 1000f64.sqrt() / (trials as f64).sqrt(), "{mean}");
    }

    #[test]
    fn distances_fill_disk_uniformly() {
        let c = cfg();
        let p = NetworkParams::reference();
        let spec = SimSpec::new(1, 3).unwrap();
        let radius = spec.radius(p.density);
        let mut r: Vec<f64> = (0..60)
            .flat_map(|i| sample_snapshot(&p, &TimingModel::synchronized(&c), &spec, i).unwrap().transmitters)
            .map(|t| t.distance)
            .take(100_000)
            .collect();
        assert_eq!(r.len(), 100_000);
        assert!(r.iter().all(|&d| d > 0.0 && d <= radius));
        r.sort_by(f64::total_cmp);
        let n = r.len() as f64;
        let ks = r
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let f = (d / radius).powi(2);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.01, "KS {ks}");
    }

    #[test]
    fn count_examples() {
        let c = cfg();
        let empty = NetworkSnapshot {
            alpha: 3.8,
            transmitters: vec![],
            noise_over_e: 1e-6,
        };
        assert_eq!(count_decodable(&empty, 0.1, &c), 0);
        let single = NetworkSnapshot {
            alpha: 4.0,
            transmitters: vec![Transmitter {
                distance: 10.0,
                fade: 1.0,
                offset: 0.0,
            }],
            noise_over_e: 1e-5,
        };
        assert_eq!(count_decodable(&single, 9.0, &c), 1);
        assert_eq!(count_decodable(&single, 11.0, &c), 0);
    }

    #[test]
    fn counts_respect_truncation_in_every_trial() {
        let c = cfg();
        let p = NetworkParams::reference().with_density(1.0 / 400.0).unwrap();
        let spec = SimSpec::new(200, 4).unwrap().with_expected_points(300).unwrap();
        for t_db in [-12.0, -3.0, 1.0, 6.0] {
            let th = db_to_linear(t_db);
            let p = p.with_threshold(th).unwrap();
            let cap = CountDistribution::max_decodable(th);
            let sync = TimingModel::synchronized(&c);
            for o in simulate_trials(&p, &sync, &c, &spec).unwrap() {
                assert!(o.count <= cap);
                if th > 1.0 {
                    assert!(o.count <= 1);
                }
            }
        }
    }

    #[test]
    fn one_pass_counts_match_direct_sums() {
        let c = cfg();
        let p = NetworkParams::reference().with_density(1.0 / 400.0).unwrap();
        let t = TimingModel::from_sigma_over_n(&c, 0.3).unwrap();
        let spec = SimSpec::new(1, 11).unwrap().with_expected_points(200).unwrap();
        for i in 0..20 {
            let snap = sample_snapshot(&p, &t, &spec, i).unwrap();
            let direct = (0..snap.transmitters.len())
                .filter(|&j| snapshot_sinr(&snap, j, &c).unwrap() >= p.threshold)
                .count();
            assert_eq!(direct, count_decodable(&snap, p.threshold, &c));
        }
    }

    #[test]
    fn deterministic_across_workers() {
        let c = cfg();
        let p = NetworkParams::reference();
        let t = TimingModel::from_sigma_over_n(&c, 0.2).unwrap();
        let spec = SimSpec::new(300, 42).unwrap().with_expected_points(500).unwrap();
        let base = simulate_trials(&p, &t, &c, &spec.with_workers(1).unwrap()).unwrap();
        for w in [2, 8] {
            assert_eq!(base, simulate_trials(&p, &t, &c, &spec.with_workers(w).unwrap()).unwrap());
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trials_csv(&base, &mut a).unwrap();
        write_trials_csv(&simulate_trials(&p, &t, &c, &spec.with_workers(8).unwrap()).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with("trial,count,nearest_sinr_db\n"));
    }

    #[test]
    fn sweep_matches_single_threshold_runs() {
        let c = cfg();
        let p = NetworkParams::reference().with_density(1.0 / 400.0).unwrap();
        let t = TimingModel::from_sigma_over_n(&c, 0.2).unwrap();
        let spec = SimSpec::new(100, 3).unwrap().with_expected_points(300).unwrap();
        let ths = [0.05, 0.3, 1.0];
        let sweep = simulate_sweep(&p, &t, &c, &ths, &spec).unwrap();
        for (k, &th) in ths.iter().enumerate() {
            let single = simulate_trials(&p.with_threshold(th).unwrap(), &t, &c, &spec).unwrap();
            assert_eq!(sweep.counts[k], single.iter().map(|o| o.count).collect::<Vec<_>>());
            assert_eq!(sweep.nearest_success(k), nearest_success(&single, th));
        }
    }

    #[test]
    fn synchronized_mean_matches_quadrature() {
        let c = cfg();
        let p = NetworkParams::reference()
            .with_density(1.0 / 400.0)
            .unwrap()
            .with_threshold(db_to_linear(-4.0))
            .unwrap();
        let sync = TimingModel::synchronized(&c);
        let est = estimate_mean_decodable(&p, &sync, &c, &SimSpec::new(2000, 1).unwrap()).unwrap();
        let exact = analytics::mean_decodable(&p, &sync, &c, &QuadratureSpec::default()).unwrap();
        assert!((est.mean - exact).abs() <= est.ci_half_width.max(0.02 * exact), "{est:?} vs {exact}");
    }

    #[test]
    fn sparse_network_rarely_decodes() {
        // With the 118 dB budget the noise-limited range is ~1e6 m^2, so the
        // density must drop to 1e-10 before the mean falls below 1e-2.
        let c = cfg();
        let sync = TimingModel::synchronized(&c);
        let quad = QuadratureSpec::default();
        let p = NetworkParams::reference().with_density(1e-10).unwrap();
        let est = estimate_mean_decodable(&p, &sync, &c, &SimSpec::new(500, 2).unwrap()).unwrap();
        assert!(est.mean < 1e-2, "{est:?}");
        let p = NetworkParams::reference().with_density(1e-8).unwrap();
        let est = estimate_mean_decodable(&p, &sync, &c, &SimSpec::new(500, 2).unwrap()).unwrap();
        let exact = analytics::mean_decodable(&p, &sync, &c, &quad).unwrap();
        assert!(est.covers(exact), "{est:?} vs {exact}");
    }

    #[test]
    fn distribution_bookkeeping() {
        let d = EmpiricalDistribution::from_counts([0, 2, 2, 1, 0, 0]).unwrap();
        assert_eq!(d.pmf.iter().sum::<f64>(), 1.0);
        assert_eq!(d.max_observed(), 2);
        assert_eq!(d.ccdf, vec![1.0, 0.5, 2.0 / 6.0]);
        for ((lo, hi), p) in d.pmf_ci.iter().zip(&d.pmf) {
            assert!(lo <= p && p <= hi);
        }
        assert!(EmpiricalDistribution::from_counts([]).is_err());
        assert!((d.total_variation(&[0.5, 1.0 / 6.0, 1.0 / 3.0]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_probability_in_unit_interval() {
        let c = cfg();
        let p = NetworkParams::reference().with_threshold(1.0).unwrap();
        let est = estimate_nearest_prob(&p, &TimingModel::from_sigma_over_n(&c, 0.2).unwrap(), &c, &SimSpec::new(300, 5).unwrap()).unwrap();
        assert!((0.0..=1.0).contains(&est.mean));
    }

    #[test]
    fn doubled_window_changes_mean_less_than_ci() {
        // Paired design: the points of the doubled-window snapshot inside the
        // default radius form a default-window snapshot of the same trial.
        let c = cfg();
        let p = NetworkParams::reference()
            .with_density(1.0 / 400.0)
            .unwrap()
            .with_threshold(db_to_linear(-4.0))
            .unwrap();
        let t = TimingModel::from_sigma_over_n(&c, 0.2).unwrap();
        let default = SimSpec::new(1500, 8).unwrap();
        let doubled = default.with_expected_points(2 * DEFAULT_EXPECTED_POINTS).unwrap();
        let radius = default.radius(p.density);
        let (mut inner, mut outer) = (Vec::new(), Vec::new());
        for i in 0..default.trials as u64 {
            let full = sample_snapshot(&p, &t, &doubled, i).unwrap();
            let mut cut = full.clone();
            cut.transmitters.retain(|tx| tx.distance <= radius);
            inner.push(count_decodable(&cut, p.threshold, &c) as f64);
            outer.push(count_decodable(&full, p.threshold, &c) as f64);
        }
        let a = Estimate::from_samples(inner);
        let b = Estimate::from_samples(outer);
        assert!((a.mean - b.mean).abs() < a.ci_half_width, "{a:?} {b:?}");
    }

    #[test]
    fn interference_laplace_transform_matches_sampled_field() {
        let c = cfg();
        let (lambda, alpha) = (1e-3, 3.8);
        let p = NetworkParams::new(lambda, alpha, f64::INFINITY, 1.0).unwrap();
        let spec = SimSpec::new(1, 17).unwrap();
        for s in [0.05, 0.5, 3.0] {
            let samples: Vec<f64> = (0..4000)
                .map(|i| {
                    let snap = sample_snapshot(&p, &TimingModel::synchronized(&c), &spec, i).unwrap();
                    let field: f64 = snap.transmitters.iter().map(|t| t.received_power(alpha)).sum();
                    (-s * field).exp()
                })
                .collect();
            let est = Estimate::from_samples(samples);
            let exact = analytics::laplace_interference(s, lambda, alpha).unwrap();
            assert!((est.mean - exact).abs() <= est.ci_half_width.max(1e-3), "s={s}: {est:?} vs {exact}");
        }
    }
}
