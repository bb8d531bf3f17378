//! Sample-exact OFDM link under receiver timing misalignment.
//!
//! Sample period is normalized to 1. A transmitted symbol `m` occupies local
//! sample indices `-n_cp..n`, symbol `m + 1` follows after `n + n_cp` samples.
//! A receiver misaligned by `d` samples takes the FFT window
//! `y[n] = x(n - d)`, `n = 0..N`, of that transmitted timeline. Depending on
//! `d` the window falls into one of four cases (see [`TimingCase`]).
//!
//! Channel gain and energy are normalized to 1 for the power profiles;
//! downstream code applies pathloss and fading.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Subcarrier layout of the OFDM waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    n: usize,
    n_cp: usize,
    used: Vec<i64>,
}

impl OfdmConfig {
    /// `used` holds subcarrier indices in `[-n/2, n/2)`; they are sorted and
    /// deduplicated.
    pub fn new(n: usize, n_cp: usize, used: impl IntoIterator<Item = i64>) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::config("ofdm.n", "must be an even integer >= 2"));
        }
        if n_cp == 0 || n_cp >= n {
            return Err(Error::config("ofdm.n_cp", format!("must satisfy 0 < n_cp < n = {n}")));
        }
        let mut used: Vec<i64> = used.into_iter().collect();
        used.sort_unstable();
        used.dedup();
        let half = (n / 2) as i64;
        match (used.first(), used.last()) {
            (None, _) | (_, None) => {
                return Err(Error::config("ofdm.used_range", "used subcarrier set is empty"));
            }
            (Some(&lo), Some(&hi)) if lo < -half || hi >= half => {
                return Err(Error::config(
                    "ofdm.used_range",
                    format!("subcarriers must lie in [{}, {})", -half, half),
                ));
            }
            _ => {}
        }
        Ok(Self { n, n_cp, used })
    }

    /// Contiguous used band `lo..=hi`.
    pub fn with_used_range(n: usize, n_cp: usize, lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::config("ofdm.used_range", "lower edge exceeds upper edge"));
        }
        Self::new(n, n_cp, lo..=hi)
    }

    /// N = 1024, N_cp = 72, used subcarriers -300..=299.
    pub fn reference() -> Self {
        Self::with_used_range(1024, 72, -300, 299).expect("reference layout is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_cp(&self) -> usize {
        self.n_cp
    }

    pub fn used(&self) -> &[i64] {
        &self.used
    }

    /// Half-open timing domain `[-(n + n_cp), n + n_cp)`.
    pub fn domain(&self) -> (f64, f64) {
        let span = (self.n + self.n_cp) as f64;
        (-span, span)
    }

    pub fn contains_offset(&self, d: f64) -> bool {
        let (lo, hi) = self.domain();
        d >= lo && d < hi
    }

    pub(crate) fn check_offset(&self, d: f64) -> Result<()> {
        if self.contains_offset(d) {
            Ok(())
        } else {
            let (lo, hi) = self.domain();
            Err(Error::Domain { offset: d, lo, hi })
        }
    }

    /// Same waveform with a longer (or shorter) cyclic prefix.
    pub fn with_cyclic_prefix(&self, n_cp: usize) -> Result<Self> {
        Self::new(self.n, n_cp, self.used.iter().copied())
    }

    /// FFT bin of subcarrier `k`.
    pub fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }
}

/// Which part of the transmitted timeline an FFT window covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingCase {
    /// `-(n + n_cp) <= d < -n`: symbol `m + 1` only.
    NextSymbol,
    /// `-n <= d < 0`: tail of symbol `m`, then the prefix of `m + 1`.
    EarlySplice,
    /// `0 <= d < n_cp`: symbol `m` shifted inside its cyclic prefix.
    WithinPrefix,
    /// `n_cp <= d < n + n_cp`: tail of `m - 1`, then the head of `m`.
    LateSplice,
}

impl TimingCase {
    pub fn classify(config: &OfdmConfig, d: i64) -> Result<Self> {
        config.check_offset(d as f64)?;
        let n = config.n as i64;
        let n_cp = config.n_cp as i64;
        Ok(if d < -n {
            TimingCase::NextSymbol
        } else if d < 0 {
            TimingCase::EarlySplice
        } else if d < n_cp {
            TimingCase::WithinPrefix
        } else {
            TimingCase::LateSplice
        })
    }
}

/// Symbol alphabet for randomly generated streams. Both are zero-mean with
/// unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alphabet {
    #[default]
    Qpsk,
    Gaussian,
}

impl Alphabet {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            Alphabet::Qpsk => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let re = if rng.random::<bool>() { h } else { -h };
                let im = if rng.random::<bool>() { h } else { -h };
                Complex64::new(re, im)
            }
            Alphabet::Gaussian => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }
}

/// Frequency-domain data symbols `S[k; m]` for a contiguous range of symbol
/// indices. Unused subcarriers hold zero.
#[derive(Debug, Clone)]
pub struct SymbolStream {
    n: usize,
    first: i64,
    // symbols[m - first][bin(k)]
    symbols: Vec<Vec<Complex64>>,
    energy_per_sample: f64,
}

impl SymbolStream {
    /// Builds a stream for symbols `first..first + count` with `value(k, m)`
    /// evaluated on the used subcarriers only.
    pub fn from_fn(
        config: &OfdmConfig,
        first: i64,
        count: usize,
        energy_per_sample: f64,
        mut value: impl FnMut(i64, i64) -> Complex64,
    ) -> Result<Self> {
        if !(energy_per_sample >= 0.0 && energy_per_sample.is_finite()) {
            return Err(Error::Input(format!(
                "energy per sample must be finite and nonnegative, got {energy_per_sample}"
            )));
        }
        let symbols = (0..count as i64)
            .map(|offset| {
                let m = first + offset;
                let mut bins = vec![Complex64::new(0.0, 0.0); config.n];
                for &k in &config.used {
                    bins[config.bin(k)] = value(k, m);
                }
                bins
            })
            .collect();
        Ok(Self {
            n: config.n,
            first,
            symbols,
            energy_per_sample,
        })
    }

    /// i.i.d. symbols from `alphabet`, drawn subcarrier-major within each
    /// symbol in ascending `k`.
    pub fn random<R: Rng + ?Sized>(
        config: &OfdmConfig,
        first: i64,
        count: usize,
        energy_per_sample: f64,
        alphabet: Alphabet,
        rng: &mut R,
    ) -> Result<Self> {
        Self::from_fn(config, first, count, energy_per_sample, |_, _| alphabet.draw(rng))
    }

    pub fn energy_per_sample(&self) -> f64 {
        self.energy_per_sample
    }

    pub fn symbol_range(&self) -> std::ops::Range<i64> {
        self.first..self.first + self.symbols.len() as i64
    }

    fn bins(&self, m: i64) -> Result<&[Complex64]> {
        usize::try_from(m - self.first)
            .ok()
            .and_then(|i| self.symbols.get(i))
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::Input(format!(
                    "symbol {m} missing from stream covering {:?}",
                    self.symbol_range()
                ))
            })
    }

    /// `S[k; m]`, zero on unused subcarriers.
    pub fn get(&self, k: i64, m: i64) -> Result<Complex64> {
        let bins = self.bins(m)?;
        Ok(bins[k.rem_euclid(self.n as i64) as usize])
    }
}

/// Time-domain samples of one OFDM symbol including its cyclic prefix.
#[derive(Debug, Clone)]
pub struct TimeSymbol {
    n_cp: usize,
    samples: Vec<Complex64>,
}

impl TimeSymbol {
    /// Sample at local index `j` in `-n_cp..n`.
    pub fn sample(&self, j: i64) -> Complex64 {
        self.samples[(j + self.n_cp as i64) as usize]
    }

    /// All samples in order `-n_cp..n`.
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
}

/// FFT output of one receive window, indexed by signed subcarrier.
#[derive(Debug, Clone)]
pub struct Spectrum {
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn get(&self, l: i64) -> Complex64 {
        self.bins[l.rem_euclid(self.bins.len() as i64) as usize]
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }
}

/// Per-subcarrier received power of one transmitter at a given offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubcarrierPower {
    pub subcarrier: i64,
    pub useful: f64,
    pub total: f64,
    /// Zero for analytic profiles.
    pub stderr_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub offset: i64,
    pub per_subcarrier: Vec<SubcarrierPower>,
}

impl PowerProfile {
    pub fn get(&self, subcarrier: i64) -> Option<&SubcarrierPower> {
        self.per_subcarrier
            .binary_search_by_key(&subcarrier, |p| p.subcarrier)
            .ok()
            .map(|i| &self.per_subcarrier[i])
    }

    /// CSV with header `subcarrier,useful,total,stderr_total`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["subcarrier", "useful", "total", "stderr_total"])?;
        for p in &self.per_subcarrier {
            w.write_record([
                p.subcarrier.to_string(),
                p.useful.to_string(),
                p.total.to_string(),
                p.stderr_total.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Modulator/demodulator pair for one [`OfdmConfig`], holding FFT plans.
#[derive(Clone)]
pub struct OfdmModem {
    config: OfdmConfig,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModem").field("config", &self.config).finish()
    }
}

impl OfdmModem {
    pub fn new(config: OfdmConfig) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(config.n);
        let inverse = planner.plan_fft_inverse(config.n);
        Self {
            config,
            forward,
            inverse,
        }
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.config
    }

    /// `s[n; m] = sqrt(E)/N * sum_k S[k; m] exp(j 2 pi k n / N)` for
    /// `n = -n_cp..n`. The prefix is the periodic extension, so
    /// `s[-j] = s[N - j]`.
    pub fn modulate_symbol(&self, stream: &SymbolStream, m: i64) -> Result<TimeSymbol> {
        let n = self.config.n;
        if stream.n != n {
            return Err(Error::Input(format!(
                "stream built for N = {}, modem uses N = {n}",
                stream.n
            )));
        }
        let mut body = stream.bins(m)?.to_vec();
        self.inverse.process(&mut body);
        let scale = stream.energy_per_sample.sqrt() / n as f64;
        let n_cp = self.config.n_cp;
        let samples = body[n - n_cp..]
            .iter()
            .chain(body.iter())
            .map(|&s| s * scale)
            .collect();
        Ok(TimeSymbol { n_cp, samples })
    }

    /// The `N` samples the receiver feeds to its FFT for symbol `m` when its
    /// window is misaligned by `d` samples.
    pub fn receive_window(&self, stream: &SymbolStream, d: i64, m: i64) -> Result<Vec<Complex64>> {
        let case = TimingCase::classify(&self.config, d)?;
        let n = self.config.n as i64;
        let n_cp = self.config.n_cp as i64;
        let span = n + n_cp;
        let current = self.modulate_symbol(stream, m)?;
        let window = match case {
            TimingCase::NextSymbol => {
                let next = self.modulate_symbol(stream, m + 1)?;
                (0..n).map(|i| next.sample(i - d - span)).collect()
            }
            TimingCase::EarlySplice => {
                let next = self.modulate_symbol(stream, m + 1)?;
                (0..n)
                    .map(|i| {
                        if i <= n - 1 + d {
                            current.sample(i - d)
                        } else {
                            next.sample(i - (n + d) - n_cp)
                        }
                    })
                    .collect()
            }
            TimingCase::WithinPrefix => (0..n).map(|i| current.sample(i - d)).collect(),
            TimingCase::LateSplice => {
                let prev = self.modulate_symbol(stream, m - 1)?;
                (0..n)
                    .map(|i| {
                        if i < d - n_cp {
                            prev.sample(i + span - d)
                        } else {
                            current.sample(i - d)
                        }
                    })
                    .collect()
            }
        };
        Ok(window)
    }

    /// `Y[l] = sum_n window[n] exp(-j 2 pi l n / N)`.
    pub fn demodulate_window(&self, window: &[Complex64]) -> Result<Spectrum> {
        if window.len() != self.config.n {
            return Err(Error::Input(format!(
                "window has {} samples, expected {}",
                window.len(),
                self.config.n
            )));
        }
        let mut bins = window.to_vec();
        self.forward.process(&mut bins);
        Ok(Spectrum { bins })
    }

    /// Monte Carlo estimate of the per-subcarrier received power at offset
    /// `d`, averaged over `trials` independent unit-energy streams.
    ///
    /// Trial `t` draws its symbols from a ChaCha8 stream selected by
    /// `(seed, t)`, and partial sums are reduced in a fixed batch order, so
    /// the result does not depend on the rayon pool size.
    pub fn empirical_power_profile(
        &self,
        d: i64,
        trials: usize,
        seed: u64,
        alphabet: Alphabet,
    ) -> Result<PowerProfile> {
        TimingCase::classify(&self.config, d)?;
        if trials == 0 {
            return Err(Error::Input("trials must be at least 1".into()));
        }
        const BATCH: usize = 64;
        let used = self.config.used.len();
        let batches: Vec<std::ops::Range<usize>> = (0..trials)
            .step_by(BATCH)
            .map(|start| start..(start + BATCH).min(trials))
            .collect();

        let partials: Vec<Result<PowerAccumulator>> = batches
            .into_par_iter()
            .map(|range| {
                let mut acc = PowerAccumulator::new(used);
                for t in range {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(t as u64);
                    let stream = SymbolStream::random(&self.config, -1, 3, 1.0, alphabet, &mut rng)?;
                    let window = self.receive_window(&stream, d, 0)?;
                    let spectrum = self.demodulate_window(&window)?;
                    for (i, &l) in self.config.used.iter().enumerate() {
                        let y = spectrum.get(l);
                        let p = y.norm_sqr();
                        acc.sum[i] += p;
                        acc.sum_sq[i] += p * p;
                        acc.cross[i] += y * stream.get(l, 0)?.conj();
                    }
                }
                Ok(acc)
            })
            .collect();

        let mut total = PowerAccumulator::new(used);
        for partial in partials {
            total.merge(&partial?);
        }

        let count = trials as f64;
        let per_subcarrier = self
            .config
            .used
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let mean = total.sum[i] / count;
                let var = if trials > 1 {
                    ((total.sum_sq[i] - count * mean * mean) / (count - 1.0)).max(0.0)
                } else {
                    0.0
                };
                SubcarrierPower {
                    subcarrier: l,
                    useful: (total.cross[i] / count).norm_sqr(),
                    total: mean,
                    stderr_total: (var / count).sqrt(),
                }
            })
            .collect();
        Ok(PowerProfile {
            offset: d,
            per_subcarrier,
        })
    }
}

struct PowerAccumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    cross: Vec<Complex64>,
}

impl PowerAccumulator {
    fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
            cross: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn merge(&mut self, other: &Self) {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
            self.cross[i] += other.cross[i];
        }
    }
}

/// `sin^2(pi a dk / N) / sin^2(pi dk / N)` for `dk != 0 mod N`.
fn dirichlet_ratio(a: i64, dk: i64, n: usize) -> f64 {
    let x = PI * dk as f64 / n as f64;
    let num = (x * a as f64).sin();
    let den = x.sin();
    (num * num) / (den * den)
}

/// Per-subcarrier useful and total received power at integer offset `d`,
/// for unit channel gain and unit energy, averaged over i.i.d. zero-mean
/// unit-variance symbols.
pub fn analytic_power_profile(config: &OfdmConfig, d: i64) -> Result<PowerProfile> {
    let case = TimingCase::classify(config, d)?;
    let n = config.n as i64;
    let n_cp = config.n_cp as i64;
    let nf = n as f64;
    // Samples of the window taken from each of the two spliced symbols.
    let (main, spill) = match case {
        TimingCase::NextSymbol => (0, 0),
        TimingCase::WithinPrefix => (n, 0),
        TimingCase::EarlySplice => (n + d, -d),
        TimingCase::LateSplice => (n + n_cp - d, d - n_cp),
    };
    let per_subcarrier = config
        .used
        .iter()
        .map(|&l| {
            let (useful, total) = match case {
                TimingCase::NextSymbol => (0.0, 1.0),
                TimingCase::WithinPrefix => (1.0, 1.0),
                TimingCase::EarlySplice | TimingCase::LateSplice => {
                    let useful = (main as f64 / nf).powi(2);
                    let leakage: f64 = config
                        .used
                        .iter()
                        .filter(|&&k| k != l)
                        .map(|&k| dirichlet_ratio(main, k - l, config.n))
                        .sum();
                    let direct = ((main * main + spill * spill) as f64) / (nf * nf);
                    (useful, direct + 2.0 * leakage / (nf * nf))
                }
            };
            SubcarrierPower {
                subcarrier: l,
                useful,
                total,
                stderr_total: 0.0,
            }
        })
        .collect();
    Ok(PowerProfile {
        offset: d,
        per_subcarrier,
    })
}

/// Closed-form FFT output `Y[l; m]` at offset `d`, written directly in terms
/// of the data symbols (no time-domain splice). Serves as an independent
/// route to `demodulate_window(receive_window(..))`.
pub fn closed_form_bin(
    config: &OfdmConfig,
    stream: &SymbolStream,
    d: i64,
    m: i64,
    l: i64,
) -> Result<Complex64> {
    let case = TimingCase::classify(config, d)?;
    let n = config.n as i64;
    let nf = n as f64;
    let n_cp = config.n_cp as i64;
    let amp = stream.energy_per_sample.sqrt();
    // exp(j 2 pi k x / N)
    let rot = |k: i64, x: i64| Complex64::from_polar(1.0, 2.0 * PI * (k * x) as f64 / nf);
    // (1 - e^{j theta len}) / (1 - e^{j theta}), theta = 2 pi (k - l) / N
    let partial_sum = |dk: i64, len: i64| {
        let one = Complex64::new(1.0, 0.0);
        (one - rot(dk, len)) / (one - rot(dk, 1))
    };

    let y = match case {
        TimingCase::NextSymbol => rot(l, -d - n_cp) * stream.get(l, m + 1)? * amp,
        TimingCase::WithinPrefix => rot(l, -d) * stream.get(l, m)? * amp,
        TimingCase::EarlySplice => {
            let mut y = stream.get(l, m)? * rot(l, -d) * ((n + d) as f64 / nf)
                - stream.get(l, m + 1)? * rot(l, -d - n_cp) * (d as f64 / nf);
            for &k in config.used.iter().filter(|&&k| k != l) {
                let leak = stream.get(k, m)? * rot(k, -d) - stream.get(k, m + 1)? * rot(k, -d - n_cp);
                y += partial_sum(k - l, n + d) * leak / nf;
            }
            y * amp
        }
        TimingCase::LateSplice => {
            let late = d - n_cp;
            let mut y = stream.get(l, m)? * rot(l, -d) * ((n - late) as f64 / nf)
                + stream.get(l, m - 1)? * rot(l, -late) * (late as f64 / nf);
            for &k in config.used.iter().filter(|&&k| k != l) {
                let leak = -stream.get(k, m)? * rot(k, -d) + stream.get(k, m - 1)? * rot(k, -late);
                y += partial_sum(k - l, late) * leak / nf;
            }
            y * amp
        }
    };
    Ok(y)
}
