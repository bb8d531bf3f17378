//! Numerical evaluation of the network statistics of an asynchronous PPP
//! network under the first-order SINR model.
//!
//! All statistics share one structure: an expectation over the timing
//! misalignment `D ~ F_D` of a per-offset quantity that vanishes whenever
//! `w(D) <= T / (1 + T)`. The offset integral is split at the kinks of the
//! weight and at the exact roots of `w = T / (1 + T)`, then integrated with
//! Gauss-Legendre panels; the radial integrals are mapped from `[0, inf)` to
//! `[0, 1)` and integrated adaptively.

pub mod quadrature;

use std::f64::consts::PI;

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::abstraction::{interference_factor, HypothesisSet, NetworkParams, OffsetWeight, TimingKind, TimingModel};
use crate::error::{Error, Result};
use crate::ofdm_link::OfdmConfig;
use crate::units::{db_to_linear, sinc};

pub use quadrature::{Integral, QuadratureSpec};

/// Base of the logarithm in the throughput `log(1 + T) E[count]`. The
/// optimal threshold does not depend on it.
pub const THROUGHPUT_LOG_BASE: f64 = std::f64::consts::E;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 2.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::config("network.alpha", "alpha must exceed 2"))
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(Error::config("detection.threshold_db", "threshold must be positive"))
    }
}

/// `E_D[f(D)]` where `f` vanishes wherever `weight(D) <= level`.
fn timing_expectation<W, F>(timing: &TimingModel, weight: &W, level: f64, quad: &QuadratureSpec, f: F) -> Result<Integral>
where
    W: OffsetWeight + ?Sized,
    F: Fn(f64) -> Result<(f64, f64)>,
{
    if let TimingKind::Delta { offset } = timing.kind() {
        let (value, error) = f(offset)?;
        return Ok(Integral { value, error, evaluations: 1 });
    }
    let (lo, hi) = timing.support();
    let mut points = vec![lo, hi];
    points.extend(weight.kinks());
    points.extend(weight.level_crossings(level));
    points.retain(|&x| x >= lo && x <= hi);
    quadrature::integrate_panels(
        |tau| {
            let density = timing.density(tau).unwrap_or(0.0);
            if density == 0.0 {
                return Ok((0.0, 0.0));
            }
            let (v, e) = f(tau)?;
            Ok((v * density, e * density))
        },
        &points,
        quad,
    )
}

fn inner_spec(quad: &QuadratureSpec) -> QuadratureSpec {
    quad.with_rel_tol(quad.rel_tol * 1e-2)
}

/// `int_0^inf exp(-rate v - coef v^power) dv` with its error estimate.
fn decay_integral(rate: f64, coef: f64, power: f64, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    if coef == 0.0 {
        return Ok((1.0 / rate, 0.0));
    }
    let noise_scale = coef.powf(-1.0 / power);
    let scale = if rate > 0.0 { noise_scale.min(1.0 / rate) } else { noise_scale };
    let r = quadrature::integrate_to_infinity(|v| (-rate * v - coef * v.powf(power)).exp(), scale, &inner_spec(quad))?;
    Ok((r.value, r.error))
}

/// Mean number of decodable transmitters under an arbitrary offset weight.
pub fn mean_decodable_weighted<W: OffsetWeight + ?Sized>(
    params: &NetworkParams,
    timing: &TimingModel,
    weight: &W,
    quad: &QuadratureSpec,
) -> Result<Integral> {
    let NetworkParams { density, alpha, snr, threshold } = *params;
    let laplace_coef = density * PI / sinc(2.0 / alpha);
    timing_expectation(timing, weight, params.weight_floor(), quad, |tau| {
        let Some(h) = interference_factor(weight.weight(tau), threshold) else {
            return Ok((0.0, 0.0));
        };
        let rate = laplace_coef * h.powf(2.0 / alpha);
        let (v, e) = decay_integral(rate, h / snr, alpha / 2.0, quad)?;
        Ok((PI * density * v, PI * density * e))
    })
}

/// Mean number of decodable transmitters seen by the typical receiver.
pub fn mean_decodable(params: &NetworkParams, timing: &TimingModel, config: &OfdmConfig, quad: &QuadratureSpec) -> Result<f64> {
    Ok(mean_decodable_weighted(params, timing, config, quad)?.value)
}

/// Mean decodable count when the receiver decodes under every timing
/// hypothesis in `hypotheses`.
pub fn mean_decodable_with_hypotheses(
    params: &NetworkParams,
    timing: &TimingModel,
    hypotheses: &HypothesisSet,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(mean_decodable_weighted(params, timing, hypotheses, quad)?.value)
}

/// Noise-free mean decodable count, `E_D[1{g > T/(1+T)} sinc(2/a) / h^{2/a}]`.
/// Does not depend on the density.
pub fn mean_decodable_interference_limited(
    params: &NetworkParams,
    timing: &TimingModel,
    config: &OfdmConfig,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let NetworkParams { alpha, threshold, .. } = *params;
    let s = sinc(2.0 / alpha);
    let r = timing_expectation(timing, config, params.weight_floor(), quad, |tau| {
        Ok(match interference_factor(config.weight(tau), threshold) {
            Some(h) => (s / h.powf(2.0 / alpha), 0.0),
            None => (0.0, 0.0),
        })
    })?;
    Ok(r.value)
}

/// `sinc(2/alpha) / T^(2/alpha)`, attained when all timing mass lies inside
/// the cyclic prefix.
pub fn mean_decodable_upper_bound(alpha: f64, threshold: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_threshold(threshold)?;
    Ok(sinc(2.0 / alpha) / threshold.powf(2.0 / alpha))
}

/// Intensity of the noise-only thinning that dominates the decodable set.
/// Infinite in the interference-limited regime.
pub fn lambda_tilde(params: &NetworkParams, timing: &TimingModel, config: &OfdmConfig, quad: &QuadratureSpec) -> Result<f64> {
    let NetworkParams { density, alpha, snr, threshold } = *params;
    if snr.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let floor = params.weight_floor();
    let r = timing_expectation(timing, config, floor, quad, |tau| {
        let g = config.weight(tau);
        if g <= floor {
            return Ok((0.0, 0.0));
        }
        let (v, e) = decay_integral(0.0, threshold / (g * snr), alpha / 2.0, quad)?;
        Ok((PI * density * v, PI * density * e))
    })?;
    Ok(r.value)
}

/// Closed form of [`lambda_tilde`] for `alpha = 4`:
/// `(pi^{3/2} lambda / 2) sqrt(SNR / T) E_D[1{g > T/(1+T)} sqrt(g)]`.
pub fn lambda_tilde_alpha4(params: &NetworkParams, timing: &TimingModel, config: &OfdmConfig, quad: &QuadratureSpec) -> Result<f64> {
    if params.alpha != 4.0 {
        return Err(Error::config("network.alpha", "closed form requires alpha = 4"));
    }
    if params.snr.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let floor = params.weight_floor();
    let e = timing_expectation(timing, config, floor, quad, |tau| {
        let g = config.weight(tau);
        Ok((if g > floor { g.sqrt() } else { 0.0 }, 0.0))
    })?;
    Ok(PI.powf(1.5) * params.density / 2.0 * (params.snr / params.threshold).sqrt() * e.value)
}

/// Distribution of a nonnegative integer count on `0..=support_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    pub pmf: Vec<f64>,
    pub support_max: usize,
}

impl CountDistribution {
    /// `floor((1 + T) / T)`, the largest number of simultaneously decodable
    /// transmitters.
    pub fn max_decodable(threshold: f64) -> usize {
        ((1.0 + threshold) / threshold).floor() as usize
    }

    /// Poisson(`rate`) restricted to `0..=floor((1+T)/T)` and renormalized.
    pub fn truncated_poisson(rate: f64, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        if !(rate >= 0.0) {
            return Err(Error::Input(format!("Poisson rate must be nonnegative, got {rate}")));
        }
        let support_max = Self::max_decodable(threshold);
        let mut pmf = vec![0.0; support_max + 1];
        if rate == 0.0 {
            pmf[0] = 1.0;
        } else if rate.is_infinite() {
            pmf[support_max] = 1.0;
        } else {
            let logs: Vec<f64> = (0..=support_max)
                .map(|n| n as f64 * rate.ln() - ln_gamma(n as f64 + 1.0))
                .collect();
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
            let norm: f64 = weights.iter().sum();
            for (p, w) in pmf.iter_mut().zip(&weights) {
                *p = w / norm;
            }
        }
        Ok(Self { pmf, support_max })
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.pmf.get(n).copied().unwrap_or(0.0)
    }

    /// `P(X >= n)`.
    pub fn ccdf(&self, n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        self.pmf.iter().skip(n).sum::<f64>().min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// Truncated-Poisson law that stochastically dominates the decodable count.
pub fn upsilon_upper_distribution(
    params: &NetworkParams,
    timing: &TimingModel,
    config: &OfdmConfig,
    quad: &QuadratureSpec,
) -> Result<CountDistribution> {
    CountDistribution::truncated_poisson(lambda_tilde(params, timing, config, quad)?, params.threshold)
}

/// `rho(x, a) = x^{2/a} int_{x^{-2/a}}^inf dv / (1 + v^{a/2})`.
///
/// Evaluated after the substitution `v = s^{-2/(a-2)}`, which turns the
/// algebraic tail into the finite integral
/// `x^{2/a} q int_0^{x^{(a-2)/a}} ds / (1 + s^{a/(a-2)})`, `q = 2/(a-2)`.
pub fn rho(x: f64, alpha: f64) -> Result<f64> {
    rho_with(x, alpha, &QuadratureSpec::default().with_rel_tol(1e-10))
}

fn rho_with(x: f64, alpha: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_alpha(alpha)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Input(format!("rho requires x > 0, got {x}")));
    }
    let q = 2.0 / (alpha - 2.0);
    let p = alpha / (alpha - 2.0);
    let upper = x.powf((alpha - 2.0) / alpha);
    let f = |s: f64| 1.0 / (1.0 + s.powf(p));
    // The integrand bends sharply at s = 1 when alpha is close to 2.
    let integral = if upper > 1.0 {
        quadrature::integrate(f, 0.0, 1.0, quad)?.value + quadrature::integrate(f, 1.0, upper, quad)?.value
    } else {
        quadrature::integrate(f, 0.0, upper, quad)?.value
    };
    Ok(x.powf(2.0 / alpha) * q * integral)
}

/// Probability that the nearest transmitter is decodable.
pub fn nearest_decoding_prob_weighted<W: OffsetWeight + ?Sized>(
    params: &NetworkParams,
    timing: &TimingModel,
    weight: &W,
    quad: &QuadratureSpec,
) -> Result<Integral> {
    let NetworkParams { density, alpha, snr, threshold } = *params;
    let rho_spec = inner_spec(quad);
    timing_expectation(timing, weight, params.weight_floor(), quad, |tau| {
        let Some(h) = interference_factor(weight.weight(tau), threshold) else {
            return Ok((0.0, 0.0));
        };
        let rate = PI * density * (1.0 + rho_with(h, alpha, &rho_spec)?);
        let (v, e) = decay_integral(rate, h / snr, alpha / 2.0, quad)?;
        Ok((PI * density * v, PI * density * e))
    })
}

pub fn nearest_decoding_prob(params: &NetworkParams, timing: &TimingModel, config: &OfdmConfig, quad: &QuadratureSpec) -> Result<f64> {
    Ok(nearest_decoding_prob_weighted(params, timing, config, quad)?.value.clamp(0.0, 1.0))
}

/// `log(1 + T) E[count]`, natural log.
pub fn system_throughput(params: &NetworkParams, timing: &TimingModel, config: &OfdmConfig, quad: &QuadratureSpec) -> Result<f64> {
    Ok(params.threshold.ln_1p() * mean_decodable(params, timing, config, quad)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOptimum {
    pub threshold_db: f64,
    pub throughput: f64,
    /// `(threshold_db, throughput)` for every grid point.
    pub curve: Vec<(f64, f64)>,
}

/// Grid search for the throughput-maximizing threshold; ties go to the
/// lower threshold.
pub fn optimize_threshold(
    params: &NetworkParams,
    timing: &TimingModel,
    config: &OfdmConfig,
    grid_db: &[f64],
    quad: &QuadratureSpec,
) -> Result<ThresholdOptimum> {
    if grid_db.is_empty() {
        return Err(Error::Input("threshold grid is empty".into()));
    }
    if grid_db.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("threshold grid must be strictly increasing".into()));
    }
    let curve = grid_db
        .par_iter()
        .map(|&db| {
            let p = params.with_threshold(db_to_linear(db))?;
            Ok((db, system_throughput(&p, timing, config, quad)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = curve[0];
    for &point in &curve[1..] {
        if point.1 > best.1 {
            best = point;
        }
    }
    Ok(ThresholdOptimum {
        threshold_db: best.0,
        throughput: best.1,
        curve,
    })
}

/// Laplace transform `E[exp(-s I)]` of the interference from a Rayleigh-faded
/// PPP field of density `lambda` at the origin.
pub fn laplace_interference(s: f64, lambda: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(s >= 0.0) || !(lambda >= 0.0) {
        return Err(Error::Input("laplace transform needs s >= 0 and lambda >= 0".into()));
    }
    Ok((-lambda * PI * s.powf(2.0 / alpha) / sinc(2.0 / alpha)).exp())
}
