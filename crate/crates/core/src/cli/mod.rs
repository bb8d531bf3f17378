//! Command dispatch behind the `async-ofdm` binary. Every command writes one
//! CSV table with a header row.

pub mod config;

use std::io::Write;

use serde::Serialize;

use crate::abstraction::OffsetWeight;
use crate::analytics::{self, CountDistribution, QuadratureSpec};
use crate::error::{Error, Result};
use crate::montecarlo::{self, EmpiricalDistribution, Estimate};
use crate::ofdm_link::{analytic_power_profile, OfdmModem};
use crate::units::db_to_linear;

pub use config::{load_config, Detection, HypothesisSettings, LinkMode, Overrides, RunConfig, Sweep, TimingSpec, DEFAULT_HYPOTHESES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    LinkProfile,
    MeanDecodable,
    Nearest,
    Dist,
    Throughput,
    Hypotheses,
    Simulate,
    Validate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Add Monte Carlo columns next to the analytic values.
    pub monte_carlo: bool,
}

/// `passed` is false only when `validate` found a failing scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub passed: bool,
    pub summary: Option<String>,
}

impl RunReport {
    fn ok() -> Self {
        Self { passed: true, summary: None }
    }
}

pub fn run<W: Write>(command: Command, config: &RunConfig, options: RunOptions, mut out: W) -> Result<RunReport> {
    match command {
        Command::LinkProfile => return link_profile(config, &mut out).map(|_| RunReport::ok()),
        Command::Simulate => return simulate(config, &mut out).map(|_| RunReport::ok()),
        _ => {}
    }
    let mut w = csv::Writer::from_writer(out);
    let report = match command {
        Command::MeanDecodable => mean_decodable(config, options, &mut w).map(|_| RunReport::ok()),
        Command::Nearest => nearest(config, options, &mut w).map(|_| RunReport::ok()),
        Command::Dist => dist(config, options, &mut w).map(|_| RunReport::ok()),
        Command::Throughput => throughput(config, options, &mut w).map(|_| RunReport::ok()),
        Command::Hypotheses => hypotheses(config, options, &mut w).map(|_| RunReport::ok()),
        Command::Validate => validate(config, &mut w),
        Command::LinkProfile | Command::Simulate => unreachable!("handled above"),
    }?;
    w.flush().map_err(csv::Error::from)?;
    Ok(report)
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn link_profile<W: Write>(config: &RunConfig, out: &mut W) -> Result<()> {
    let link = config.link;
    let profile = match link.mode {
        LinkMode::Analytic => analytic_power_profile(&config.ofdm, link.offset)?,
        LinkMode::Empirical => {
            OfdmModem::new(config.ofdm.clone()).empirical_power_profile(link.offset, link.trials, link.seed, link.alphabet)?
        }
    };
    profile.write_csv(out)
}

#[derive(Serialize)]
struct ValueRow {
    timing: &'static str,
    sigma_over_n: Option<f64>,
    threshold_db: f64,
    analytic: f64,
    mc_mean: Option<f64>,
    mc_ci_half_width: Option<f64>,
}

fn split(e: Option<Estimate>) -> (Option<f64>, Option<f64>) {
    (e.map(|e| e.mean), e.map(|e| e.ci_half_width))
}

/// Monte Carlo pass over all configured thresholds for one timing model.
fn sweep_mc<Wt: OffsetWeight + ?Sized>(
    config: &RunConfig,
    timing: &crate::abstraction::TimingModel,
    weight: &Wt,
    thresholds_db: &[f64],
) -> Result<montecarlo::SweepOutcome> {
    let params = config.network_params(thresholds_db[0])?;
    let linear: Vec<f64> = thresholds_db.iter().map(|&t| db_to_linear(t)).collect();
    montecarlo::simulate_sweep(&params, timing, weight, &linear, &config.sim_spec()?)
}

fn value_table<W: Write>(
    config: &RunConfig,
    options: RunOptions,
    w: &mut csv::Writer<W>,
    analytic: impl Fn(&crate::abstraction::NetworkParams, &crate::abstraction::TimingModel) -> Result<f64>,
    mc: impl Fn(&montecarlo::SweepOutcome, usize) -> Estimate,
) -> Result<()> {
    let thresholds = config.detection.thresholds_db();
    for t in config.timings()? {
        let sweep = if options.monte_carlo {
            Some(sweep_mc(config, &t.model, &config.ofdm, &thresholds)?)
        } else {
            None
        };
        for (k, &db) in thresholds.iter().enumerate() {
            let (mc_mean, mc_ci_half_width) = split(sweep.as_ref().map(|s| mc(s, k)));
            w.serialize(ValueRow {
                timing: t.kind,
                sigma_over_n: t.sigma_over_n,
                threshold_db: db,
                analytic: analytic(&config.network_params(db)?, &t.model)?,
                mc_mean,
                mc_ci_half_width,
            })?;
        }
    }
    Ok(())
}

fn mean_decodable<W: Write>(config: &RunConfig, options: RunOptions, w: &mut csv::Writer<W>) -> Result<()> {
    value_table(
        config,
        options,
        w,
        |p, t| analytics::mean_decodable(p, t, &config.ofdm, &quad()),
        |s, k| s.mean_count(k),
    )
}

fn nearest<W: Write>(config: &RunConfig, options: RunOptions, w: &mut csv::Writer<W>) -> Result<()> {
    value_table(
        config,
        options,
        w,
        |p, t| analytics::nearest_decoding_prob(p, t, &config.ofdm, &quad()),
        |s, k| s.nearest_success(k),
    )
}

#[derive(Serialize)]
struct DistRow {
    timing: &'static str,
    sigma_over_n: Option<f64>,
    threshold_db: f64,
    n: usize,
    upper_pmf: f64,
    upper_ccdf: f64,
    mc_pmf: Option<f64>,
    mc_pmf_lo: Option<f64>,
    mc_pmf_hi: Option<f64>,
    mc_ccdf: Option<f64>,
    mc_ccdf_stderr: Option<f64>,
}

fn dist<W: Write>(config: &RunConfig, options: RunOptions, w: &mut csv::Writer<W>) -> Result<()> {
    let thresholds = config.detection.thresholds_db();
    for t in config.timings()? {
        let sweep = if options.monte_carlo {
            Some(sweep_mc(config, &t.model, &config.ofdm, &thresholds)?)
        } else {
            None
        };
        for (k, &db) in thresholds.iter().enumerate() {
            let params = config.network_params(db)?;
            let upper = analytics::upsilon_upper_distribution(&params, &t.model, &config.ofdm, &quad())?;
            let empirical = match &sweep {
                Some(s) => Some(EmpiricalDistribution::from_counts(s.counts[k].iter().copied())?),
                None => None,
            };
            for n in 0..=upper.support_max {
                let e = empirical.as_ref();
                w.serialize(DistRow {
                    timing: t.kind,
                    sigma_over_n: t.sigma_over_n,
                    threshold_db: db,
                    n,
                    upper_pmf: upper.prob(n),
                    upper_ccdf: upper.ccdf(n),
                    mc_pmf: e.map(|e| e.pmf.get(n).copied().unwrap_or(0.0)),
                    mc_pmf_lo: e.map(|e| e.pmf_ci.get(n).map_or(0.0, |c| c.0)),
                    mc_pmf_hi: e.map(|e| e.pmf_ci.get(n).map_or(0.0, |c| c.1)),
                    mc_ccdf: e.map(|e| e.ccdf_at(n)),
                    mc_ccdf_stderr: e.map(|e| e.ccdf_stderr_at(n)),
                })?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ThroughputRow {
    row: &'static str,
    timing: &'static str,
    sigma_over_n: Option<f64>,
    threshold_db: f64,
    throughput: f64,
    mc_mean: Option<f64>,
    mc_ci_half_width: Option<f64>,
}

fn throughput<W: Write>(config: &RunConfig, options: RunOptions, w: &mut csv::Writer<W>) -> Result<()> {
    let thresholds = config.detection.thresholds_db();
    let base = config.network_params(thresholds[0])?;
    for t in config.timings()? {
        let opt = analytics::optimize_threshold(&base, &t.model, &config.ofdm, &thresholds, &quad())?;
        let sweep = if options.monte_carlo {
            Some(sweep_mc(config, &t.model, &config.ofdm, &thresholds)?)
        } else {
            None
        };
        let mc = |k: usize| {
            sweep
                .as_ref()
                .map(|s| s.mean_count(k).scaled(db_to_linear(thresholds[k]).ln_1p()))
        };
        for (k, &(db, xi)) in opt.curve.iter().enumerate() {
            let (mc_mean, mc_ci_half_width) = split(mc(k));
            w.serialize(ThroughputRow {
                row: "grid",
                timing: t.kind,
                sigma_over_n: t.sigma_over_n,
                threshold_db: db,
                throughput: xi,
                mc_mean,
                mc_ci_half_width,
            })?;
        }
        let best = opt.curve.iter().position(|&(db, _)| db == opt.threshold_db).unwrap_or(0);
        let (mc_mean, mc_ci_half_width) = split(mc(best));
        w.serialize(ThroughputRow {
            row: "argmax",
            timing: t.kind,
            sigma_over_n: t.sigma_over_n,
            threshold_db: opt.threshold_db,
            throughput: opt.throughput,
            mc_mean,
            mc_ci_half_width,
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct HypothesisRow {
    timing: &'static str,
    sigma_over_n: Option<f64>,
    threshold_db: f64,
    n1: u32,
    n2: u32,
    delta: f64,
    synchronized: f64,
    asynchronous: f64,
    with_hypotheses: f64,
    recovered_fraction: f64,
    mc_mean: Option<f64>,
    mc_ci_half_width: Option<f64>,
}

fn hypotheses<W: Write>(config: &RunConfig, options: RunOptions, w: &mut csv::Writer<W>) -> Result<()> {
    let h = config.hypotheses.unwrap_or(DEFAULT_HYPOTHESES);
    let set = config.hypothesis_set(h)?;
    let thresholds = config.detection.thresholds_db();
    let sync = crate::abstraction::TimingModel::synchronized(&config.ofdm);
    for t in config.timings()? {
        let sweep = if options.monte_carlo {
            Some(sweep_mc(config, &t.model, &set, &thresholds)?)
        } else {
            None
        };
        for (k, &db) in thresholds.iter().enumerate() {
            let p = config.network_params(db)?;
            let s = analytics::mean_decodable(&p, &sync, &config.ofdm, &quad())?;
            let a = analytics::mean_decodable(&p, &t.model, &config.ofdm, &quad())?;
            let m = analytics::mean_decodable_with_hypotheses(&p, &t.model, &set, &quad())?;
            let (mc_mean, mc_ci_half_width) = split(sweep.as_ref().map(|s| s.mean_count(k)));
            w.serialize(HypothesisRow {
                timing: t.kind,
                sigma_over_n: t.sigma_over_n,
                threshold_db: db,
                n1: h.n1,
                n2: h.n2,
                delta: h.delta,
                synchronized: s,
                asynchronous: a,
                with_hypotheses: m,
                recovered_fraction: (m - a) / (s - a),
                mc_mean,
                mc_ci_half_width,
            })?;
        }
    }
    Ok(())
}

fn simulate<W: Write>(config: &RunConfig, out: &mut W) -> Result<()> {
    let timings = config.timings()?;
    let (Detection::Threshold(db), [t]) = (config.detection, timings.as_slice()) else {
        return Err(Error::config(
            "simulate",
            "raw trial output needs a single threshold and a single timing model",
        ));
    };
    let params = config.network_params(db)?;
    let outcomes = montecarlo::simulate_trials(&params, &t.model, &config.ofdm, &config.sim_spec()?)?;
    montecarlo::write_trials_csv(&outcomes, out)
}

#[derive(Serialize)]
struct ValidateRow {
    scenario: &'static str,
    timing: &'static str,
    sigma_over_n: Option<f64>,
    threshold_db: f64,
    analytic: f64,
    mc_mean: f64,
    mc_ci_half_width: f64,
    pass: bool,
}

/// Relative slack granted on top of the confidence interval.
pub const AGREEMENT_REL_TOL: f64 = 0.02;

pub fn agrees(estimate: &Estimate, value: f64) -> bool {
    (estimate.mean - value).abs() <= estimate.ci_half_width.max(AGREEMENT_REL_TOL * value.abs())
}

fn validate<W: Write>(config: &RunConfig, w: &mut csv::Writer<W>) -> Result<RunReport> {
    let thresholds = config.detection.thresholds_db();
    let (mut passed, mut total) = (0usize, 0usize);
    for t in config.timings()? {
        let sweep = sweep_mc(config, &t.model, &config.ofdm, &thresholds)?;
        for (k, &db) in thresholds.iter().enumerate() {
            let p = config.network_params(db)?;
            let mut emit = |scenario, analytic: f64, est: Estimate, pass: bool| {
                total += 1;
                passed += pass as usize;
                w.serialize(ValidateRow {
                    scenario,
                    timing: t.kind,
                    sigma_over_n: t.sigma_over_n,
                    threshold_db: db,
                    analytic,
                    mc_mean: est.mean,
                    mc_ci_half_width: est.ci_half_width,
                    pass,
                })
            };
            let mean = analytics::mean_decodable(&p, &t.model, &config.ofdm, &quad())?;
            let est = sweep.mean_count(k);
            emit("mean_decodable", mean, est, agrees(&est, mean))?;

            let near = analytics::nearest_decoding_prob(&p, &t.model, &config.ofdm, &quad())?;
            let est = sweep.nearest_success(k);
            emit("nearest_prob", near, est, agrees(&est, near))?;

            // Dominance: report the worst slack over n, with the empirical
            // ccdf at that n as the estimate.
            let upper = analytics::upsilon_upper_distribution(&p, &t.model, &config.ofdm, &quad())?;
            let emp = EmpiricalDistribution::from_counts(sweep.counts[k].iter().copied())?;
            let (worst_n, slack) = dominance_slack(&upper, &emp);
            let est = Estimate {
                mean: emp.ccdf_at(worst_n),
                ci_half_width: 3.0 * emp.ccdf_stderr_at(worst_n),
                trials: emp.trials,
            };
            let cap_ok = emp.max_observed() <= upper.support_max;
            emit("upper_bound_dominance", upper.ccdf(worst_n), est, slack >= 0.0 && cap_ok)?;
        }
    }
    Ok(RunReport {
        passed: passed == total,
        summary: Some(format!("validate: {passed}/{total} scenarios passed")),
    })
}

/// `min_n [P_upper(>= n) - (P_emp(>= n) - 3 stderr)]` and its argmin.
pub fn dominance_slack(upper: &CountDistribution, empirical: &EmpiricalDistribution) -> (usize, f64) {
    let top = upper.support_max.max(empirical.max_observed());
    (0..=top)
        .map(|n| (n, upper.ccdf(n) - (empirical.ccdf_at(n) - 3.0 * empirical.ccdf_stderr_at(n))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty range")
}
