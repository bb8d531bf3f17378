//! Exit criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use async_ofdm::abstraction::{HypothesisSet, NetworkParams, TimingModel};
use async_ofdm::analytics::{self, QuadratureSpec};
use async_ofdm::cli::dominance_slack;
use async_ofdm::montecarlo::{self, EmpiricalDistribution, SimSpec};
use async_ofdm::ofdm_link::{analytic_power_profile, closed_form_bin, Alphabet, OfdmConfig, OfdmModem, SymbolStream};
use async_ofdm::units::{db_grid, db_to_linear, linear_to_db, sinc};
use async_ofdm::Result;

type Verdict = Result<(bool, String)>;

fn cfg() -> OfdmConfig {
    OfdmConfig::reference()
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

/// Table I budget at a given density and threshold.
fn budget(density: f64, threshold_db: f64) -> NetworkParams {
    NetworkParams::reference()
        .with_density(density)
        .and_then(|p| p.with_threshold(db_to_linear(threshold_db)))
        .expect("valid parameters")
}

fn sigma(c: &OfdmConfig, s: f64) -> TimingModel {
    TimingModel::from_sigma_over_n(c, s).expect("valid timing")
}

const DENSE: f64 = 1.0 / 400.0;
const SPARSE: f64 = 1.0 / 160_000.0;
const SPARSER: f64 = 1.0 / 640_000.0;

// 1. Total per-subcarrier power on interior used subcarriers.
const LINK_OFFSETS: [i64; 5] = [-300, -6, 50, 78, 200];
const LINK_TRIALS: usize = 100_000;
const LINK_EDGE_MARGIN: i64 = 16;
const LINK_TOL: f64 = 0.02;

fn link_total_power() -> Verdict {
    let c = cfg();
    let modem = OfdmModem::new(c.clone());
    let (lo, hi) = (c.used()[0], *c.used().last().unwrap());
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for d in LINK_OFFSETS {
        let profile = modem.empirical_power_profile(d, LINK_TRIALS, (1000 + d) as u64, Alphabet::Qpsk)?;
        let dev = profile
            .per_subcarrier
            .iter()
            .filter(|s| s.subcarrier >= lo + LINK_EDGE_MARGIN && s.subcarrier <= hi - LINK_EDGE_MARGIN)
            .map(|s| (s.total - 1.0).abs())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        parts.push(format!("d={d}: {:.2}%", 100.0 * dev));
    }
    Ok((worst <= LINK_TOL, format!("max |total-1| {} (tol 2%)", parts.join(", "))))
}

// 2. Central-subcarrier SIR at d = n_cp + 6.
fn sir_just_past_prefix() -> Verdict {
    let c = cfg();
    let d = c.n_cp() as i64 + 6;
    let p = analytic_power_profile(&c, d)?;
    let s = p.get(0).expect("subcarrier 0 is used");
    let sir_db = linear_to_db(s.useful / (s.total - s.useful));
    Ok((
        sir_db < 20.0 && (sir_db - 19.3).abs() <= 0.2,
        format!("SIR at d={d}: {sir_db:.3} dB (expect 19.3 +/- 0.2, < 20)"),
    ))
}

// 3. Closed-form bins vs splice-then-DFT for negative offsets.
fn closed_form_equivalence() -> Verdict {
    let c = cfg();
    let modem = OfdmModem::new(c.clone());
    let n = c.n() as i64;
    let n_cp = c.n_cp() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        // Alternate between d < -n and -n <= d < 0.
        let d = if i % 2 == 0 {
            rand::Rng::random_range(&mut rng, -(n + n_cp)..-n)
        } else {
            rand::Rng::random_range(&mut rng, -n..0)
        };
        let alphabet = if i % 3 == 0 { Alphabet::Gaussian } else { Alphabet::Qpsk };
        let stream = SymbolStream::random(&c, -1, 3, 1.0, alphabet, &mut rng)?;
        let spectrum = modem.demodulate_window(&modem.receive_window(&stream, d, 0)?)?;
        let mut scale: f64 = 0.0;
        let mut err: f64 = 0.0;
        for l in -(n / 2)..(n / 2) {
            let direct = spectrum.get(l);
            let closed = closed_form_bin(&c, &stream, d, 0, l)?;
            scale = scale.max(direct.norm());
            err = err.max((direct - closed).norm());
        }
        worst = worst.max(err / scale);
    }
    Ok((worst <= 1e-9, format!("max relative deviation {worst:.2e} over 100 streams (tol 1e-9)")))
}

// 4. Synchronized, interference-limited nearest-transmitter probability.
fn synchronized_nearest() -> Verdict {
    let c = cfg();
    let p = NetworkParams::new(SPARSE, 4.0, f64::INFINITY, 1.0)?;
    let sync = TimingModel::synchronized(&c);
    let want = 1.0 / (1.0 + PI / 4.0);
    let q = analytics::nearest_decoding_prob(&p, &sync, &c, &quad())?;
    let est = montecarlo::estimate_nearest_prob(&p, &sync, &c, &SimSpec::new(10_000, 4)?)?;
    Ok((
        (q - want).abs() <= 1e-4 && est.covers(want),
        format!(
            "quadrature {q:.6} vs {want:.6}; MC {:.4} +/- {:.4}",
            est.mean, est.ci_half_width
        ),
    ))
}

// 5. Interference-limited mean bound.
fn mean_bound() -> Verdict {
    let c = cfg();
    let mut ok = true;
    let mut worst_eq: f64 = 0.0;
    for alpha in [2.5, 3.0, 3.5, 3.8, 4.5] {
        for t_db in [-12.0, -6.0, 0.0, 6.0, 10.0] {
            let p = NetworkParams::new(SPARSE, alpha, f64::INFINITY, db_to_linear(t_db))?;
            let bound = analytics::mean_decodable_upper_bound(alpha, p.threshold)?;
            for s in [0.1, 0.2, 0.4] {
                ok &= analytics::mean_decodable(&p, &sigma(&c, s), &c, &quad())? <= bound;
            }
            let sync = analytics::mean_decodable(&p, &TimingModel::synchronized(&c), &c, &quad())?;
            worst_eq = worst_eq.max((sync - bound).abs() / bound);
        }
    }
    let b = analytics::mean_decodable_upper_bound(3.8, db_to_linear(-9.0))?;
    let expect_b = sinc(2.0 / 3.8) / db_to_linear(-9.0).powf(2.0 / 3.8);
    ok &= worst_eq <= 1e-6 && b < 2.0 && (b - 1.79).abs() < 0.01 && (b - expect_b).abs() < 1e-12;
    Ok((
        ok,
        format!("bound holds on 5x5 grid; synchronized equality {worst_eq:.1e} (tol 1e-6); alpha 3.8, T -9 dB: {b:.4} < 2"),
    ))
}

// 6. Mean decodable loss from asynchrony.
fn asynchrony_loss() -> Verdict {
    let c = cfg();
    let p = budget(DENSE, -4.0);
    let spec = SimSpec::new(2000, 6)?;
    let sync = analytics::mean_decodable(&p, &TimingModel::synchronized(&c), &c, &quad())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, expected) in [(0.0, 0.0), (0.2, 0.21), (0.4, 0.44)] {
        let t = sigma(&c, s);
        let v = analytics::mean_decodable(&p, &t, &c, &quad())?;
        let loss = 1.0 - v / sync;
        let est = montecarlo::estimate_mean_decodable(&p, &t, &c, &spec)?;
        ok &= (loss - expected).abs() <= 0.03 && est.covers(v);
        parts.push(format!(
            "sigma {s}N: {v:.4} loss {:.1}%, MC {:.4} +/- {:.4}",
            100.0 * loss,
            est.mean,
            est.ci_half_width
        ));
    }
    Ok((ok, parts.join("; ")))
}

// 7. Dominance of the truncated-Poisson law and the alpha = 4 closed form.
fn upper_bound_dominance() -> Verdict {
    let c = cfg();
    let t = sigma(&c, 0.2);
    let mut ok = true;
    let mut parts = Vec::new();
    let thresholds_db = [-12.0, 0.0, 10.0];
    let linear: Vec<f64> = thresholds_db.iter().map(|&t| db_to_linear(t)).collect();
    for (i, density) in [SPARSE, SPARSER].into_iter().enumerate() {
        let p = NetworkParams::reference().with_density(density)?;
        let sweep = montecarlo::simulate_sweep(&p, &t, &c, &linear, &SimSpec::new(10_000, 70 + i as u64)?)?;
        for (k, &th) in linear.iter().enumerate() {
            let upper = analytics::upsilon_upper_distribution(&p.with_threshold(th)?, &t, &c, &quad())?;
            let emp = EmpiricalDistribution::from_counts(sweep.counts[k].iter().copied())?;
            let (n, slack) = dominance_slack(&upper, &emp);
            ok &= slack >= 0.0 && emp.max_observed() <= upper.support_max;
            parts.push(format!(
                "density {density:.3e} T {} dB: min slack {slack:.4} at n={n}, TV {:.3}",
                thresholds_db[k],
                emp.total_variation(&upper.pmf)
            ));
        }
    }
    let mut worst: f64 = 0.0;
    for s in [0.0, 0.2, 0.4] {
        for t_db in [-12.0, -6.0, 0.0, 6.0] {
            let p = NetworkParams::reference().with_alpha(4.0)?.with_threshold(db_to_linear(t_db))?;
            let quadrature = analytics::lambda_tilde(&p, &sigma(&c, s), &c, &quad())?;
            let closed = analytics::lambda_tilde_alpha4(&p, &sigma(&c, s), &c, &quad())?;
            worst = worst.max((quadrature - closed).abs() / closed);
        }
    }
    ok &= worst <= 1e-5;
    parts.push(format!("alpha-4 intensity rel. deviation {worst:.1e} (tol 1e-5)"));
    Ok((ok, parts.join("; ")))
}

fn fine_grid() -> Vec<f64> {
    db_grid(-15.0, 10.0, 0.5)
}

/// Largest grid threshold whose nearest-decoding probability is at least 0.5.
fn half_probability_threshold(c: &OfdmConfig, s: f64) -> Result<f64> {
    let mut best = f64::NAN;
    for db in fine_grid() {
        if analytics::nearest_decoding_prob(&budget(DENSE, db), &sigma(c, s), c, &quad())? >= 0.5 {
            best = db;
        }
    }
    Ok(best)
}

// 8. Threshold shift of the nearest-decoding probability.
fn nearest_threshold_shift() -> Verdict {
    let c = cfg();
    let sync = half_probability_threshold(&c, 0.0)?;
    let d2 = sync - half_probability_threshold(&c, 0.2)?;
    let d4 = sync - half_probability_threshold(&c, 0.4)?;
    Ok((
        (d2 - 3.0).abs() <= 1.0 && (d4 - 6.0).abs() <= 1.0,
        format!("synchronized {sync} dB; drop {d2} dB at 0.2N, {d4} dB at 0.4N (expect 3, 6 +/- 1)"),
    ))
}

// 9. Throughput-optimal thresholds.
fn throughput_optimum() -> Verdict {
    let c = cfg();
    let grid = fine_grid();
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, expected) in [(0.0, 5.0), (0.2, -1.0), (0.4, -3.0)] {
        let dense = analytics::optimize_threshold(&budget(DENSE, 0.0), &sigma(&c, s), &c, &grid, &quad())?;
        let sparse = analytics::optimize_threshold(&budget(SPARSE, 0.0), &sigma(&c, s), &c, &grid, &quad())?;
        ok &= (dense.threshold_db - expected).abs() <= 1.0 && (dense.threshold_db - sparse.threshold_db).abs() <= 0.5;
        parts.push(format!("sigma {s}N: {} dB (sparse {} dB)", dense.threshold_db, sparse.threshold_db));
    }
    Ok((ok, parts.join("; ")))
}

// 10. Recovery with multiple timing hypotheses.
const HYPOTHESIS_SPACING: f64 = 150.0;
const RECOVERY_TARGET: f64 = 0.6;

fn hypothesis_recovery() -> Verdict {
    let c = cfg();
    let t = sigma(&c, 0.2);
    let sync = TimingModel::synchronized(&c);
    let layouts = [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)];
    let sets: Vec<HypothesisSet> = layouts
        .iter()
        .map(|&(n1, n2)| HypothesisSet::evenly_spaced(&c, n1, n2, HYPOTHESIS_SPACING))
        .collect::<Result<_>>()?;
    let mut monotone = true;
    let mut fractions = Vec::new();
    let (mut gap_sum, mut recovered_sum) = (0.0, 0.0);
    for db in db_grid(-15.0, 10.0, 0.5) {
        let p = budget(SPARSE, db);
        let s = analytics::mean_decodable(&p, &sync, &c, &quad())?;
        let a = analytics::mean_decodable(&p, &t, &c, &quad())?;
        let values: Vec<f64> = sets
            .iter()
            .map(|h| analytics::mean_decodable_with_hypotheses(&p, &t, h, &quad()))
            .collect::<Result<_>>()?;
        monotone &= values.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
        let three = values[2];
        fractions.push((db, (three - a) / (s - a)));
        gap_sum += s - a;
        recovered_sum += three - a;
    }
    let (worst_db, worst) = fractions.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let best = fractions.iter().map(|f| f.1).fold(f64::MIN, f64::max);
    Ok((
        monotone && worst >= RECOVERY_TARGET,
        format!(
            "monotone {monotone}; 3 hypotheses at spacing {HYPOTHESIS_SPACING}: recovered fraction {:.1}%..{:.1}% (min at {worst_db} dB), aggregate {:.1}% (target {:.0}% at every threshold)",
            100.0 * worst,
            100.0 * best,
            100.0 * recovered_sum / gap_sum,
            100.0 * RECOVERY_TARGET
        ),
    ))
}

// 11. Byte-identical simulate output across worker counts.
fn simulate_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| async_ofdm::Error::Input(e.to_string()))?;
    let mut outputs = Vec::new();
    for workers in [1, 2, 8] {
        let path = dir.path().join(format!("w{workers}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_async-ofdm"))
            .args(["simulate", "--seed", "11", "--trials", "400", "--workers", &workers.to_string(), "--out"])
            .arg(&path)
            .status()
            .map_err(|e| async_ofdm::Error::Input(e.to_string()))?;
        if !status.success() {
            return Ok((false, format!("simulate exited with {status} at {workers} workers")));
        }
        outputs.push(std::fs::read(&path).map_err(|e| async_ofdm::Error::Input(e.to_string()))?);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Ok((same && !outputs[0].is_empty(), format!("{} bytes, identical across 1/2/8 workers: {same}", outputs[0].len())))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("link total power", link_total_power),
        ("SIR just past the prefix", sir_just_past_prefix),
        ("closed-form bins", closed_form_equivalence),
        ("synchronized nearest probability", synchronized_nearest),
        ("interference-limited mean bound", mean_bound),
        ("asynchrony loss", asynchrony_loss),
        ("upper-bound dominance", upper_bound_dominance),
        ("nearest threshold shift", nearest_threshold_shift),
        ("throughput optimum", throughput_optimum),
        ("timing hypotheses", hypothesis_recovery),
        ("simulate determinism", simulate_determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += !pass as usize;
        println!(
            "{} [{:>2}] {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
