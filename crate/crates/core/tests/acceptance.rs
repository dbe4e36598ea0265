//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Arguments that do not start with `-` select
//! criteria by substring, e.g. `cargo test --test acceptance -- sizes`.

mod common;

use std::time::Instant;

use lob_hawkes::calibration::{calibrate, estimate_spread_beta, CalibrationConfig, DayEvents, GridSpec, SpreadOptions};
use lob_hawkes::diagnostics::{compute_residuals, hoeffding_d, ks_two_sample, qq_pairs, StatePath};
use lob_hawkes::hawkes::{effective_intensities, simulate, HawkesModel, Kernel, SimOptions, Simulator};
use lob_hawkes::io::{tables, ModelDocument};
use lob_hawkes::size::{fit_sizes_with, SizeDistribution, DEFAULT_MIN_SAMPLES};
use lob_hawkes::book::BookState;
use lob_hawkes::{ClassifiedEvent, EventRecord, EventType, DIMENSIONS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn classified(out: &lob_hawkes::hawkes::SimulationOutput) -> Vec<ClassifiedEvent> {
    out.events.iter().zip(&out.spreads).map(|(r, &s)| ClassifiedEvent { record: *r, spread_ticks: s }).collect()
}

fn reference_day(model: &HawkesModel, horizon: f64, seed: u64) -> lob_hawkes::hawkes::SimulationOutput {
    simulate(model, &common::reference_sizes(), &common::reference_depth(), &common::reference_book(), horizon, seed)
        .unwrap()
}

fn spread_safety() -> Outcome {
    const SEEDS: u64 = 100;
    const EVENTS: usize = 1_000_000;
    let started = Instant::now();
    let model = common::exponential_model(0.5, 12.0);
    let (sizes, depth) = (common::reference_sizes(), common::reference_depth());
    let (mut negative, mut in_spread_locked, mut short, mut in_spread_total) = (0u64, 0u64, 0u64, 0u64);
    let mut min_spread = i64::MAX;
    for seed in 0..SEEDS {
        let mut sim =
            Simulator::new(&model, &sizes, &depth, common::reference_book(), seed, SimOptions::default()).unwrap();
        let mut n = 0;
        while n < EVENTS {
            let Some(step) = sim.next_event(model.session_length()).unwrap() else {
                short += 1;
                break;
            };
            n += 1;
            let after = sim.book().spread_ticks();
            min_spread = min_spread.min(after).min(step.spread_before);
            if after < 0 || step.spread_before < 0 {
                negative += 1;
            }
            if step.event.event_type.is_in_spread() {
                in_spread_total += 1;
                if step.spread_before <= 0 {
                    in_spread_locked += 1;
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        negative == 0 && in_spread_locked == 0 && short == 0 && secs <= 300.0,
        format!(
            "{SEEDS} seeds x {EVENTS} events in {secs:.0}s; min spread {min_spread}, negative {negative}, \
             in-spread at spread 0: {in_spread_locked}/{in_spread_total}, sessions ended early: {short}"
        ),
    )
}

fn random_kernel(rng: &mut ChaCha8Rng) -> Kernel {
    if rng.gen_bool(0.4) {
        return Kernel::zero();
    }
    // mostly inhibitory, some far stronger than any baseline
    let alpha = if rng.gen_bool(0.7) { -rng.gen_range(0.1..50.0) } else { rng.gen_range(0.0..5.0) };
    if rng.gen_bool(0.5) {
        Kernel::exponential(alpha, rng.gen_range(0.5..50.0)).unwrap()
    } else {
        Kernel::power_law(alpha, rng.gen_range(0.005..0.5), rng.gen_range(1.2..3.0)).unwrap()
    }
}

fn intensity_non_negativity() -> Outcome {
    const MODELS: usize = 100;
    const PROBES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut negative, mut non_finite, mut floored) = (0usize, 0usize, 0usize);
    for _ in 0..MODELS {
        let baselines = (0..DIMENSIONS).map(|_| (0..13).map(|_| rng.gen_range(0.0..2.0)).collect()).collect();
        let kernels = (0..DIMENSIONS).map(|_| (0..DIMENSIONS).map(|_| random_kernel(&mut rng)).collect()).collect();
        let model = HawkesModel::new(baselines, kernels, rng.gen_range(0.1..1.0), 1800.0, 34_200.0).unwrap();
        for _ in 0..PROBES {
            let t = rng.gen_range(0.0..model.session_length());
            let n = rng.gen_range(0..120);
            let span = rng.gen_range(0.01..30.0_f64).min(t);
            let mut times: Vec<f64> = (0..n).map(|_| t - rng.gen_range(0.0..span)).filter(|&s| s < t).collect();
            times.sort_by(f64::total_cmp);
            let history: Vec<EventRecord> = times
                .iter()
                .map(|&s| EventRecord::new(s, EventType::from_index(rng.gen_range(0..DIMENSIONS)).unwrap(), 1))
                .collect();
            let bid = 10_000;
            let depths = [0, 0, 0, 0].map(|_: u64| if rng.gen_bool(0.2) { 0 } else { rng.gen_range(1..500) });
            let book = BookState::with_depths(0.01, bid + rng.gen_range(0..6), bid, depths).unwrap();
            let lambda = effective_intensities(t, &history, &model, &book).unwrap();
            for (i, &l) in lambda.iter().enumerate() {
                if !l.is_finite() {
                    non_finite += 1;
                } else if l < 0.0 {
                    negative += 1;
                }
                let raw = lob_hawkes::hawkes::raw_intensity(EventType::from_index(i).unwrap(), t, &history, &model).unwrap();
                if raw < 0.0 {
                    floored += 1;
                }
            }
        }
    }
    let probes = MODELS * PROBES;
    outcome(
        negative == 0 && non_finite == 0 && floored > 0,
        format!(
            "{probes} probes x {DIMENSIONS} dimensions over {MODELS} inhibitory models; negative {negative}, \
             non-finite {non_finite}, raw intensities below zero (floored) {floored}"
        ),
    )
}

/// Fixed-step simulation of a univariate exponential Hawkes process.
fn brute_force_count(mu: f64, alpha: f64, beta: f64, horizon: f64, dt: f64, rng: &mut ChaCha8Rng) -> u64 {
    let decay = (-beta * dt).exp();
    let steps = (horizon / dt).round() as u64;
    let mut excess = 0.0;
    let mut count = 0;
    for _ in 0..steps {
        if rng.gen::<f64>() < (mu + excess) * dt {
            count += 1;
            excess += alpha;
        }
        excess *= decay;
    }
    count
}

fn one_dimensional_oracle() -> Outcome {
    const SEEDS: u64 = 1000;
    let (mu, alpha, beta) = (1.0, 1.0, 2.0);
    let (horizon, ks_horizon) = (1000.0, 100.0);
    let dim = EventType::LoAskPlus1;
    let mut rates = [0.0; DIMENSIONS];
    rates[dim.index()] = mu;
    let mut model = HawkesModel::poisson(rates, 0.5).unwrap();
    model.set_kernel(dim, dim, Kernel::exponential(alpha, beta).unwrap()).unwrap();
    let sizes = lob_hawkes::size::SizeTable::uniform(SizeDistribution::constant(100).unwrap());
    let depth = common::reference_depth();

    let mut counts = Vec::with_capacity(SEEDS as usize);
    let mut early = Vec::with_capacity(SEEDS as usize);
    for seed in 0..SEEDS {
        let out = simulate(&model, &sizes, &depth, &common::reference_book(), horizon, seed).unwrap();
        counts.push(out.events.len() as f64);
        early.push(out.events.iter().filter(|e| e.time < ks_horizon).count() as f64);
    }
    let n = SEEDS as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let target = mu * horizon / (1.0 - alpha / beta);
    let z = (mean - target) / (sd / n.sqrt());

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let brute: Vec<f64> =
        (0..SEEDS).map(|_| brute_force_count(mu, alpha, beta, ks_horizon, 1e-4, &mut rng) as f64).collect();
    let ks = ks_two_sample(&early, &brute);
    outcome(
        z.abs() <= 3.0 && ks.p_value > 0.01,
        format!(
            "mean count {mean:.1} vs {target:.1} ({z:+.2} SE); counts on [0, {ks_horizon}) vs dt=1e-4 \
             brute force: KS D {:.4}, p {:.3}",
            ks.statistic, ks.p_value
        ),
    )
}

/// Expected bin-count regression target at lag m·Δ: the kernel averaged
/// with triangular weight over ((m−1)Δ, (m+1)Δ).
fn triangle_smoothed(k: &Kernel, first: u64, last: u64, d: f64) -> f64 {
    const N: usize = 40;
    let mut s = 0.0;
    for m in first..=last {
        for q in 0..2 * N {
            let u = -1.0 + (q as f64 + 0.5) / N as f64;
            let tau = (m as f64 + u) * d;
            if tau > 0.0 {
                s += k.value(tau) * (1.0 - u.abs()) / N as f64;
            }
        }
    }
    s / (last - first + 1) as f64
}

fn calibration_round_trip() -> Outcome {
    const DAYS: u64 = 50;
    let started = Instant::now();
    let model = common::reference_model(0.5);
    let days: Vec<DayEvents> = (0..DAYS)
        .map(|d| DayEvents { id: format!("day{d}"), events: classified(&reference_day(&model, 23_400.0, 1000 + d)) })
        .collect();
    let cfg = CalibrationConfig {
        grid: GridSpec { base_resolution: 0.001, lin_width: 0.005, n_lin: 20, growth: 1.3, n_log: 10 },
        ..CalibrationConfig::default()
    };
    let out = calibrate(&days, &cfg, None).unwrap();
    let est = &out.aggregate.mean;
    let grid = &est.grid;

    let (mut se, mut cells) = (0.0, 0usize);
    for i in 0..DIMENSIONS {
        for j in 0..DIMENSIONS {
            for c in 0..grid.n_cells() {
                let (a, b) = grid.lag_range(c);
                let truth = triangle_smoothed(&model.kernels()[i][j], a, b, grid.base());
                se += (est.values[i][j][c] - truth).powi(2);
                cells += 1;
            }
        }
    }
    let mse = se / cells as f64;

    let beta = out.calibrated.model.spread_beta();
    let mid = common::TOD_BINS / 2;
    let u_shaped = est.baselines.iter().all(|b| b[0] > b[mid] && b[common::TOD_BINS - 1] > b[mid]);
    let spearman = est
        .baselines
        .iter()
        .zip(model.baselines())
        .map(|(b, t)| rank_correlation(b, t))
        .fold(f64::INFINITY, f64::min);

    let (mut hits, mut nonzero) = (0, 0);
    for i in 0..DIMENSIONS {
        for j in 0..DIMENSIONS {
            let truth = &model.kernels()[i][j];
            if !truth.is_zero() {
                nonzero += 1;
                hits += usize::from(out.calibrated.fits[i][j].selected == truth.family());
            }
        }
    }
    let share = hits as f64 / nonzero as f64;
    outcome(
        mse <= 1e-3 && (beta - 0.5).abs() <= 0.05 && u_shaped && spearman >= 0.8 && share >= 0.9,
        format!(
            "{DAYS} days in {:.0}s; kernel MSE {mse:.2e}; spread exponent {beta:.4}; U-shape in all dimensions: \
             {u_shaped} (min rank correlation {spearman:.2}); AIC family {hits}/{nonzero}",
            started.elapsed().as_secs_f64()
        ),
    )
}

fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (lob_hawkes::diagnostics::hoeffding::midranks(a), lob_hawkes::diagnostics::hoeffding::midranks(b));
    let n = a.len() as f64;
    let m = (n + 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
    let va: f64 = ra.iter().map(|x| (x - m).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - m).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn residual_self_consistency() -> Outcome {
    let model = common::reference_model(0.5);
    let out = reference_day(&model, 23_400.0, 42);
    let path = StatePath::from_trajectory(&out.events, &out.trajectory, &common::reference_book()).unwrap();
    let series = compute_residuals(&model, &path).unwrap();
    let passed = series.iter().filter(|s| s.ks.is_some_and(|k| k.p_value > 0.05)).count();
    let worst = series
        .iter()
        .filter_map(|s| s.ks.map(|k| (k.p_value, s.event_type.name())))
        .fold((1.0, ""), |a, b| if b.0 < a.0 { b } else { a });
    outcome(
        passed >= 10,
        format!("{} events; {passed}/12 dimensions pass KS at 5%; lowest p {:.3} ({})", out.events.len(), worst.0, worst.1),
    )
}

fn size_model() -> Outcome {
    const N: usize = 100_000;
    let truth = SizeDistribution::new(
        vec![1, 10, 50, 100, 200, 500],
        vec![0.05, 0.05, 0.1, 0.3, 0.1, 0.02],
        0.38,
        0.02,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let samples: Vec<u64> = (0..N).map(|_| truth.sample(&mut rng)).collect();
    let fit = fit_sizes_with(&samples, truth.spike_points(), DEFAULT_MIN_SAMPLES).unwrap();
    let weight_err = fit
        .dist
        .spike_weights()
        .iter()
        .zip(truth.spike_weights())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let p_err = (fit.dist.geom_p() - truth.geom_p()).abs();

    // chi-squared of a fresh sample against the pmf, bins merged to E >= 5
    let fresh: Vec<u64> = (0..N).map(|_| truth.sample(&mut rng)).collect();
    const KMAX: u64 = 5000;
    let mut observed = vec![0u64; KMAX as usize + 1];
    for &k in &fresh {
        observed[(k.min(KMAX)) as usize] += 1;
    }
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut e_acc, mut o_acc, mut covered) = (0.0, 0u64, 0.0);
    for k in 1..KMAX {
        let p = truth.pmf(k);
        covered += p;
        e_acc += p * N as f64;
        o_acc += observed[k as usize];
        if e_acc >= 5.0 {
            stat += (o_acc as f64 - e_acc).powi(2) / e_acc;
            bins += 1;
            e_acc = 0.0;
            o_acc = 0;
        }
    }
    // remainder and tail share one bin
    e_acc += (1.0 - covered).max(0.0) * N as f64;
    o_acc += observed[KMAX as usize];
    if e_acc > 0.0 {
        stat += (o_acc as f64 - e_acc).powi(2) / e_acc;
        bins += 1;
    }
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    outcome(
        weight_err <= 0.01 && p_err <= 0.002 && p_value > 0.01,
        format!(
            "n={N}: max spike-weight error {weight_err:.4}, geom_p error {p_err:.5}; sampler chi-squared \
             {stat:.1} on {} df, p {p_value:.3}",
            bins - 1
        ),
    )
}

fn hoeffding_machinery() -> Outcome {
    const N: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..N).map(|_| rng.gen()).collect();
    let y: Vec<f64> = (0..N).map(|_| rng.gen()).collect();
    let indep = hoeffding_d(&x, &y).unwrap();

    // tied values like sizes against short-window counts
    let sizes = common::reference_sizes();
    let dist = sizes.get(EventType::LoAsk0).unwrap();
    let poisson = Poisson::new(0.3).unwrap();
    let xs: Vec<f64> = (0..N).map(|_| dist.sample(&mut rng) as f64).collect();
    let ys: Vec<f64> = (0..N).map(|_| poisson.sample(&mut rng)).collect();
    let tied = hoeffding_d(&xs, &ys).unwrap();

    let same = hoeffding_d(&x, &x).unwrap();
    let noise = Normal::new(0.0, 0.05).unwrap();
    let jittered: Vec<f64> = x.iter().map(|v| v + noise.sample(&mut rng)).collect();
    let near = hoeffding_d(&x, &jittered).unwrap();

    let z = indep.d / indep.null_sd;
    let zt = tied.d / tied.null_sd;
    outcome(
        z.abs() <= 3.0 && zt.abs() <= 3.0 && same.d > 0.1 && near.d > 0.1,
        format!(
            "independent n={N}: D {:.2e} ({z:+.2} sd), with ties {:.2e} ({zt:+.2} sd); Y=X: D {:.3}; \
             Y=X+noise: D {:.3}",
            indep.d, tied.d, same.d, near.d
        ),
    )
}

fn spread_exponent() -> Outcome {
    const DAYS: u64 = 30;
    let model = common::reference_model(0.41);
    let days: Vec<Vec<ClassifiedEvent>> =
        (0..DAYS).map(|d| classified(&reference_day(&model, 23_400.0, 500 + d))).collect();
    let refs: Vec<&[ClassifiedEvent]> = days.iter().map(Vec::as_slice).collect();
    let est = estimate_spread_beta(&refs, 0.0, 23_400.0, &SpreadOptions::default()).unwrap();
    outcome(
        (est.beta - 0.41).abs() <= 0.05 && est.r_squared >= 0.8,
        format!("{DAYS} days: exponent {:.4} (truth 0.41), R² {:.3}, {} groups", est.beta, est.r_squared, est.groups.len()),
    )
}

/// Simulate, calibrate and diagnose once; everything serialized to bytes.
fn pipeline_bytes() -> Vec<Vec<u8>> {
    let model = common::reference_model(0.5);
    let horizon = 3600.0;
    let mut out = Vec::new();
    let runs: Vec<_> = (0..3).map(|d| reference_day(&model, horizon, 70 + d)).collect();
    for run in &runs {
        let mut buf = Vec::new();
        tables::write_classified(&mut buf, &classified(run)).unwrap();
        tables::write_trajectory(&mut buf, &run.trajectory).unwrap();
        out.push(buf);
    }
    let days: Vec<DayEvents> =
        runs.iter().enumerate().map(|(k, r)| DayEvents { id: format!("d{k}"), events: classified(r) }).collect();
    let cfg = CalibrationConfig {
        grid: GridSpec { base_resolution: 0.001, lin_width: 0.005, n_lin: 20, growth: 1.3, n_log: 10 },
        window_end: Some(horizon),
        ..CalibrationConfig::default()
    };
    let cal = calibrate(&days, &cfg, None).unwrap();
    out.push(serde_json::to_vec(&ModelDocument::from_calibrated(&cal.calibrated)).unwrap());
    out.push(serde_json::to_vec(&cal.calibrated.kernel_report()).unwrap());
    out.push(serde_json::to_vec(&cal.aggregate.report).unwrap());

    let path = StatePath::from_trajectory(&runs[0].events, &runs[0].trajectory, &common::reference_book()).unwrap();
    let series = compute_residuals(&model, &path).unwrap();
    let mut buf = Vec::new();
    tables::write_residuals(&mut buf, &series).unwrap();
    let qq: Vec<_> = series.iter().map(|s| (s.event_type, qq_pairs(&s.taus, 20).unwrap())).collect();
    tables::write_qq(&mut buf, &qq).unwrap();
    out.push(buf);
    out
}

fn pipeline_determinism() -> Outcome {
    let a = pipeline_bytes();
    let b = pipeline_bytes();
    let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    let bytes: usize = a.iter().map(Vec::len).sum();
    outcome(
        differing == 0 && a.len() == b.len(),
        format!("{} artefacts ({bytes} bytes) from simulate, calibrate and diagnose; {differing} differ", a.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("spread_safety", spread_safety),
        ("intensity_non_negativity", intensity_non_negativity),
        ("one_dimensional_oracle", one_dimensional_oracle),
        ("calibration_round_trip", calibration_round_trip),
        ("residual_self_consistency", residual_self_consistency),
        ("size_model", size_model),
        ("hoeffding_machinery", hoeffding_machinery),
        ("spread_exponent", spread_exponent),
        ("pipeline_determinism", pipeline_determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let result = run();
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("{status} {name} ({:.1}s): {}", started.elapsed().as_secs_f64(), result.detail);
        failed += usize::from(!result.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
