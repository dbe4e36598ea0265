use lob_hawkes::calibration::{estimate_series, DimensionSeries, EstimationGrid, EstimationWindow, GridSpec, NonParamOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Univariate exponential Hawkes process by Ogata thinning.
fn hawkes_1d(mu: f64, alpha: f64, beta: f64, horizon: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0;
    let mut excess = 0.0; // Σ α e^{−β(t−t_k)}
    let mut out = Vec::new();
    loop {
        let bound = mu + excess;
        let w = -rng.gen::<f64>().ln() / bound;
        excess *= (-beta * w).exp();
        t += w;
        if t >= horizon {
            return out;
        }
        if rng.gen::<f64>() * bound <= mu + excess {
            out.push(t);
            excess += alpha;
        }
    }
}

fn grid() -> EstimationGrid {
    EstimationGrid::new(GridSpec { base_resolution: 0.01, lin_width: 0.02, n_lin: 10, growth: 1.5, n_log: 8 }).unwrap()
}

#[test]
fn recovers_exponential_kernel_and_baseline() {
    let (mu, alpha, beta, horizon) = (0.5, 2.0, 4.0, 20_000.0);
    let times = hawkes_1d(mu, alpha, beta, horizon, 7);
    let window = EstimationWindow { start: 0.0, end: horizon, tod_bin_seconds: horizon, n_tod_bins: 1 };
    let est = estimate_series(&[DimensionSeries { times, weights: None }], &window, &grid(), &NonParamOptions::default())
        .unwrap();
    let norm = est.norm(0, 0);
    assert!((norm - 0.5).abs() < 0.05, "norm {norm}");
    assert!((est.baselines[0][0] - mu).abs() < 0.1, "mu {}", est.baselines[0][0]);
    // first cell: average of α e^{−βt} over (0, 0.02]
    let g = grid();
    let e = g.edges();
    let expect = alpha * ((-beta * e[0]).exp() - (-beta * e[1]).exp()) / (beta * (e[1] - e[0]));
    assert!((est.values[0][0][0] - expect).abs() < 0.3, "{} vs {expect}", est.values[0][0][0]);
}

#[test]
fn poisson_input_gives_flat_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut series = Vec::new();
    for rate in [1.0, 2.0] {
        let mut t = 0.0;
        let mut times = Vec::new();
        loop {
            t += -rng.gen::<f64>().ln() / rate;
            if t >= 10_000.0 {
                break;
            }
            times.push(t);
        }
        series.push(DimensionSeries { times, weights: None });
    }
    let window = EstimationWindow { start: 0.0, end: 10_000.0, tod_bin_seconds: 5_000.0, n_tod_bins: 2 };
    let est = estimate_series(&series, &window, &grid(), &NonParamOptions::default()).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!(est.norm(i, j).abs() < 0.05, "norm {i}{j} = {}", est.norm(i, j));
        }
        for b in 0..2 {
            let rate = (i + 1) as f64;
            assert!((est.baselines[i][b] - rate).abs() < 0.1 * rate, "{}", est.baselines[i][b]);
        }
    }
}

#[test]
fn coarse_correlations_agree_with_exact_pairs() {
    let times = hawkes_1d(0.5, 2.0, 4.0, 5_000.0, 11);
    let window = EstimationWindow { start: 0.0, end: 5_000.0, tod_bin_seconds: 5_000.0, n_tod_bins: 1 };
    let series = [DimensionSeries { times, weights: None }];
    let exact = NonParamOptions { fine_lag: 1e6, ..NonParamOptions::default() };
    let coarse = NonParamOptions { fine_lag: 0.2, coarse_bin: 0.05, ..NonParamOptions::default() };
    let a = estimate_series(&series, &window, &grid(), &exact).unwrap();
    let b = estimate_series(&series, &window, &grid(), &coarse).unwrap();
    assert!((a.norm(0, 0) - b.norm(0, 0)).abs() < 0.02, "{} vs {}", a.norm(0, 0), b.norm(0, 0));
    assert!((a.baselines[0][0] - b.baselines[0][0]).abs() < 0.02);
}
