//! Non-parametric kernel and baseline estimation by conditional least
//! squares on discretized counting processes.
//!
//! With bin counts X^j_k at resolution Δ the regression is
//!
//! ```text
//! Y^i_k = Σ_b μ̃_{i,b}·1[k ∈ b] + Σ_j Σ_c θ_{ij,c}·Σ_{m ∈ c} X^j_{k−m} + ε
//! ```
//!
//! where b runs over time-of-day bins and c over grid cells, and
//! φ_ij ≈ θ_{ij,c}/Δ, μ_{i,b} = μ̃_{i,b}/Δ. Y is X reweighted for the
//! targets whose intensity carries a spread factor.
//!
//! The normal equations are built from sufficient statistics rather than
//! the design matrix: lag-lag blocks from histograms of pairwise bin
//! differences (exact up to `fine_lag`, from FFT cross-correlations of
//! coarser counts beyond), intercept blocks from cumulative event counts.
//! The lag-lag blocks treat the sample as translation invariant, i.e. they
//! ignore the truncation of lagged windows at the two ends of the day.

use log::warn;
use nalgebra::{Cholesky, DMatrix};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::calibration::grid::EstimationGrid;
use crate::error::{invalid, Error, Result};
use crate::event::{ClassifiedEvent, EventType, DIMENSIONS};
use crate::hawkes::kernel::Kernel;
use crate::hawkes::model::HawkesModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonParamOptions {
    /// Every dimension needs at least this many target events.
    pub min_events: usize,
    /// Pair differences up to this lag (seconds) are counted exactly.
    pub fine_lag: f64,
    /// Resolution of the FFT correlations used beyond `fine_lag`, seconds.
    pub coarse_bin: f64,
    /// Ridge factor (times the Gram trace) used when the system is singular.
    pub ridge: f64,
}

impl Default for NonParamOptions {
    fn default() -> Self {
        Self { min_events: 50, fine_lag: 1.0, coarse_bin: 0.05, ridge: 1e-8 }
    }
}

/// Rows of the regression: `[start, end)` seconds since session start,
/// split into time-of-day bins of `tod_bin_seconds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationWindow {
    pub start: f64,
    pub end: f64,
    pub tod_bin_seconds: f64,
    pub n_tod_bins: usize,
}

impl EstimationWindow {
    pub fn session(tod_bin_seconds: f64, n_tod_bins: usize) -> Self {
        Self { start: 0.0, end: tod_bin_seconds * n_tod_bins as f64, tod_bin_seconds, n_tod_bins }
    }

    fn validate(&self) -> Result<()> {
        if !(self.start >= 0.0) || !(self.end > self.start) || !self.end.is_finite() {
            return Err(invalid(format!("estimation window [{}, {}) is empty", self.start, self.end)));
        }
        if !(self.tod_bin_seconds > 0.0) || self.n_tod_bins == 0 {
            return Err(invalid("time-of-day binning must have positive width and count"));
        }
        if self.end > self.tod_bin_seconds * self.n_tod_bins as f64 + 1e-9 {
            return Err(invalid("estimation window extends past the last time-of-day bin"));
        }
        Ok(())
    }
}

/// Event times of one dimension and, optionally, per-event target weights.
#[derive(Debug, Clone, Default)]
pub struct DimensionSeries {
    pub times: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonParamEstimate {
    pub grid: EstimationGrid,
    /// `values[i][j][c]`: φ_ij on cell c, 1/s².
    pub values: Vec<Vec<Vec<f64>>>,
    /// `baselines[i][b]`, events/s, projected to be non-negative.
    pub baselines: Vec<Vec<f64>>,
    /// Target events per dimension inside the window.
    pub counts: Vec<usize>,
    pub window: EstimationWindow,
    pub regularized: bool,
    /// Baselines that came out negative and were set to zero.
    pub projected_baselines: usize,
    /// Time-of-day bins without rows, filled with the mean of the others.
    pub filled_bins: Vec<usize>,
}

impl NonParamEstimate {
    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn kernel(&self, i: usize, j: usize) -> Result<Kernel> {
        Kernel::tabulated(self.grid.edges(), self.values[i][j].clone())
    }

    pub fn norm(&self, i: usize, j: usize) -> f64 {
        self.values[i][j].iter().zip(self.grid.widths()).map(|(v, w)| v * w).sum()
    }

    /// A model with tabulated kernels on the estimation grid.
    pub fn to_model(&self, spread_beta: f64, session_start: f64) -> Result<HawkesModel> {
        if self.dims() != DIMENSIONS {
            return Err(invalid(format!("a {}-dimensional estimate is not a book model", self.dims())));
        }
        let kernels = (0..DIMENSIONS)
            .map(|i| (0..DIMENSIONS).map(|j| self.kernel(i, j)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        HawkesModel::new(self.baselines.clone(), kernels, spread_beta, self.window.tod_bin_seconds, session_start)
    }
}

/// Estimates a 12-dimensional model from one day of classified events.
/// In-spread limit orders are weighted by s^(−β) as regression targets.
pub fn estimate_nonparametric(
    events: &[ClassifiedEvent],
    spread_beta: f64,
    window: &EstimationWindow,
    grid: &EstimationGrid,
    opts: &NonParamOptions,
) -> Result<NonParamEstimate> {
    let mut series: Vec<DimensionSeries> = vec![DimensionSeries::default(); DIMENSIONS];
    for e in EventType::ALL.iter().filter(|e| e.is_in_spread()) {
        series[e.index()].weights = Some(Vec::new());
    }
    for ev in events {
        let s = &mut series[ev.event_type().index()];
        s.times.push(ev.time());
        if let Some(w) = s.weights.as_mut() {
            let spread = ev.spread_ticks.max(1) as f64;
            w.push(spread.powf(-spread_beta));
        }
    }
    estimate_series(&series, window, grid, opts)
}

struct Ev {
    bin: i64,
    dim: usize,
    // target weight; zero before the window start
    w: f64,
}

/// Estimator for an arbitrary number of dimensions.
pub fn estimate_series(
    series: &[DimensionSeries],
    window: &EstimationWindow,
    grid: &EstimationGrid,
    opts: &NonParamOptions,
) -> Result<NonParamEstimate> {
    window.validate()?;
    let d = series.len();
    if d == 0 {
        return Err(invalid("no dimensions to estimate"));
    }
    let delta = grid.base();
    let k0 = (window.start / delta).floor() as i64;
    let n_end = (window.end / delta).ceil() as i64;
    let h = grid.max_lag() as i64;
    let n_cells = grid.n_cells();

    let mut events: Vec<Ev> = Vec::new();
    let mut counts = vec![0usize; d];
    for (j, s) in series.iter().enumerate() {
        if let Some(w) = &s.weights {
            if w.len() != s.times.len() {
                return Err(invalid(format!("dimension {j}: weights and times differ in length")));
            }
        }
        for (idx, &t) in s.times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Range(format!("non-finite event time in dimension {j}")));
            }
            if t < 0.0 || t >= window.end {
                continue;
            }
            let bin = (t / delta).floor() as i64;
            let w = if bin >= k0 { s.weights.as_ref().map_or(1.0, |w| w[idx]) } else { 0.0 };
            if bin >= k0 {
                counts[j] += 1;
            }
            events.push(Ev { bin, dim: j, w });
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        if c < opts.min_events {
            return Err(Error::InsufficientData(format!(
                "dimension {j} has {c} events in the window, need {}",
                opts.min_events
            )));
        }
    }
    events.sort_by_key(|e| e.bin);

    // exact pair histograms up to the fine lag
    let l1 = h.min((opts.fine_lag / delta).round() as i64).max(0);
    let fw = (2 * l1 + 1) as usize;
    let mut c_fine = vec![0.0f64; d * d * fw];
    let mut cw_fine = vec![0.0f64; d * d * (l1 as usize + 1)];
    for a in 0..events.len() {
        let ea = &events[a];
        c_fine[(ea.dim * d + ea.dim) * fw + l1 as usize] += 1.0;
        for eb in &events[a + 1..] {
            let dd = eb.bin - ea.bin;
            if dd > l1 {
                break;
            }
            c_fine[(ea.dim * d + eb.dim) * fw + (l1 + dd) as usize] += 1.0;
            c_fine[(eb.dim * d + ea.dim) * fw + (l1 - dd) as usize] += 1.0;
            if dd >= 1 {
                cw_fine[(ea.dim * d + eb.dim) * (l1 as usize + 1) + dd as usize] += eb.w;
            }
        }
    }

    let weighted_targets: Vec<bool> = series.iter().map(|s| s.weights.is_some() || k0 > 0).collect();
    let coarse = if h > l1 {
        let r = ((opts.coarse_bin / delta).round() as i64).max(1);
        Some(CoarseCorrelations::new(&events, d, n_end, h, r, &weighted_targets))
    } else {
        None
    };

    let c_tilde = |j: usize, l: usize, dd: i64| -> f64 {
        if dd.abs() <= l1 {
            c_fine[(j * d + l) * fw + (dd + l1) as usize]
        } else {
            coarse.as_ref().unwrap().density(j, l, dd)
        }
    };
    let cw_tilde = |j: usize, i: usize, dd: i64| -> f64 {
        if dd <= l1 {
            cw_fine[(j * d + i) * (l1 as usize + 1) + dd as usize]
        } else {
            coarse.as_ref().unwrap().weighted_density(j, i, dd)
        }
    };

    // time-of-day bins with at least one row
    let bin_rows: Vec<(i64, i64)> = (0..window.n_tod_bins)
        .map(|b| {
            let lo = ((b as f64 * window.tod_bin_seconds) / delta).round() as i64;
            let hi = (((b + 1) as f64 * window.tod_bin_seconds) / delta).round() as i64;
            let hi = if b + 1 == window.n_tod_bins { hi.max(n_end) } else { hi };
            (lo.max(k0), hi.min(n_end))
        })
        .collect();
    let active: Vec<usize> = (0..window.n_tod_bins).filter(|&b| bin_rows[b].1 > bin_rows[b].0).collect();
    let ka = active.len();
    let p = ka + d * n_cells;
    let col = |j: usize, c: usize| ka + j * n_cells + c;
    let mut g = DMatrix::<f64>::zeros(p, p);

    // intercept block
    for (a, &b) in active.iter().enumerate() {
        g[(a, a)] = (bin_rows[b].1 - bin_rows[b].0) as f64;
    }

    // intercept × lag blocks, exact
    let mut by_dim: Vec<Vec<i64>> = vec![Vec::new(); d];
    for e in &events {
        by_dim[e.dim].push(e.bin);
    }
    for j in 0..d {
        let f2 = CumulativeCounts::new(&by_dim[j]);
        for (a, &b) in active.iter().enumerate() {
            let (r0, r1) = (bin_rows[b].0, bin_rows[b].1 - 1);
            for c in 0..n_cells {
                let (la, lb) = grid.lag_range(c);
                let (la, lb) = (la as i64, lb as i64);
                let v = (f2.f2(r1 - la) - f2.f2(r1 - lb - 1)) - (f2.f2(r0 - 1 - la) - f2.f2(r0 - lb - 2));
                g[(a, col(j, c))] = v as f64;
                g[(col(j, c), a)] = v as f64;
            }
        }
    }

    // lag × lag blocks through anchored double cumulative sums
    let lags: Vec<(i64, i64)> = (0..n_cells).map(|c| (grid.lag_range(c).0 as i64, grid.lag_range(c).1 as i64)).collect();
    let off = h + 1;
    let mut s2 = vec![0.0f64; (2 * h + 2) as usize];
    for j in 0..d {
        for l in j..d {
            let (mut s0_acc, mut s2_acc) = (0.0, 0.0);
            for x in 0..=h {
                s0_acc += c_tilde(j, l, x);
                s2_acc += s0_acc;
                s2[(x + off) as usize] = s2_acc;
            }
            let c0 = c_tilde(j, l, 0);
            let (mut s0_prev, mut s2_prev) = (c0, c0);
            // S0(x) = S0(x+1) − C(x+1), S2(x) = S2(x+1) − S0(x+1)
            for x in (-h - 1..0).rev() {
                let s2_x = s2_prev - s0_prev;
                let s0_x = s0_prev - c_tilde(j, l, x + 1);
                s2[(x + off) as usize] = s2_x;
                s0_prev = s0_x;
                s2_prev = s2_x;
            }
            let at = |x: i64| s2[(x + off) as usize];
            for (c, &(a, b)) in lags.iter().enumerate() {
                for (c2, &(a2, b2)) in lags.iter().enumerate() {
                    let v = at(b - a2) - at(a - 1 - a2) - at(b - b2 - 1) + at(a - b2 - 2);
                    g[(col(j, c), col(l, c2))] = v;
                    g[(col(l, c2), col(j, c))] = v;
                }
            }
        }
    }

    // right-hand sides
    let mut rhs = DMatrix::<f64>::zeros(p, d);
    for e in &events {
        if e.bin < k0 || e.bin >= n_end {
            continue;
        }
        if let Some(a) = active.iter().position(|&b| e.bin >= bin_rows[b].0 && e.bin < bin_rows[b].1) {
            rhs[(a, e.dim)] += e.w;
        }
    }
    let mut cum = vec![0.0f64; h as usize + 1];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for m in 1..=h {
                acc += cw_tilde(j, i, m);
                cum[m as usize] = acc;
            }
            for (c, &(a, b)) in lags.iter().enumerate() {
                rhs[(col(j, c), i)] = cum[b as usize] - cum[(a - 1) as usize];
            }
        }
    }

    let (theta, regularized) = solve_normal_equations(g, rhs, opts.ridge)?;

    let mut values = vec![vec![vec![0.0; n_cells]; d]; d];
    for i in 0..d {
        for j in 0..d {
            for c in 0..n_cells {
                values[i][j][c] = theta[(col(j, c), i)] / delta;
            }
        }
    }
    let mut baselines = vec![vec![0.0; window.n_tod_bins]; d];
    let mut projected = 0;
    for i in 0..d {
        for (a, &b) in active.iter().enumerate() {
            let mu = theta[(a, i)] / delta;
            if mu < 0.0 {
                projected += 1;
                baselines[i][b] = 0.0;
            } else {
                baselines[i][b] = mu;
            }
        }
    }
    if projected > 0 {
        warn!("{projected} negative baseline estimates set to zero");
    }
    let filled: Vec<usize> = (0..window.n_tod_bins).filter(|b| !active.contains(b)).collect();
    if !filled.is_empty() {
        warn!("time-of-day bins {filled:?} have no rows in the window; using the mean baseline");
        for row in baselines.iter_mut() {
            let mean = active.iter().map(|&b| row[b]).sum::<f64>() / ka as f64;
            for &b in &filled {
                row[b] = mean;
            }
        }
    }

    Ok(NonParamEstimate {
        grid: grid.clone(),
        values,
        baselines,
        counts,
        window: *window,
        regularized,
        projected_baselines: projected,
        filled_bins: filled,
    })
}

/// Jacobi-scaled Cholesky solve, with a ridge fallback for singular systems.
fn solve_normal_equations(g: DMatrix<f64>, rhs: DMatrix<f64>, ridge: f64) -> Result<(DMatrix<f64>, bool)> {
    let p = g.nrows();
    let scale: Vec<f64> = (0..p).map(|k| if g[(k, k)] > 0.0 { 1.0 / g[(k, k)].sqrt() } else { 1.0 }).collect();
    let mut gs = g;
    for r in 0..p {
        for c in 0..p {
            gs[(r, c)] *= scale[r] * scale[c];
        }
    }
    let mut rs = rhs;
    for r in 0..p {
        for c in 0..rs.ncols() {
            rs[(r, c)] *= scale[r];
        }
    }
    let mut regularized = false;
    let chol = match Cholesky::new(gs.clone()) {
        Some(ch) => ch,
        None => {
            regularized = true;
            let lambda = ridge * gs.trace();
            warn!("normal equations are singular; adding ridge {lambda:e}");
            for k in 0..p {
                gs[(k, k)] += lambda;
            }
            Cholesky::new(gs).ok_or_else(|| Error::Numerical("normal equations singular after ridge".into()))?
        }
    };
    let mut theta = chol.solve(&rs);
    for r in 0..p {
        for c in 0..theta.ncols() {
            theta[(r, c)] *= scale[r];
        }
    }
    Ok((theta, regularized))
}

/// F2(x) = Σ_{y ≤ x} #{events with bin ≤ y} for one dimension.
struct CumulativeCounts {
    bins: Vec<i64>,
    prefix: Vec<i128>,
}

impl CumulativeCounts {
    fn new(bins: &[i64]) -> Self {
        let mut prefix = Vec::with_capacity(bins.len() + 1);
        prefix.push(0i128);
        for &b in bins {
            prefix.push(prefix.last().unwrap() + b as i128);
        }
        Self { bins: bins.to_vec(), prefix }
    }

    fn f2(&self, x: i64) -> i128 {
        let n = self.bins.partition_point(|&b| b <= x);
        n as i128 * (x as i128 + 1) - self.prefix[n]
    }
}

/// Cross-correlations of coarse bin counts, read as pair densities per base
/// bin with linear interpolation between coarse lags.
struct CoarseCorrelations {
    d: usize,
    r: i64,
    bmax: i64,
    // (j, l) → Σ_u Y_j[u]·Y_l[u+B], B ∈ [−bmax, bmax]
    plain: Vec<Vec<f64>>,
    // (j, i) → Σ_u Y_j[u]·W_i[u+B] for weighted targets i
    weighted: Vec<Option<Vec<f64>>>,
}

impl CoarseCorrelations {
    fn new(events: &[Ev], d: usize, n_end: i64, h: i64, r: i64, weighted_targets: &[bool]) -> Self {
        let m = (n_end + r - 1) / r + 1;
        let bmax = h / r + 2;
        let len = ((m + bmax + 1) as usize).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);

        let mut plain_series = vec![vec![Complex::new(0.0, 0.0); len]; d];
        let mut weighted_series: Vec<Option<Vec<Complex<f64>>>> =
            weighted_targets.iter().map(|&w| w.then(|| vec![Complex::new(0.0, 0.0); len])).collect();
        for e in events {
            let u = (e.bin.max(0) / r) as usize;
            plain_series[e.dim][u].re += 1.0;
            if let Some(s) = weighted_series[e.dim].as_mut() {
                s[u].re += e.w;
            }
        }
        for s in plain_series.iter_mut() {
            fwd.process(s);
        }
        for s in weighted_series.iter_mut().flatten() {
            fwd.process(s);
        }

        let correlate = |a: &[Complex<f64>], b: &[Complex<f64>]| -> Vec<f64> {
            let mut buf: Vec<Complex<f64>> = a.iter().zip(b).map(|(x, y)| x.conj() * y).collect();
            inv.process(&mut buf);
            let n = len as f64;
            (-bmax..=bmax).map(|bb| buf[bb.rem_euclid(len as i64) as usize].re / n).collect()
        };

        let mut plain = vec![Vec::new(); d * d];
        for j in 0..d {
            for l in j..d {
                let v = correlate(&plain_series[j], &plain_series[l]);
                if l != j {
                    plain[l * d + j] = v.iter().rev().copied().collect();
                }
                plain[j * d + l] = v;
            }
        }
        let mut weighted = vec![None; d * d];
        for i in 0..d {
            if let Some(wi) = &weighted_series[i] {
                for j in 0..d {
                    weighted[j * d + i] = Some(correlate(&plain_series[j], wi));
                }
            }
        }
        Self { d, r, bmax, plain, weighted }
    }

    fn interpolate(&self, v: &[f64], dd: i64) -> f64 {
        let x = dd as f64 / self.r as f64;
        let b0 = x.floor();
        let frac = x - b0;
        let at = |b: i64| {
            if b.abs() > self.bmax {
                0.0
            } else {
                v[(b + self.bmax) as usize]
            }
        };
        let b0 = b0 as i64;
        ((1.0 - frac) * at(b0) + frac * at(b0 + 1)) / self.r as f64
    }

    fn density(&self, j: usize, l: usize, dd: i64) -> f64 {
        self.interpolate(&self.plain[j * self.d + l], dd)
    }

    fn weighted_density(&self, j: usize, i: usize, dd: i64) -> f64 {
        match &self.weighted[j * self.d + i] {
            Some(v) => self.interpolate(v, dd),
            None => self.density(j, i, dd),
        }
    }
}
