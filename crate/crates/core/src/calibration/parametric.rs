//! Weighted least-squares fits of exponential and power-law kernels to
//! tabulated point estimates, with AIC model selection.
//!
//! The amplitude enters linearly and is profiled out, so each family is a
//! low-dimensional search: ln β for the exponential, (ln δ, ln(γ−1)) for
//! the power law. A coarse grid locates the basin, then argmin refines it.
//!
//! Tabulated estimates are cell averages, so [`fit_parametric`] compares
//! them with cell averages of the candidate kernels; [`fit_kernel`] fits
//! plain point values.
//!
//! Integral time scales (1/β, δ/(γ−1)) are searched only up to the span of
//! the data: a decay slower than the last estimate is not identified, and
//! letting it drift would inflate the extrapolated norm without limit.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::calibration::nonparam::NonParamEstimate;
use crate::error::{invalid, Error, Result};
use crate::hawkes::kernel::{Kernel, KernelFamily};

const LN_BETA: (f64, f64) = (-6.907_755_278_982_137, 9.210_340_371_976_184); // ln 1e-3, ln 1e4
const LN_DELTA: (f64, f64) = (-11.512_925_464_970_229, 6.907_755_278_982_137); // ln 1e-5, ln 1e3
const LN_GAMMA_M1: (f64, f64) = (-4.605_170_185_988_091, 3.912_023_005_428_146); // ln 0.01, ln 50

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub kernel: Kernel,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub aic: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFit {
    pub selected: KernelFamily,
    pub exponential: FamilyFit,
    pub power_law: FamilyFit,
    /// Set when the selection was forced by a failed fit of one family.
    pub fallback: bool,
}

impl KernelFit {
    pub fn kernel(&self) -> &Kernel {
        match self.selected {
            KernelFamily::PowerLaw => &self.power_law.kernel,
            _ => &self.exponential.kernel,
        }
    }
}

#[derive(Clone, Copy)]
enum Support<'a> {
    /// Evaluation times.
    Points(&'a [f64]),
    /// Cell edges; one more than the values.
    Cells(&'a [f64]),
}

/// Estimates of one kernel with least-squares weights.
struct Points<'a> {
    at: Support<'a>,
    v: &'a [f64],
    w: &'a [f64],
}

impl Points<'_> {
    /// Last evaluation time or cell edge.
    fn span(&self) -> f64 {
        match self.at {
            Support::Points(t) | Support::Cells(t) => t.iter().copied().fold(0.0, f64::max),
        }
    }

    fn ln_beta_box(&self) -> (f64, f64) {
        (LN_BETA.0.max(-self.span().ln()).min(LN_BETA.1 - 1.0), LN_BETA.1)
    }

    fn ln_delta_box(&self) -> (f64, f64) {
        (LN_DELTA.0, LN_DELTA.1.min(self.span().ln()).max(LN_DELTA.0 + 1.0))
    }

    /// Best amplitude for the unit-amplitude basis and the resulting RSS.
    fn profile(&self, basis: impl Fn(usize) -> f64) -> (f64, f64) {
        let (mut wgg, mut wgv, mut wvv) = (0.0, 0.0, 0.0);
        for k in 0..self.v.len() {
            let gk = basis(k);
            wgg += self.w[k] * gk * gk;
            wgv += self.w[k] * gk * self.v[k];
            wvv += self.w[k] * self.v[k] * self.v[k];
        }
        if wgg <= 0.0 || !wgg.is_finite() {
            return (0.0, wvv);
        }
        let alpha = wgv / wgg;
        (alpha, (wvv - wgv * wgv / wgg).max(0.0))
    }

    fn exp_profile(&self, ln_beta: f64) -> (f64, f64) {
        let beta = ln_beta.exp();
        match self.at {
            Support::Points(t) => self.profile(|k| (-beta * t[k]).exp()),
            Support::Cells(e) => self.profile(|k| {
                let w = e[k + 1] - e[k];
                (-beta * e[k]).exp() * -(-beta * w).exp_m1() / (beta * w)
            }),
        }
    }

    fn pl_profile(&self, ln_delta: f64, ln_gm1: f64) -> (f64, f64) {
        let delta = ln_delta.exp();
        let gm1 = ln_gm1.exp();
        let gamma = 1.0 + gm1;
        match self.at {
            Support::Points(t) => self.profile(|k| (-gamma * (t[k] / delta).ln_1p()).exp()),
            Support::Cells(e) => self.profile(|k| {
                let w = e[k + 1] - e[k];
                let head = (-gm1 * (e[k] / delta).ln_1p()).exp();
                let ratio = ((delta + e[k + 1]) / (delta + e[k])).ln();
                delta / (gm1 * w) * head * -(-gm1 * ratio).exp_m1()
            }),
        }
    }

    fn aic(&self, rss: f64, k: usize) -> f64 {
        let n = self.v.len() as f64;
        n * (rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * k as f64
    }
}

struct ExpCost<'a>(&'a Points<'a>);

impl CostFunction for ExpCost<'_> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, p: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.0.exp_profile(*p).1)
    }
}

struct PlCost<'a>(&'a Points<'a>, (f64, f64), f64);

impl CostFunction for PlCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        // keep the search inside the admissible box
        let lng = p[1].clamp(LN_GAMMA_M1.0, LN_GAMMA_M1.1);
        let lnd = p[0].clamp(self.1 .0, self.1 .1.min(self.2 + lng));
        let penalty = (p[0] - lnd).powi(2) + (p[1] - lng).powi(2);
        let rss = self.0.pl_profile(lnd, lng).1;
        Ok(rss * (1.0 + penalty) + penalty * f64::EPSILON)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

fn converged_status(status: &TerminationStatus) -> bool {
    matches!(
        status,
        TerminationStatus::Terminated(TerminationReason::SolverConverged | TerminationReason::TargetCostReached)
    )
}

fn fit_exponential(pts: &Points) -> Result<FamilyFit> {
    const N: usize = 161;
    let (lo, hi) = pts.ln_beta_box();
    let grid: Vec<f64> = linspace(lo, hi, N).collect();
    let rss: Vec<f64> = grid.iter().map(|&u| pts.exp_profile(u).1).collect();
    let best = argmin_index(&rss);
    let interior = best > 0 && best + 1 < N;
    let (lo, hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(N - 1)]);
    let mut ln_beta = grid[best];
    let mut converged = interior;
    if interior {
        let solver = GoldenSectionSearch::new(lo, hi)
            .and_then(|s| s.with_tolerance(1e-10))
            .map_err(|e| Error::Numerical(e.to_string()))?;
        match Executor::new(ExpCost(pts), solver).configure(|s| s.param(grid[best]).max_iters(200)).run() {
            Ok(res) => {
                if let Some(p) = res.state.get_best_param() {
                    if pts.exp_profile(*p).1 <= rss[best] {
                        ln_beta = *p;
                    }
                }
            }
            Err(e) => {
                warn!("exponential refinement failed: {e}");
                converged = false;
            }
        }
    }
    let (alpha, rss) = pts.exp_profile(ln_beta);
    Ok(FamilyFit { kernel: Kernel::exponential(alpha, ln_beta.exp())?, rss, aic: pts.aic(rss, 2), converged })
}

fn fit_power_law(pts: &Points) -> Result<FamilyFit> {
    const ND: usize = 49;
    const NG: usize = 33;
    let dbox = pts.ln_delta_box();
    let ln_span = pts.span().ln();
    let ds: Vec<f64> = linspace(dbox.0, dbox.1, ND).collect();
    let gs: Vec<f64> = linspace(LN_GAMMA_M1.0, LN_GAMMA_M1.1, NG).collect();
    let mut best = (0, 0, f64::INFINITY);
    for (a, &d) in ds.iter().enumerate() {
        for (b, &g) in gs.iter().enumerate() {
            if d > ln_span + g {
                continue;
            }
            let r = pts.pl_profile(d, g).1;
            if r < best.2 {
                best = (a, b, r);
            }
        }
    }
    let start = vec![ds[best.0], gs[best.1]];
    let (sd, sg) = (ds[1] - ds[0], gs[1] - gs[0]);
    let simplex = vec![start.clone(), vec![start[0] + sd, start[1]], vec![start[0], start[1] + sg]];
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-12).map_err(|e| Error::Numerical(e.to_string()))?;
    let (mut p, mut converged) = (start, false);
    match Executor::new(PlCost(pts, dbox, ln_span), solver).configure(|s| s.max_iters(4000)).run() {
        Ok(res) => {
            converged = converged_status(res.state.get_termination_status());
            if let Some(q) = res.state.get_best_param() {
                if pts.pl_profile(q[0], q[1]).1 <= best.2 {
                    p = q.clone();
                }
            }
        }
        Err(e) => warn!("power-law refinement failed: {e}"),
    }
    let inside = |x: f64, (lo, hi): (f64, f64)| x > lo + 1e-6 && x < hi - 1e-6;
    let lng = p[1].clamp(LN_GAMMA_M1.0, LN_GAMMA_M1.1);
    let dmax = dbox.1.min(ln_span + lng);
    converged &= inside(p[0], (dbox.0, dmax)) && inside(p[1], LN_GAMMA_M1);
    let lnd = p[0].clamp(dbox.0, dmax);
    let (alpha, rss) = pts.pl_profile(lnd, lng);
    Ok(FamilyFit {
        kernel: Kernel::power_law(alpha, lnd.exp(), 1.0 + lng.exp())?,
        rss,
        aic: pts.aic(rss, 3),
        converged,
    })
}

fn argmin_index(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (k, &x)| if x < v[best] { k } else { best })
}

/// Fits both families to point values `values` at `times`, weighted by
/// `weights`, and selects the lower AIC.
pub fn fit_kernel(times: &[f64], values: &[f64], weights: &[f64]) -> Result<KernelFit> {
    if times.len() != values.len() {
        return Err(invalid("times and values differ in length"));
    }
    fit_support(Points { at: Support::Points(times), v: values, w: weights })
}

/// Fits cell averages of both families to per-cell `values` on `edges`,
/// weighted by cell width.
pub fn fit_kernel_cells(edges: &[f64], values: &[f64]) -> Result<KernelFit> {
    if edges.len() != values.len() + 1 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] < 0.0 {
        return Err(invalid("cell edges must be ascending from 0 with one more edge than values"));
    }
    let widths: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    fit_support(Points { at: Support::Cells(edges), v: values, w: &widths })
}

fn fit_support(pts: Points) -> Result<KernelFit> {
    let (values, weights) = (pts.v, pts.w);
    if values.len() != weights.len() {
        return Err(invalid("values and weights differ in length"));
    }
    if values.len() < 4 {
        return Err(invalid("at least four points are needed for a three-parameter fit"));
    }
    let coords = match pts.at {
        Support::Points(t) | Support::Cells(t) => t,
    };
    if coords.iter().chain(values).chain(weights).any(|x| !x.is_finite()) || weights.iter().any(|&w| w < 0.0) {
        return Err(invalid("points must be finite with non-negative weights"));
    }
    if values.iter().all(|&v| v == 0.0) {
        let aic_exp = pts.aic(0.0, 2);
        let zero = |kernel| FamilyFit { kernel, rss: 0.0, aic: aic_exp, converged: true };
        return Ok(KernelFit {
            selected: KernelFamily::Exponential,
            exponential: zero(Kernel::zero()),
            power_law: FamilyFit { aic: pts.aic(0.0, 3), ..zero(Kernel::power_law(0.0, 1.0, 2.0)?) },
            fallback: false,
        });
    }
    let exponential = fit_exponential(&pts)?;
    let power_law = fit_power_law(&pts)?;
    let by_aic = if power_law.aic < exponential.aic { KernelFamily::PowerLaw } else { KernelFamily::Exponential };
    let (selected, fallback) = match (exponential.converged, power_law.converged) {
        (true, false) => (KernelFamily::Exponential, by_aic != KernelFamily::Exponential),
        (false, true) => (KernelFamily::PowerLaw, by_aic != KernelFamily::PowerLaw),
        (false, false) => (by_aic, true),
        (true, true) => (by_aic, false),
    };
    Ok(KernelFit { selected, exponential, power_law, fallback })
}

/// Fits every (i, j) entry of an estimate against cell averages.
pub fn fit_parametric(est: &NonParamEstimate) -> Result<Vec<Vec<KernelFit>>> {
    let edges = est.grid.edges();
    let d = est.dims();
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            let fit = fit_kernel_cells(&edges, &est.values[i][j])?;
            if fit.fallback {
                warn!("kernel ({i}, {j}): fit did not converge cleanly, selected {}", fit.selected.name());
            }
            row.push(fit);
        }
        out.push(row);
    }
    Ok(out)
}
