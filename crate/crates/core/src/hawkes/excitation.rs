//! Incremental excitation bookkeeping.
//!
//! Exponential kernels are tracked through one decaying sum per distinct
//! (source, decay rate); other families keep a window of recent source
//! event times truncated at a lookback horizon.

use std::collections::VecDeque;

use crate::event::DIMENSIONS;
use crate::hawkes::kernel::Kernel;
use crate::hawkes::model::HawkesModel;

/// Default relative tail mass dropped when truncating slow kernels.
pub const DEFAULT_TAIL_TOL: f64 = 1e-4;
/// Default hard cap on the lookback of windowed kernels, seconds.
pub const DEFAULT_MAX_LOOKBACK: f64 = 600.0;

#[derive(Debug, Clone)]
struct ExpSum {
    source: usize,
    beta: f64,
    value: f64,
}

#[derive(Debug, Clone)]
struct WindowTerm {
    source: usize,
    kernel: Kernel,
    lookback: f64,
}

#[derive(Debug, Clone)]
pub struct ExcitationState {
    time: f64,
    sums: Vec<ExpSum>,
    // per target: (index into sums, alpha)
    exp_terms: Vec<Vec<(usize, f64)>>,
    // per source: indices into sums
    sums_by_source: Vec<Vec<usize>>,
    window_terms: Vec<Vec<WindowTerm>>,
    windows: Vec<VecDeque<f64>>,
    window_len: Vec<f64>,
}

impl ExcitationState {
    pub fn new(model: &HawkesModel) -> Self {
        Self::with_lookback(model, DEFAULT_TAIL_TOL, DEFAULT_MAX_LOOKBACK)
    }

    pub fn with_lookback(model: &HawkesModel, tail_tol: f64, max_lookback: f64) -> Self {
        let mut sums: Vec<ExpSum> = Vec::new();
        let mut exp_terms = vec![Vec::new(); DIMENSIONS];
        let mut sums_by_source = vec![Vec::new(); DIMENSIONS];
        let mut window_terms = vec![Vec::new(); DIMENSIONS];
        let mut window_len = vec![0.0f64; DIMENSIONS];
        for (i, row) in model.kernels().iter().enumerate() {
            for (j, k) in row.iter().enumerate() {
                if k.is_zero() {
                    continue;
                }
                match *k {
                    Kernel::Exponential { alpha, beta } => {
                        let idx = match sums.iter().position(|s| s.source == j && s.beta == beta) {
                            Some(idx) => idx,
                            None => {
                                sums.push(ExpSum { source: j, beta, value: 0.0 });
                                sums_by_source[j].push(sums.len() - 1);
                                sums.len() - 1
                            }
                        };
                        exp_terms[i].push((idx, alpha));
                    }
                    _ => {
                        let lookback = k.lookback(tail_tol).min(max_lookback);
                        window_len[j] = window_len[j].max(lookback);
                        window_terms[i].push(WindowTerm { source: j, kernel: k.clone(), lookback });
                    }
                }
            }
        }
        Self {
            time: 0.0,
            sums,
            exp_terms,
            sums_by_source,
            window_terms,
            windows: vec![VecDeque::new(); DIMENSIONS],
            window_len,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Moves the clock forward to `t` without adding events.
    pub fn advance(&mut self, t: f64) {
        let dt = t - self.time;
        debug_assert!(dt >= 0.0, "excitation clock moved backwards");
        if dt > 0.0 {
            for s in &mut self.sums {
                if s.value != 0.0 {
                    s.value *= (-s.beta * dt).exp();
                }
            }
            for (j, w) in self.windows.iter_mut().enumerate() {
                while let Some(&front) = w.front() {
                    if t - front > self.window_len[j] {
                        w.pop_front();
                    } else {
                        break;
                    }
                }
            }
        }
        self.time = t;
    }

    /// Registers an event of dimension `source` at the current time.
    pub fn record(&mut self, source: usize) {
        for &idx in &self.sums_by_source[source] {
            self.sums[idx].value += 1.0;
        }
        if self.window_len[source] > 0.0 {
            self.windows[source].push_back(self.time);
        }
    }

    fn window_fold(&self, target: usize, mut f: impl FnMut(&Kernel, f64, f64)) {
        for term in &self.window_terms[target] {
            for &s in self.windows[term.source].iter().rev() {
                let age = self.time - s;
                if age >= term.lookback {
                    break;
                }
                f(&term.kernel, age, term.lookback);
            }
        }
    }

    /// Σ_j Σ φ_ij(t − T_j) at the current time.
    pub fn excitation(&self, target: usize) -> f64 {
        let mut acc = 0.0;
        for &(idx, alpha) in &self.exp_terms[target] {
            acc += alpha * self.sums[idx].value;
        }
        self.window_fold(target, |k, age, _| acc += k.value(age));
        acc
    }

    /// Bound on the positive excitation at any later time if no event
    /// arrives in between.
    pub fn positive_bound(&self, target: usize) -> f64 {
        let mut acc = 0.0;
        for &(idx, alpha) in &self.exp_terms[target] {
            if alpha > 0.0 {
                acc += alpha * self.sums[idx].value;
            }
        }
        self.window_fold(target, |k, age, _| acc += k.positive_sup_from(age));
        acc
    }

    /// Lower bound of the excitation over `[now, now + h]` with no new events.
    pub fn lower_bound(&self, target: usize, h: f64) -> f64 {
        self.range_in(target, 0.0, h).0
    }

    /// Excitation at `now + dt` with no new events.
    pub fn excitation_in(&self, target: usize, dt: f64) -> f64 {
        let mut acc = 0.0;
        for &(idx, alpha) in &self.exp_terms[target] {
            let s = &self.sums[idx];
            acc += alpha * s.value * (-s.beta * dt).exp();
        }
        self.window_fold(target, |k, age, lookback| {
            if age + dt < lookback {
                acc += k.value(age + dt);
            }
        });
        acc
    }

    /// Bounds (low, high) of the excitation over `[now + d0, now + d1]`
    /// with no new events.
    pub fn range_in(&self, target: usize, d0: f64, d1: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(idx, alpha) in &self.exp_terms[target] {
            let s = &self.sums[idx];
            let a = alpha * s.value * (-s.beta * d0).exp();
            let b = alpha * s.value * (-s.beta * d1).exp();
            lo += a.min(b);
            hi += a.max(b);
        }
        self.window_fold(target, |k, age, lookback| {
            let a = age + d0;
            if a >= lookback {
                return;
            }
            let b = age + d1;
            let (l, h) = k.range_on(a, b.min(lookback));
            if b > lookback {
                lo += l.min(0.0);
                hi += h.max(0.0);
            } else {
                lo += l;
                hi += h;
            }
        });
        (lo, hi)
    }

    /// ∫ of the excitation over `[now, now + h]` with no new events.
    pub fn integral(&self, target: usize, h: f64) -> f64 {
        self.integral_in(target, 0.0, h)
    }

    /// ∫ of the excitation over `[now + d0, now + d1]` with no new events.
    pub fn integral_in(&self, target: usize, d0: f64, d1: f64) -> f64 {
        let mut acc = 0.0;
        for &(idx, alpha) in &self.exp_terms[target] {
            let s = &self.sums[idx];
            // e^{-β d0} (1 − e^{-β (d1 − d0)}) / β
            acc += alpha * s.value * (-s.beta * d0).exp() * (-(-s.beta * (d1 - d0)).exp_m1()) / s.beta;
        }
        self.window_fold(target, |k, age, lookback| {
            let a = (age + d0).min(lookback);
            acc += k.primitive((age + d1).min(lookback)) - k.primitive(a);
        });
        acc
    }
}
