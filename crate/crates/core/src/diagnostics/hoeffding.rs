//! Hoeffding's D test of independence with midrank tie handling.
//!
//! D is scaled so that it lies in [−0.5, 1] and equals 1 for a strictly
//! increasing relationship without ties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{EventRecord, EventType};

pub const MIN_PAIRS: usize = 30;
/// Look-ahead window for counting subsequent arrivals, seconds.
pub const DEFAULT_COUNT_WINDOW: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingResult {
    pub n: usize,
    pub d: f64,
    /// Standard deviation of D under independence for continuous data.
    pub null_sd: f64,
}

/// Midranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut e = k;
        while e + 1 < idx.len() && values[idx[e + 1]] == values[idx[k]] {
            e += 1;
        }
        let r = 0.5 * ((k + 1) + (e + 1)) as f64;
        for &i in &idx[k..=e] {
            ranks[i] = r;
        }
        k = e + 1;
    }
    ranks
}

struct Fenwick(Vec<f64>);

impl Fenwick {
    fn add(&mut self, mut i: usize, v: f64) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over indices < i.
    fn prefix(&self, mut i: usize) -> f64 {
        let mut acc = 0.0;
        while i > 0 {
            acc += self.0[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

/// Bivariate ranks: Q_i = 1 + Σ_{j≠i} c(x_j, x_i)·c(y_j, y_i) with c = 1
/// below, 1/2 at a tie and 0 above.
fn bivariate_ranks(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut ys: Vec<f64> = y.to_vec();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let yk: Vec<usize> = y.iter().map(|v| ys.partition_point(|u| u < v)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(yk[a].cmp(&yk[b])));
    let mut tree = Fenwick(vec![0.0; ys.len() + 1]);
    let mut q = vec![0.0; n];
    let mut g = 0;
    while g < n {
        let mut e = g;
        while e + 1 < n && x[order[e + 1]] == x[order[g]] {
            e += 1;
        }
        // within the x-tie group, sorted by y
        let mut k = g;
        while k <= e {
            let mut f = k;
            while f < e && yk[order[f + 1]] == yk[order[k]] {
                f += 1;
            }
            let below_in_group = (k - g) as f64;
            let tied_in_group = (f - k) as f64;
            for &i in &order[k..=f] {
                let strictly = tree.prefix(yk[i]);
                let y_tied = tree.prefix(yk[i] + 1) - strictly;
                q[i] = 1.0 + strictly + 0.5 * y_tied + 0.5 * below_in_group + 0.25 * tied_in_group;
            }
            k = f + 1;
        }
        for &i in &order[g..=e] {
            tree.add(yk[i], 1.0);
        }
        g = e + 1;
    }
    q
}

/// Standard deviation of D under independence (continuous marginals).
pub fn null_sd(n: usize) -> f64 {
    let n = n as f64;
    (2.0 * (n * n + 5.0 * n - 32.0) / (9.0 * n * (n - 1.0) * (n - 3.0) * (n - 4.0))).sqrt()
}

pub fn hoeffding_d(x: &[f64], y: &[f64]) -> Result<HoeffdingResult> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidParameter(format!("{} x values but {} y values", n, y.len())));
    }
    if n < MIN_PAIRS {
        return Err(Error::InsufficientData(format!("Hoeffding's D needs at least {MIN_PAIRS} pairs, got {n}")));
    }
    let r = midranks(x);
    let s = midranks(y);
    let q = bivariate_ranks(x, y);
    let (mut d1, mut d2, mut d3) = (0.0, 0.0, 0.0);
    for i in 0..n {
        d1 += (q[i] - 1.0) * (q[i] - 2.0);
        d2 += (r[i] - 1.0) * (r[i] - 2.0) * (s[i] - 1.0) * (s[i] - 2.0);
        d3 += (r[i] - 2.0) * (s[i] - 2.0) * (q[i] - 1.0);
    }
    let nf = n as f64;
    let d = 30.0 * ((nf - 2.0) * (nf - 3.0) * d1 + d2 - 2.0 * (nf - 2.0) * d3)
        / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0) * (nf - 4.0));
    Ok(HoeffdingResult { n, d, null_sd: null_sd(n) })
}

/// (size, number of same-type events in the following `window` seconds)
/// for every event of type `e`.
pub fn size_count_pairs(events: &[EventRecord], e: EventType, window: f64) -> (Vec<f64>, Vec<f64>) {
    let times: Vec<f64> = events.iter().filter(|ev| ev.event_type == e).map(|ev| ev.time).collect();
    let sizes = events.iter().filter(|ev| ev.event_type == e).map(|ev| ev.size as f64).collect();
    let counts = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let end = times.partition_point(|&u| u <= t + window);
            let start = k + times[k..].partition_point(|&u| u <= t);
            end.saturating_sub(start) as f64
        })
        .collect();
    (sizes, counts)
}
