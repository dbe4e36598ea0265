//! Kernel estimation grid: a linear segment for the fast response followed
//! by geometrically growing cells for slow tails. Every edge is a multiple
//! of the base resolution at which counting processes are discretized.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Bin width of the discretized counting processes, seconds.
    pub base_resolution: f64,
    /// Width of the linear cells, seconds (a multiple of the base resolution).
    pub lin_width: f64,
    pub n_lin: usize,
    /// Growth factor of the log cells.
    pub growth: f64,
    pub n_log: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { base_resolution: 0.001, lin_width: 0.001, n_lin: 100, growth: 1.3, n_log: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationGrid {
    spec: GridSpec,
    // edges in units of the base resolution
    lag_edges: Vec<u64>,
}

impl EstimationGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let d = spec.base_resolution;
        if !(d > 0.0) || !d.is_finite() {
            return Err(invalid("base resolution must be positive"));
        }
        let ratio = spec.lin_width / d;
        let per_cell = ratio.round();
        if per_cell < 1.0 || (ratio - per_cell).abs() > 1e-6 {
            return Err(invalid("linear cell width must be a positive multiple of the base resolution"));
        }
        if spec.n_lin == 0 {
            return Err(invalid("the linear segment needs at least one cell"));
        }
        if spec.n_log > 0 && !(spec.growth > 1.0) {
            return Err(invalid("log-cell growth factor must exceed 1"));
        }
        let per_cell = per_cell as u64;
        let mut lag_edges: Vec<u64> = (0..=spec.n_lin as u64).map(|k| k * per_cell).collect();
        let lin_end = *lag_edges.last().unwrap() as f64;
        for k in 1..=spec.n_log {
            let e = (lin_end * spec.growth.powi(k as i32)).round() as u64;
            if e <= *lag_edges.last().unwrap() {
                return Err(invalid(format!(
                    "log cell {k} collapses at base resolution {d}; increase the growth factor"
                )));
            }
            lag_edges.push(e);
        }
        Ok(Self { spec, lag_edges })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn base(&self) -> f64 {
        self.spec.base_resolution
    }

    pub fn n_cells(&self) -> usize {
        self.lag_edges.len() - 1
    }

    /// Cell edges in seconds.
    pub fn edges(&self) -> Vec<f64> {
        self.lag_edges.iter().map(|&e| e as f64 * self.base()).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lag_edges.windows(2).map(|w| (w[1] - w[0]) as f64 * self.base()).collect()
    }

    pub fn tau_max(&self) -> f64 {
        *self.lag_edges.last().unwrap() as f64 * self.base()
    }

    /// Largest lag, in base bins.
    pub fn max_lag(&self) -> u64 {
        *self.lag_edges.last().unwrap()
    }

    /// Inclusive lag range (in base bins) pooled into cell `c`: the lags m
    /// with e_c < m·Δ ≤ e_{c+1}.
    pub fn lag_range(&self, c: usize) -> (u64, u64) {
        (self.lag_edges[c] + 1, self.lag_edges[c + 1])
    }

    /// Mean lag of the cell in seconds; the time at which the cell's value
    /// estimates the kernel.
    pub fn representative_times(&self) -> Vec<f64> {
        (0..self.n_cells())
            .map(|c| {
                let (a, b) = self.lag_range(c);
                0.5 * (a + b) as f64 * self.base()
            })
            .collect()
    }
}

impl Default for EstimationGrid {
    fn default() -> Self {
        Self::new(GridSpec::default()).expect("default grid is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_layout() {
        let g = EstimationGrid::default();
        assert_eq!(g.n_cells(), 130);
        let e = g.edges();
        assert_eq!(e[0], 0.0);
        assert!((e[100] - 0.1).abs() < 1e-12);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        // 0.1·1.3^30 ≈ 262 s
        assert!((g.tau_max() - 0.1 * 1.3f64.powi(30)).abs() < 1e-3);
        assert_eq!(g.lag_range(0), (1, 1));
        assert!((g.representative_times()[0] - 0.001).abs() < 1e-15);
        assert!(g.widths().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn coarse_linear_cells() {
        let g = EstimationGrid::new(GridSpec { lin_width: 0.005, n_lin: 20, n_log: 5, ..GridSpec::default() }).unwrap();
        assert_eq!(g.lag_range(0), (1, 5));
        assert!((g.representative_times()[0] - 0.003).abs() < 1e-15);
        assert!((g.edges()[20] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs() {
        assert!(EstimationGrid::new(GridSpec { lin_width: 0.0015, ..GridSpec::default() }).is_err());
        assert!(EstimationGrid::new(GridSpec { growth: 1.0, ..GridSpec::default() }).is_err());
        assert!(EstimationGrid::new(GridSpec { n_lin: 0, ..GridSpec::default() }).is_err());
        // growth too small to move past the base resolution
        assert!(EstimationGrid::new(GridSpec { n_lin: 2, growth: 1.1, ..GridSpec::default() }).is_err());
    }
}
