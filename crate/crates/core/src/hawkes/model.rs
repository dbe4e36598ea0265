//! The 12-dimensional Hawkes model: time-of-day baselines, the kernel
//! matrix and the in-spread exponent.

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::event::{EventType, DIMENSIONS};
use crate::hawkes::kernel::Kernel;

/// NASDAQ continuous session, seconds after midnight.
pub const NASDAQ_OPEN: f64 = 34_200.0;
pub const NASDAQ_CLOSE: f64 = 57_600.0;
pub const DEFAULT_TOD_BIN_SECONDS: f64 = 1800.0;
pub const DEFAULT_TOD_BINS: usize = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct HawkesModel {
    /// `baselines[i][b]`: exogenous rate of dimension i in time-of-day bin b
    /// (0-based here; `tod_bin` reports 1-based bins).
    baselines: Vec<Vec<f64>>,
    /// `kernels[i][j]`: excitation from j onto i.
    kernels: Vec<Vec<Kernel>>,
    spread_beta: f64,
    tod_bin_seconds: f64,
    session_start: f64,
    session_end: f64,
}

impl HawkesModel {
    pub fn new(
        baselines: Vec<Vec<f64>>,
        kernels: Vec<Vec<Kernel>>,
        spread_beta: f64,
        tod_bin_seconds: f64,
        session_start: f64,
    ) -> Result<Self> {
        if baselines.len() != DIMENSIONS {
            return Err(invalid(format!("expected {DIMENSIONS} baseline rows, got {}", baselines.len())));
        }
        let n_bins = baselines[0].len();
        if n_bins == 0 || baselines.iter().any(|row| row.len() != n_bins) {
            return Err(invalid("baseline rows must share a non-zero bin count"));
        }
        if baselines.iter().flatten().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(invalid("baselines must be finite and non-negative"));
        }
        if kernels.len() != DIMENSIONS || kernels.iter().any(|row| row.len() != DIMENSIONS) {
            return Err(invalid(format!("kernel matrix must be {DIMENSIONS}x{DIMENSIONS}")));
        }
        for k in kernels.iter().flatten() {
            k.validate()?;
        }
        if !(spread_beta > 0.0) || !spread_beta.is_finite() {
            return Err(invalid(format!("spread exponent must be > 0, got {spread_beta}")));
        }
        if !(tod_bin_seconds > 0.0) || !tod_bin_seconds.is_finite() {
            return Err(invalid("time-of-day bin width must be positive"));
        }
        if !session_start.is_finite() {
            return Err(invalid("session start must be finite"));
        }
        let session_end = session_start + n_bins as f64 * tod_bin_seconds;
        Ok(Self { baselines, kernels, spread_beta, tod_bin_seconds, session_start, session_end })
    }

    /// A model with constant baselines and no excitation over the NASDAQ session.
    pub fn poisson(rates: [f64; DIMENSIONS], spread_beta: f64) -> Result<Self> {
        let baselines = rates.iter().map(|&r| vec![r; DEFAULT_TOD_BINS]).collect();
        let kernels = vec![vec![Kernel::zero(); DIMENSIONS]; DIMENSIONS];
        Self::new(baselines, kernels, spread_beta, DEFAULT_TOD_BIN_SECONDS, NASDAQ_OPEN)
    }

    pub fn baselines(&self) -> &[Vec<f64>] {
        &self.baselines
    }

    pub fn kernels(&self) -> &[Vec<Kernel>] {
        &self.kernels
    }

    pub fn kernel(&self, target: EventType, source: EventType) -> &Kernel {
        &self.kernels[target.index()][source.index()]
    }

    pub fn spread_beta(&self) -> f64 {
        self.spread_beta
    }

    pub fn tod_bin_seconds(&self) -> f64 {
        self.tod_bin_seconds
    }

    pub fn session_start(&self) -> f64 {
        self.session_start
    }

    pub fn session_end(&self) -> f64 {
        self.session_end
    }

    pub fn n_bins(&self) -> usize {
        self.baselines[0].len()
    }

    pub fn session_length(&self) -> f64 {
        self.session_end - self.session_start
    }

    pub fn set_baselines(&mut self, baselines: Vec<Vec<f64>>) -> Result<()> {
        *self = Self::new(baselines, self.kernels.clone(), self.spread_beta, self.tod_bin_seconds, self.session_start)?;
        Ok(())
    }

    pub fn set_kernel(&mut self, target: EventType, source: EventType, kernel: Kernel) -> Result<()> {
        kernel.validate()?;
        self.kernels[target.index()][source.index()] = kernel;
        Ok(())
    }

    pub fn set_spread_beta(&mut self, beta: f64) -> Result<()> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid(format!("spread exponent must be > 0, got {beta}")));
        }
        self.spread_beta = beta;
        Ok(())
    }

    /// 1-based time-of-day bin of `t` seconds since session start.
    /// Bins are left-closed, right-open; the last bin absorbs rounding at
    /// its right edge.
    pub fn tod_bin(&self, t: f64) -> Result<usize> {
        Ok(self.bin_index(t)? + 1)
    }

    /// 0-based variant of [`tod_bin`](Self::tod_bin).
    pub fn bin_index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || t >= self.session_length() {
            return Err(Error::Range(format!(
                "time {t} outside session [0, {})",
                self.session_length()
            )));
        }
        Ok(((t / self.tod_bin_seconds).floor() as usize).min(self.n_bins() - 1))
    }

    /// Start time (seconds since session start) of the 0-based bin after `bin`.
    pub fn bin_end(&self, bin: usize) -> f64 {
        if bin + 1 >= self.n_bins() {
            self.session_length()
        } else {
            (bin + 1) as f64 * self.tod_bin_seconds
        }
    }

    pub fn baseline(&self, i: EventType, t: f64) -> Result<f64> {
        Ok(self.baselines[i.index()][self.bin_index(t)?])
    }

    /// Matrix of |norm(φ_ij)|.
    pub fn abs_norm_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(DIMENSIONS, DIMENSIONS, |i, j| self.kernels[i][j].norm().abs())
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.abs_norm_matrix())
    }

    /// Simulation requires the |norm| matrix to have spectral radius < 1.
    pub fn check_stable(&self) -> Result<()> {
        let rho = self.spectral_radius();
        if rho < 1.0 {
            Ok(())
        } else {
            Err(Error::Unstable(rho))
        }
    }

    /// Spread scaling applied to in-spread dimensions: s^β, zero when the
    /// spread is zero or negative.
    pub fn spread_factor(&self, spread_ticks: i64) -> f64 {
        if spread_ticks <= 0 {
            0.0
        } else if spread_ticks == 1 {
            1.0
        } else {
            (spread_ticks as f64).powf(self.spread_beta)
        }
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    match Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => gelfand_radius(m),
    }
}

// ρ = lim ‖Aᵏ‖^(1/k), by repeated squaring with renormalisation.
fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut a = m.clone();
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..40 {
        let n = a.norm();
        if n == 0.0 {
            return 0.0;
        }
        a /= n;
        log_scale += n.ln() / k;
        a = &a * &a;
        k *= 2.0;
    }
    (log_scale + a.norm().ln() / k).exp()
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    baselines: Vec<Vec<f64>>,
    kernels: Vec<Vec<Kernel>>,
    spread_beta: f64,
    tod_bin_seconds: f64,
    session_start: f64,
}

impl Serialize for HawkesModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelDoc {
            baselines: self.baselines.clone(),
            kernels: self.kernels.clone(),
            spread_beta: self.spread_beta,
            tod_bin_seconds: self.tod_bin_seconds,
            session_start: self.session_start,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HawkesModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ModelDoc::deserialize(d)?;
        HawkesModel::new(doc.baselines, doc.kernels, doc.spread_beta, doc.tod_bin_seconds, doc.session_start)
            .map_err(serde::de::Error::custom)
    }
}
