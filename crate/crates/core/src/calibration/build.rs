//! Assembly of a simulation-ready model from an aggregate estimate.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::book::DepthDistribution;
use crate::calibration::aggregate::AggregateEstimate;
use crate::calibration::nonparam::NonParamEstimate;
use crate::calibration::parametric::{fit_parametric, KernelFit};
use crate::error::{invalid, Result};
use crate::event::{EventType, DIMENSIONS};
use crate::hawkes::kernel::{Kernel, KernelFamily};
use crate::hawkes::model::HawkesModel;
use crate::size::SizeTable;

/// One line of the kernel-selection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReportEntry {
    pub target: EventType,
    pub source: EventType,
    pub selected: KernelFamily,
    pub aic_exponential: f64,
    pub aic_power_law: f64,
    pub fallback: bool,
    pub nonparametric_norm: f64,
    pub fitted_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedModel {
    /// Parametric model (selected family per entry).
    pub model: HawkesModel,
    /// The same baselines with the tabulated kernels.
    pub nonparametric: HawkesModel,
    pub sizes: SizeTable,
    pub depth: DepthDistribution,
    pub fits: Vec<Vec<KernelFit>>,
    pub spectral_radius: f64,
    pub simulatable: bool,
}

impl CalibratedModel {
    pub fn kernel_report(&self) -> Vec<KernelReportEntry> {
        let mut out = Vec::with_capacity(DIMENSIONS * DIMENSIONS);
        for target in EventType::ALL {
            for source in EventType::ALL {
                let fit = &self.fits[target.index()][source.index()];
                out.push(KernelReportEntry {
                    target,
                    source,
                    selected: fit.selected,
                    aic_exponential: fit.exponential.aic,
                    aic_power_law: fit.power_law.aic,
                    fallback: fit.fallback,
                    nonparametric_norm: self.nonparametric.kernel(target, source).norm(),
                    fitted_norm: fit.kernel().norm(),
                });
            }
        }
        out
    }
}

/// Replaces the LO_ask-1 and LO_bid+1 rows (baselines and kernels) by their
/// average, so the two in-spread intensities coincide for every history.
pub fn symmetrize_in_spread(est: &mut NonParamEstimate) -> Result<()> {
    if est.dims() != DIMENSIONS {
        return Err(invalid("in-spread symmetry applies to the 12-dimensional model"));
    }
    let (a, b) = (EventType::LoAskMinus1.index(), EventType::LoBidPlus1.index());
    for bin in 0..est.baselines[a].len() {
        let m = 0.5 * (est.baselines[a][bin] + est.baselines[b][bin]);
        est.baselines[a][bin] = m;
        est.baselines[b][bin] = m;
    }
    for j in 0..DIMENSIONS {
        for c in 0..est.values[a][j].len() {
            let m = 0.5 * (est.values[a][j][c] + est.values[b][j][c]);
            est.values[a][j][c] = m;
            est.values[b][j][c] = m;
        }
    }
    Ok(())
}

/// Symmetrizes the in-spread rows, fits parametric kernels and checks
/// stability. An unstable result is returned with `simulatable = false`.
pub fn build_model(
    aggregate: &AggregateEstimate,
    spread_beta: f64,
    sizes: SizeTable,
    depth: DepthDistribution,
    session_start: f64,
) -> Result<CalibratedModel> {
    sizes.check_complete()?;
    let mut est = aggregate.mean.clone();
    symmetrize_in_spread(&mut est)?;
    let nonparametric = est.to_model(spread_beta, session_start)?;
    let fits = fit_parametric(&est)?;
    let kernels: Vec<Vec<Kernel>> =
        fits.iter().map(|row| row.iter().map(|f| f.kernel().clone()).collect()).collect();
    let model = HawkesModel::new(
        est.baselines.clone(),
        kernels,
        spread_beta,
        est.window.tod_bin_seconds,
        session_start,
    )?;
    let spectral_radius = model.spectral_radius();
    let simulatable = spectral_radius < 1.0;
    if !simulatable {
        warn!("calibrated model is unstable (spectral radius {spectral_radius:.4}); flagged as not simulatable");
    }
    Ok(CalibratedModel { model, nonparametric, sizes, depth, fits, spectral_radius, simulatable })
}
