//! Calibration: spread exponent, non-parametric kernels per day, aggregation
//! across days and parametric fits of the averaged kernels.

pub mod aggregate;
pub mod build;
pub mod grid;
pub mod nonparam;
pub mod parametric;
pub mod pipeline;
pub mod spread;

pub use aggregate::{aggregate_days, AggregateEstimate, Dispersion, StationarityEntry, StationarityReport};
pub use build::{build_model, symmetrize_in_spread, CalibratedModel, KernelReportEntry};
pub use grid::{EstimationGrid, GridSpec};
pub use nonparam::{
    estimate_nonparametric, estimate_series, DimensionSeries, EstimationWindow, NonParamEstimate, NonParamOptions,
};
pub use parametric::{fit_kernel, fit_kernel_cells, fit_parametric, FamilyFit, KernelFit};
pub use pipeline::{calibrate, CalibrationConfig, CalibrationOutput, DayEvents, DaySummary};
pub use spread::{estimate_spread_beta, SpreadAccumulator, SpreadBetaEstimate, SpreadGroup, SpreadOptions};
