//! Hawkes process model, intensities and simulation.

pub mod excitation;
pub mod intensity;
pub mod kernel;
pub mod model;
pub mod simulate;

pub use excitation::ExcitationState;
pub use intensity::{effective_intensities, effective_intensity, raw_intensity, total_intensity_bound};
pub use kernel::{Kernel, KernelFamily, Tabulated};
pub use model::{spectral_radius, HawkesModel, DEFAULT_TOD_BINS, DEFAULT_TOD_BIN_SECONDS, NASDAQ_CLOSE, NASDAQ_OPEN};
pub use simulate::{simulate, simulate_with, SimOptions, SimStep, SimulationOutput, Simulator, TrajectoryPoint};
