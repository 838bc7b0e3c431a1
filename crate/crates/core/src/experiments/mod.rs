//! Numerical studies built on the local channel.

mod calibrate;
mod dilution;
mod dynamics;
mod fit;
mod susceptibility;

pub use calibrate::{
    calibrate_angles, channel_features, reference_profile, table_target, Calibration,
    CalibrationOptions, CalibrationTarget, ChannelFeatures, REFERENCE_ANGLES,
};
pub use dilution::{dilution_study, sample_gate, DilutionOptions, DilutionRow, DilutionStudy};
pub use dynamics::{noise_response, run_dynamics, NoiseResponse, TimeSeries, TimeSeriesRow};
pub use fit::{fit_sigma2, synthesize_measurements, MeasuredPoint, NoiseFit};
pub use susceptibility::{
    depth_ensemble, linear_fit, percent_error, susceptibility_sweep, EnsembleResult, EnsembleSpec,
    LinearFit, Sweep, SweepRow, SLOPE_GRID,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for work item `index` of a run seeded with `base`.
pub fn item_rng(base: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base.wrapping_add(index))
}
