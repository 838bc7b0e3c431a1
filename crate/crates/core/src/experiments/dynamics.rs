use serde::{Deserialize, Serialize};

use super::susceptibility::linear_fit;
use crate::channel::{apply_channel, Alignment, ChannelSpec};
use crate::error::{Error, Result};
use crate::layout::{AngleProfile, Convention};
use crate::noise::NoiseModel;
use crate::observables::{energy_density, initial_state, InitialState, Observable};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    pub layer: usize,
    pub observable: Observable,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub rows: Vec<TimeSeriesRow>,
    pub profile: AngleProfile,
    pub noise: NoiseModel,
    pub initial: InitialState,
    pub alignment: Alignment,
}

impl TimeSeries {
    pub fn series(&self, o: Observable) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.observable == o)
            .map(|r| r.value)
            .collect()
    }
}

/// Iterate the channel from a product state, recording observables after each
/// layer; layer 0 is the initial state.
pub fn run_dynamics(
    profile: &AngleProfile,
    noise: NoiseModel,
    initial: InitialState,
    n_layers: usize,
    observables: &[Observable],
    alignment: Alignment,
) -> Result<TimeSeries> {
    let s = ChannelSpec::new(profile, noise)
        .alignment(alignment)
        .build()?;
    let mut rho = initial_state(initial, 3)?;
    let mut rows = Vec::with_capacity((n_layers + 1) * observables.len());
    for layer in 0..=n_layers {
        if layer > 0 {
            rho = apply_channel(&s, &rho)?;
        }
        for &o in observables {
            rows.push(TimeSeriesRow {
                layer,
                observable: o,
                value: o.measure(&rho)?,
            });
        }
    }
    Ok(TimeSeries {
        rows,
        profile: profile.clone(),
        noise,
        initial,
        alignment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseResponse {
    pub sigma2: f64,
    pub e_star: f64,
    /// `Ẽ_k − E*` for `k = 0..=n_post_layers`.
    pub deviations: Vec<f64>,
    /// `−slope/ln 2` of `ln|Ẽ_k − E*|` over the fitted layers.
    pub delta_fit: f64,
    pub fitted_layers: usize,
}

/// Deviations below this are treated as numerical floor.
const FLOOR: f64 = 1e-13;

/// One noisy layer applied to the noiseless fixed point, followed by
/// noiseless layers. The recovery exponent is fitted over the first
/// `fit_layers` deviations above the numerical floor.
pub fn noise_response(
    profile: &AngleProfile,
    sigma2: f64,
    n_post_layers: usize,
    fit_layers: usize,
) -> Result<NoiseResponse> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    let clean = ChannelSpec::new(profile, NoiseModel::Noiseless).build()?;
    let noisy = ChannelSpec::new(profile, NoiseModel::imprecision(sigma2)).build()?;
    let fixed = spectral::fixed_state(&clean)?;
    let e_star = energy_density(&fixed, Convention::Xx)?;
    let mut rho = apply_channel(&noisy, &fixed)?;
    let mut deviations = Vec::with_capacity(n_post_layers + 1);
    for k in 0..=n_post_layers {
        if k > 0 {
            rho = apply_channel(&clean, &rho)?;
        }
        deviations.push(energy_density(&rho, Convention::Xx)? - e_star);
    }
    let usable: Vec<(f64, f64)> = deviations
        .iter()
        .take(fit_layers)
        .take_while(|d| d.abs() > FLOOR)
        .enumerate()
        .map(|(k, d)| (k as f64, d.abs().ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::Fit(format!(
            "only {} layers above the numerical floor",
            usable.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.iter().copied().unzip();
    let fit = linear_fit(&xs, &ys, None)?;
    Ok(NoiseResponse {
        sigma2,
        e_star,
        deviations,
        delta_fit: -fit.slope / std::f64::consts::LN_2,
        fitted_layers: usable.len(),
    })
}
