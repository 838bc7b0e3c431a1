use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dynamics::run_dynamics;
use super::item_rng;
use crate::channel::Alignment;
use crate::error::{Error, Result};
use crate::layout::AngleProfile;
use crate::noise::NoiseModel;
use crate::observables::{InitialState, Observable};

/// One measured expectation value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredPoint {
    pub layer: usize,
    pub observable: Observable,
    pub mean: f64,
    pub n_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFit {
    pub sigma2: f64,
    pub residual: f64,
    /// `(σ², residual)` at every grid point.
    pub grid: Vec<(f64, f64)>,
    pub refined: bool,
}

/// Sum of `n_samples · (simulated − measured)²`.
fn residual(
    profile: &AngleProfile,
    initial: InitialState,
    data: &[MeasuredPoint],
    observables: &[Observable],
    sigma2: f64,
) -> Result<f64> {
    let n_layers = data.iter().map(|p| p.layer).max().unwrap_or(0);
    let noise = if sigma2 > 0.0 {
        NoiseModel::imprecision(sigma2)
    } else {
        NoiseModel::Noiseless
    };
    let ts = run_dynamics(
        profile,
        noise,
        initial,
        n_layers,
        observables,
        Alignment::Mixture,
    )?;
    let mut acc = 0.0;
    for p in data {
        let sim = ts
            .rows
            .iter()
            .find(|r| r.layer == p.layer && r.observable == p.observable)
            .map(|r| r.value)
            .expect("simulated every measured point");
        acc += p.n_samples as f64 * (sim - p.mean).powi(2);
    }
    Ok(acc)
}

/// Vertex of the parabola through three points, if it opens upward.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<f64> {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if !(a > 0.0) {
        return None;
    }
    Some(0.5 * (x[0] + x[1]) - d1 / (2.0 * a))
}

/// Grid search for the imprecision strength that best reproduces `data`,
/// refined by a parabola through the best grid point and its neighbours.
/// Only points whose observable is in `observables` enter the residual.
pub fn fit_sigma2(
    data: &[MeasuredPoint],
    profile: &AngleProfile,
    initial: InitialState,
    grid: &[f64],
    observables: &[Observable],
) -> Result<NoiseFit> {
    if observables.is_empty() {
        return Err(Error::InvalidArgument("no observables selected".into()));
    }
    let used: Vec<MeasuredPoint> = data
        .iter()
        .filter(|p| observables.contains(&p.observable))
        .copied()
        .collect();
    if used.is_empty() {
        return Err(Error::InvalidArgument(
            "no measured points for the selected observables".into(),
        ));
    }
    if grid.is_empty() || grid.iter().any(|&s| !(s >= 0.0)) || grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidArgument(
            "σ² grid must be non-negative and strictly increasing".into(),
        ));
    }
    let grid_res = grid
        .iter()
        .map(|&s| Ok((s, residual(profile, initial, &used, observables, s)?)))
        .collect::<Result<Vec<_>>>()?;
    let best = (0..grid_res.len())
        .min_by(|&a, &b| grid_res[a].1.total_cmp(&grid_res[b].1))
        .unwrap();
    let (mut sigma2, mut res) = grid_res[best];
    let mut refined = false;
    if best > 0 && best + 1 < grid_res.len() {
        let (p, c, n) = (grid_res[best - 1], grid_res[best], grid_res[best + 1]);
        if let Some(v) = parabola_vertex([p.0, c.0, n.0], [p.1, c.1, n.1]) {
            let v = v.clamp(p.0, n.0);
            let r = residual(profile, initial, &used, observables, v)?;
            if r < res {
                (sigma2, res, refined) = (v, r, true);
            }
        }
    }
    Ok(NoiseFit {
        sigma2,
        residual: res,
        grid: grid_res,
        refined,
    })
}

/// Simulated measurements with Gaussian shot noise. A Pauli mean `m` from `n`
/// shots has variance `(1 − m²)/n`; site and bond averages divide by the
/// number of terms, and the energy combines its `ZZ` and `ZXZ` terms.
pub fn synthesize_measurements(
    profile: &AngleProfile,
    noise: NoiseModel,
    initial: InitialState,
    n_layers: usize,
    observables: &[Observable],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<MeasuredPoint>> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    let ts = run_dynamics(
        profile,
        noise,
        initial,
        n_layers,
        &Observable::ALL,
        Alignment::Mixture,
    )?;
    let value = |layer: usize, o: Observable| {
        ts.rows
            .iter()
            .find(|r| r.layer == layer && r.observable == o)
            .map_or(0.0, |r| r.value)
    };
    let n = n_samples as f64;
    let pauli_var = |m: f64| (1.0 - m * m).max(0.0) / n;
    let mut rng = item_rng(seed, 0);
    ts.rows
        .iter()
        .filter(|r| observables.contains(&r.observable))
        .map(|r| {
            let var = match r.observable {
                Observable::X | Observable::Z => pauli_var(r.value) / 3.0,
                Observable::ZZ => pauli_var(r.value) / 2.0,
                Observable::ZXZ => pauli_var(r.value),
                Observable::Energy => {
                    pauli_var(value(r.layer, Observable::ZZ)) / 2.0
                        + pauli_var(value(r.layer, Observable::ZXZ))
                }
            };
            let sd = var.sqrt();
            let shot = if sd > 0.0 {
                Normal::new(0.0, sd)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            Ok(MeasuredPoint {
                layer: r.layer,
                observable: r.observable,
                mean: r.value + shot,
                n_samples,
            })
        })
        .collect()
}
