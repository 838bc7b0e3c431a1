use std::f64::consts::FRAC_PI_2;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::item_rng;
use crate::channel::{noiseless_channel, DensityMatrix, Superoperator};
use crate::error::{Error, Result};
use crate::gatelib::Variant;
use crate::layout::{AngleProfile, Convention};
use crate::linalg::{self, CMatrix};
use crate::observables::{energy_density, energy_density_single_bond};
use crate::spectral::{self, delta_of};

/// Reference values a calibrated profile has to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub energy: f64,
    pub delta_sigma: f64,
    pub delta_epsilon: f64,
}

pub fn table_target(depth: usize) -> Option<CalibrationTarget> {
    match depth {
        2 => Some(CalibrationTarget {
            energy: -1.23948,
            delta_sigma: 0.136,
            delta_epsilon: 1.0,
        }),
        4 => Some(CalibrationTarget {
            energy: -1.26757,
            delta_sigma: 0.123,
            delta_epsilon: 1.0,
        }),
        _ => None,
    }
}

/// Angles found by [`calibrate_angles`] with default options (energy-only at D=3).
pub const REFERENCE_ANGLES: [&[f64]; 3] = [
    &[0.26597297118479046, -0.5195465296836685],
    &[
        0.22582891651547748,
        2.6339405845485455,
        -0.11681833372207162,
    ],
    &[
        0.11325914081453231,
        -0.868153753966248,
        0.043699464982565286,
        0.36646700546308436,
    ],
];

pub fn reference_profile(depth: usize, variant: Variant) -> Option<AngleProfile> {
    let thetas = REFERENCE_ANGLES.get(depth.checked_sub(2)?)?;
    AngleProfile::new(thetas.to_vec(), variant).ok()
}

/// Noiseless observables of a channel that calibration looks at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelFeatures {
    pub energy: f64,
    pub energy_single_bond: f64,
    /// Slowest parity-odd mode.
    pub delta_sigma: f64,
    /// Slowest parity-even mode besides the fixed point.
    pub delta_epsilon: f64,
}

/// Sector of the column-stacked basis element `|i⟩⟨j|` under conjugation by
/// the parity operator `Z⊗…⊗Z`.
fn odd_index(k: usize, d: usize) -> bool {
    ((k % d).count_ones() + (k / d).count_ones()) % 2 == 1
}

/// Eigenvalue moduli of the parity-even and parity-odd blocks, descending.
pub(crate) fn sector_moduli(s: &Superoperator) -> (Vec<f64>, Vec<f64>) {
    let d = s.d_in();
    let (even, odd): (Vec<usize>, Vec<usize>) = (0..d * d).partition(|&k| !odd_index(k, d));
    let block = |idx: &[usize]| {
        let m = CMatrix::from_fn(idx.len(), idx.len(), |a, b| s.matrix[(idx[a], idx[b])]);
        let mut v: Vec<f64> = linalg::eigenvalues(&m).iter().map(|z| z.norm()).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    (block(&even), block(&odd))
}

/// Features with the fixed point found by power iteration.
pub fn channel_features(profile: &AngleProfile) -> Result<ChannelFeatures> {
    let s = noiseless_channel(profile)?;
    features_at(&s, &spectral::fixed_state(&s)?)
}

/// Features with the fixed point taken from the `λ = 1` eigenvector; one
/// linear solve instead of an iteration that slows down near degeneracy.
fn features_fast(profile: &AngleProfile) -> Result<ChannelFeatures> {
    let s = noiseless_channel(profile)?;
    let (v, _) = linalg::eigenvector(&s.matrix, linalg::ONE);
    let m = linalg::unvectorize(&v, s.d_out());
    let tr = m.trace();
    let rho = DensityMatrix::from_matrix_unchecked(linalg::hermitian_part(&(m / tr)))?;
    features_at(&s, &rho)
}

fn features_at(s: &Superoperator, rho: &DensityMatrix) -> Result<ChannelFeatures> {
    let (even, odd) = sector_moduli(s);
    Ok(ChannelFeatures {
        energy: energy_density(rho, Convention::Xx)?,
        energy_single_bond: energy_density_single_bond(rho, Convention::Xx)?,
        delta_sigma: delta_of(odd[0].into()),
        delta_epsilon: delta_of(even[1].into()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iters: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            starts: 32,
            seed: 2021,
            max_iters: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub profile: AngleProfile,
    pub features: ChannelFeatures,
    pub objective: f64,
    pub target: Option<CalibrationTarget>,
    pub start_index: usize,
}

struct Objective {
    depth: usize,
    variant: Variant,
    target: Option<CalibrationTarget>,
}

impl Objective {
    fn value(&self, thetas: &[f64]) -> f64 {
        let Ok(profile) = AngleProfile::new(thetas.to_vec(), self.variant) else {
            return f64::INFINITY;
        };
        let Ok(f) = features_fast(&profile) else {
            return f64::INFINITY;
        };
        match self.target {
            // squared deviations in units of each quantity's tolerance
            Some(t) => {
                ((f.energy - t.energy) / 1e-4).powi(2)
                    + ((f.delta_sigma - t.delta_sigma) / 5e-3).powi(2)
                    + ((f.delta_epsilon - t.delta_epsilon) / 1e-3).powi(2)
            }
            None => f.energy,
        }
    }
}

impl CostFunction for Objective {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        debug_assert_eq!(p.len(), self.depth);
        Ok(self.value(p))
    }
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * std::f64::consts::PI);
    if t > std::f64::consts::PI {
        t - 2.0 * std::f64::consts::PI
    } else {
        t
    }
}

/// Multi-start Nelder–Mead over the `D` angles.
///
/// With a reference (`D` = 2 or 4) the objective matches energy, `Δσ` and
/// `Δε = 1` simultaneously and the result must land within `target_tol` of the
/// reference energy. Without one the fixed-point energy is minimized and the
/// result must reach `E* < −1.2`.
pub fn calibrate_angles(
    depth: usize,
    variant: Variant,
    target_tol: f64,
    opts: CalibrationOptions,
) -> Result<Calibration> {
    if !(2..=4).contains(&depth) {
        return Err(Error::InvalidArgument(format!(
            "calibration supports D = 2, 3, 4; got {depth}"
        )));
    }
    let target = table_target(depth);
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for start in 0..opts.starts {
        let mut rng = item_rng(opts.seed, start as u64);
        let x0: Vec<f64> = (0..depth)
            .map(|_| rng.random_range(-FRAC_PI_2..FRAC_PI_2))
            .collect();
        let mut simplex = vec![x0.clone()];
        for i in 0..depth {
            let mut v = x0.clone();
            v[i] += 0.15;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-12)
            .map_err(|e| Error::Calibration(e.to_string()))?;
        let problem = Objective {
            depth,
            variant,
            target,
        };
        let res = Executor::new(problem, solver)
            .configure(|s| s.max_iters(opts.max_iters))
            .run()
            .map_err(|e| Error::Calibration(e.to_string()))?;
        let state = res.state();
        let (Some(p), cost) = (state.get_best_param(), state.get_best_cost()) else {
            continue;
        };
        if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            best = Some((cost, p.iter().map(|&t| wrap(t)).collect(), start));
        }
    }
    let (objective, thetas, start_index) =
        best.ok_or_else(|| Error::Calibration("no start produced a finite objective".into()))?;
    let profile = AngleProfile::new(thetas, variant)?;
    let features = channel_features(&profile)?;
    match target {
        Some(t) if (features.energy - t.energy).abs() > target_tol => {
            Err(Error::Calibration(format!(
                "best energy {:.6} misses reference {:.5} by more than {target_tol:e}",
                features.energy, t.energy
            )))
        }
        None if features.energy >= -1.2 => Err(Error::Calibration(format!(
            "best energy {:.6} does not reach the −1.2 cutoff",
            features.energy
        ))),
        _ => Ok(Calibration {
            profile,
            features,
            objective,
            target,
            start_index,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_sectors_split_the_channel() {
        let p = AngleProfile::new(vec![0.3, -0.5], Variant::C1).unwrap();
        let s = noiseless_channel(&p).unwrap();
        let d = 8;
        let mut off = 0.0f64;
        for a in 0..d * d {
            for b in 0..d * d {
                if odd_index(a, d) != odd_index(b, d) {
                    off = off.max(s.matrix[(a, b)].norm());
                }
            }
        }
        assert!(off < 1e-14);
    }

    #[test]
    fn wrap_is_periodic() {
        assert!((wrap(0.3 + 4.0 * std::f64::consts::PI) - 0.3).abs() < 1e-12);
        assert!((wrap(-3.5) - (-3.5 + 2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }
}
