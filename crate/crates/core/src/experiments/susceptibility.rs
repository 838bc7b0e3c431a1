use rand::Rng;
use serde::{Deserialize, Serialize};

use super::item_rng;
use crate::channel::{noiseless_channel, ChannelSpec};
use crate::error::{Error, Result};
use crate::gatelib::Variant;
use crate::layout::{AngleProfile, Convention};
use crate::noise::NoiseModel;
use crate::observables::energy_density;
use crate::spectral;
use crate::EXACT_ENERGY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Weighted sum of squared residuals.
    pub residual: f64,
    pub r_squared: f64,
}

/// Weighted least squares `y ≈ a + b x`.
pub fn linear_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<LinearFit> {
    if xs.len() != ys.len() || weights.is_some_and(|w| w.len() != xs.len()) {
        return Err(Error::Fit("length mismatch".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 points, got {}",
            xs.len()
        )));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..xs.len()).map(w).sum();
    let mx = (0..xs.len()).map(|i| w(i) * xs[i]).sum::<f64>() / sw;
    let my = (0..xs.len()).map(|i| w(i) * ys[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..xs.len()).map(|i| w(i) * (xs[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..xs.len())
        .map(|i| w(i) * (xs[i] - mx) * (ys[i] - my))
        .sum();
    let syy: f64 = (0..xs.len()).map(|i| w(i) * (ys[i] - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = (0..xs.len())
        .map(|i| w(i) * (ys[i] - intercept - slope * xs[i]).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - residual / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        residual,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub energy: f64,
    pub percent_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub fit: LinearFit,
    pub fitted_points: usize,
}

impl Sweep {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }
}

pub fn percent_error(energy: f64) -> f64 {
    100.0 * (energy - EXACT_ENERGY).abs() / EXACT_ENERGY.abs()
}

/// Largest strength used for the slope.
pub const SLOPE_EPSILON_MAX: f64 = 1e-3;

/// Noisy fixed-point energy at each strength of `family`, with the slope
/// fitted on the smallest three strengths not exceeding [`SLOPE_EPSILON_MAX`].
pub fn susceptibility_sweep(
    profile: &AngleProfile,
    family: NoiseModel,
    grid: &[f64],
) -> Result<Sweep> {
    if grid.is_empty() || grid.iter().any(|&e| !(e > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidArgument(
            "strength grid must be positive and strictly increasing".into(),
        ));
    }
    let rows = grid
        .iter()
        .map(|&epsilon| {
            let s = ChannelSpec::new(profile, family.with_strength(epsilon)).build()?;
            let energy = energy_density(&spectral::fixed_state(&s)?, Convention::Xx)?;
            Ok(SweepRow {
                epsilon,
                energy,
                percent_error: percent_error(energy),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let small: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.epsilon <= SLOPE_EPSILON_MAX)
        .take(3)
        .collect();
    let xs: Vec<f64> = small.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = small.iter().map(|r| r.energy).collect();
    let fitted_points = small.len();
    let fit = linear_fit(&xs, &ys, None)?;
    Ok(Sweep {
        rows,
        fit,
        fitted_points,
    })
}

/// Strengths used for per-profile slopes.
pub const SLOPE_GRID: [f64; 3] = [2.5e-4, 5e-4, 1e-3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub depth: usize,
    pub samples: usize,
    pub cutoff: f64,
    pub range: (f64, f64),
    pub seed: u64,
    pub variant: Variant,
}

impl EnsembleSpec {
    pub fn new(depth: usize, samples: usize, variant: Variant, seed: u64) -> EnsembleSpec {
        let h = std::f64::consts::FRAC_PI_2;
        EnsembleSpec {
            depth,
            samples,
            cutoff: -1.2,
            range: (-h, h),
            seed,
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidArgument(format!(
                "depth must be ≥ 2, got {}",
                self.depth
            )));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument("sample count must be ≥ 1".into()));
        }
        if !(self.cutoff < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff must be negative, got {}",
                self.cutoff
            )));
        }
        if !(self.range.0 < self.range.1) || !self.range.0.is_finite() || !self.range.1.is_finite()
        {
            return Err(Error::InvalidArgument(
                "angle range must be a finite non-empty interval".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub spec: EnsembleSpec,
    pub mean_slope: f64,
    /// Standard error of the mean; zero for a single sample.
    pub stderr: f64,
    pub n: usize,
    pub slopes: Vec<f64>,
    pub profiles: Vec<AngleProfile>,
    pub attempts: usize,
}

/// Rejection-sample profiles with noiseless `E* < cutoff` and average their
/// small-strength slopes. Attempt `i` draws from seed `base + i`.
pub fn depth_ensemble(spec: EnsembleSpec, family: NoiseModel) -> Result<EnsembleResult> {
    spec.validate()?;
    let max_attempts = spec.samples.saturating_mul(1000);
    let mut slopes = Vec::with_capacity(spec.samples);
    let mut profiles = Vec::with_capacity(spec.samples);
    let mut attempts = 0;
    while slopes.len() < spec.samples {
        if attempts >= max_attempts {
            return Err(Error::InvalidArgument(format!(
                "rejection rate above 99.9%: {} of {attempts} profiles reach E* < {} at D = {}",
                slopes.len(),
                spec.cutoff,
                spec.depth
            )));
        }
        let mut rng = item_rng(spec.seed, attempts as u64);
        attempts += 1;
        let thetas = (0..spec.depth)
            .map(|_| rng.random_range(spec.range.0..spec.range.1))
            .collect();
        let profile = AngleProfile::new(thetas, spec.variant)?;
        let e = energy_density(
            &spectral::fixed_state(&noiseless_channel(&profile)?)?,
            Convention::Xx,
        )?;
        if e >= spec.cutoff {
            continue;
        }
        slopes.push(susceptibility_sweep(&profile, family, &SLOPE_GRID)?.slope());
        profiles.push(profile);
    }
    let n = slopes.len();
    let mean_slope = slopes.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        (slopes.iter().map(|s| (s - mean_slope).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64)
            .sqrt()
    } else {
        0.0
    };
    Ok(EnsembleResult {
        spec,
        mean_slope,
        stderr,
        n,
        slopes,
        profiles,
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys, None).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0], None).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0], None).is_err());
    }

    #[test]
    fn grid_must_increase() {
        let p = AngleProfile::new(vec![0.2, -0.5], Variant::C1).unwrap();
        assert!(susceptibility_sweep(&p, NoiseModel::imprecision(1.0), &[1e-3, 1e-4]).is_err());
        assert!(susceptibility_sweep(&p, NoiseModel::imprecision(1.0), &[0.0, 1e-4]).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = EnsembleSpec::new(2, 1, Variant::C2, 0);
        assert!(s.validate().is_ok());
        s.cutoff = 0.1;
        assert!(s.validate().is_err());
        s = EnsembleSpec::new(2, 0, Variant::C2, 0);
        assert!(s.validate().is_err());
    }
}
