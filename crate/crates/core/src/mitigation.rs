//! Zero-noise extrapolation by MS gate folding.
//!
//! The geometric model treats the fixed-point error as a sum of per-layer
//! contributions decaying as `ε λᵏ` with distance `k` from the last layer, so
//! `Ẽ = E* + ε/(1−λ)`. Folding the last layer by `c` adds `(c−1)ε`; folding the
//! second-to-last adds `(c−1)ελ`. Three measurements fix `(E*, ε, λ)`.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSpec, DensityMatrix, Superoperator};
use crate::error::{Error, Result};
use crate::layout::{AngleProfile, Convention, NativeCircuit, NativeOp};
use crate::noise::NoiseModel;
use crate::observables::energy_density;
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmplificationTarget {
    AllGates,
    /// One channel application, counted from the end (0 = last).
    Layer(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmplificationSpec {
    pub target: AmplificationTarget,
    pub repetitions: usize,
}

impl AmplificationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 || self.repetitions % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "repetitions must be odd and ≥ 1, got {}",
                self.repetitions
            )));
        }
        Ok(())
    }
}

/// Replace every MS gate `G` by `G (G† G)^k`, `2k+1 = r`.
pub fn fold_ms_gates(nc: &NativeCircuit, r: usize) -> Result<NativeCircuit> {
    AmplificationSpec {
        target: AmplificationTarget::AllGates,
        repetitions: r,
    }
    .validate()?;
    if r == 1 {
        return Ok(nc.clone());
    }
    let mut ops = Vec::with_capacity(nc.ops.len() + nc.ms_count * (r - 1));
    for op in &nc.ops {
        ops.push(op.clone());
        if let (true, Some(theta)) = (op.gate.is_two_qubit(), op.gate.angle()) {
            for _ in 0..(r - 1) / 2 {
                ops.push(NativeOp {
                    gate: op.gate.with_angle(-theta),
                    qubits: op.qubits.clone(),
                });
                ops.push(op.clone());
            }
        }
    }
    Ok(NativeCircuit {
        ops,
        ms_count: nc.ms_count * r,
        ..nc.clone()
    })
}

/// Fold the targeted channel applications of a stack (first element acts first).
pub fn amplify_gates(
    stack: &[NativeCircuit],
    spec: AmplificationSpec,
) -> Result<Vec<NativeCircuit>> {
    spec.validate()?;
    match spec.target {
        AmplificationTarget::AllGates => stack
            .iter()
            .map(|c| fold_ms_gates(c, spec.repetitions))
            .collect(),
        AmplificationTarget::Layer(k) => {
            if k >= stack.len() {
                return Err(Error::InvalidArgument(format!(
                    "layer {k} from the end of a {}-layer stack",
                    stack.len()
                )));
            }
            let target = stack.len() - 1 - k;
            stack
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == target {
                        fold_ms_gates(c, spec.repetitions)
                    } else {
                        Ok(c.clone())
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZneScheme {
    LinearFull,
    /// Richardson through `r ∈ {1, 3, 5}`.
    QuadraticFull,
    GeomAdditive,
    GeomMultiplicative,
}

impl ZneScheme {
    pub const ALL: [ZneScheme; 4] = [
        ZneScheme::LinearFull,
        ZneScheme::QuadraticFull,
        ZneScheme::GeomAdditive,
        ZneScheme::GeomMultiplicative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ZneScheme::LinearFull => "linear-full",
            ZneScheme::QuadraticFull => "quadratic-full",
            ZneScheme::GeomAdditive => "geom-additive",
            ZneScheme::GeomMultiplicative => "geom-multiplicative",
        }
    }
}

impl std::str::FromStr for ZneScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<ZneScheme> {
        ZneScheme::ALL
            .into_iter()
            .find(|z| z.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown scheme `{s}` (linear-full, quadratic-full, geom-additive, geom-multiplicative)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZneResult {
    pub scheme: ZneScheme,
    pub e0: f64,
    pub e_last: f64,
    pub e_secondlast: f64,
    pub e_star_hat: f64,
    pub eps_hat: f64,
    pub lambda_hat: f64,
    pub accepted: bool,
}

/// Linear fit in the fold count `r ∈ {1, 3}` evaluated at `r = 0`.
pub fn zne_linear_full(e_r1: f64, e_r3: f64) -> f64 {
    (3.0 * e_r1 - e_r3) / 2.0
}

/// Quadratic fit through `r ∈ {1, 3, 5}` evaluated at `r = 0`.
pub fn zne_quadratic_full(e_r1: f64, e_r3: f64, e_r5: f64) -> f64 {
    (15.0 * e_r1 - 10.0 * e_r3 + 3.0 * e_r5) / 8.0
}

fn geometric_closed_form(e0: f64, e_last: f64, e_sl: f64, c: f64) -> Option<(f64, f64, f64)> {
    let d = e_last - e0;
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let eps = d / (c - 1.0);
    let lambda = (e_sl - e0) / d;
    if !(lambda > 0.0 && lambda < 1.0) {
        return None;
    }
    Some((e0 - eps / (1.0 - lambda), eps, lambda))
}

/// Closed-form geometric extrapolation. A rejected fit (`λ ∉ (0,1)` or no
/// response to folding) reports the baseline `E0` with `accepted = false`.
pub fn zne_geometric(
    e0: f64,
    e_last: f64,
    e_secondlast: f64,
    c: f64,
    scheme: ZneScheme,
) -> Result<ZneResult> {
    if !(c > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "amplification factor must exceed 1, got {c}"
        )));
    }
    if ![e0, e_last, e_secondlast].iter().all(|e| e.is_finite()) {
        return Err(Error::InvalidArgument("energies must be finite".into()));
    }
    let fit = match scheme {
        ZneScheme::GeomAdditive => geometric_closed_form(e0, e_last, e_secondlast, c),
        ZneScheme::GeomMultiplicative => {
            let sign = e0.signum();
            if e_last.signum() != sign || e_secondlast.signum() != sign || e0 == 0.0 {
                return Err(Error::InvalidArgument(
                    "multiplicative model needs energies of one sign".into(),
                ));
            }
            geometric_closed_form(e0.abs().ln(), e_last.abs().ln(), e_secondlast.abs().ln(), c)
                .map(|(l, eps, lambda)| (sign * l.exp(), eps, lambda))
        }
        ZneScheme::LinearFull | ZneScheme::QuadraticFull => {
            return Err(Error::InvalidArgument(format!(
                "{} is not a geometric scheme",
                scheme.name()
            )));
        }
    };
    Ok(match fit {
        Some((e_star, eps, lambda)) => ZneResult {
            scheme,
            e0,
            e_last,
            e_secondlast,
            e_star_hat: e_star,
            eps_hat: eps,
            lambda_hat: lambda,
            accepted: true,
        },
        None => ZneResult {
            scheme,
            e0,
            e_last,
            e_secondlast,
            e_star_hat: e0,
            eps_hat: f64::NAN,
            lambda_hat: f64::NAN,
            accepted: false,
        },
    })
}

/// Simulated inputs for all three schemes at one noise setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZneMeasurements {
    /// Fixed-point energy of the noisy channel.
    pub e0: f64,
    /// Noisy fixed point followed by one folded layer.
    pub e_last: f64,
    /// Noisy fixed point, one folded layer, then one plain layer.
    pub e_secondlast: f64,
    /// Fixed point with every gate folded.
    pub e_folded: f64,
    /// Fixed point with every gate folded five times, when requested.
    pub e_folded5: Option<f64>,
    pub repetitions: usize,
}

fn energy(rho: &DensityMatrix) -> Result<f64> {
    energy_density(rho, Convention::Xx)
}

fn apply(s: &Superoperator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    crate::channel::apply_channel(s, rho)
}

/// Fixed-point energy with every MS gate folded `repetitions` times.
pub fn folded_energy(profile: &AngleProfile, noise: NoiseModel, repetitions: usize) -> Result<f64> {
    energy(&spectral::fixed_state(
        &ChannelSpec::new(profile, noise)
            .repetitions(repetitions)
            .build()?,
    )?)
}

pub fn measure_zne(
    profile: &AngleProfile,
    noise: NoiseModel,
    repetitions: usize,
    quadratic: bool,
) -> Result<ZneMeasurements> {
    let plain = ChannelSpec::new(profile, noise).build()?;
    let folded = ChannelSpec::new(profile, noise)
        .repetitions(repetitions)
        .build()?;
    let rho = spectral::fixed_state(&plain)?;
    let last = apply(&folded, &rho)?;
    let second = apply(&plain, &last)?;
    Ok(ZneMeasurements {
        e0: energy(&rho)?,
        e_last: energy(&last)?,
        e_secondlast: energy(&second)?,
        e_folded: energy(&spectral::fixed_state(&folded)?)?,
        e_folded5: if quadratic {
            Some(folded_energy(profile, noise, 5)?)
        } else {
            None
        },
        repetitions,
    })
}

pub fn extrapolate(m: &ZneMeasurements, scheme: ZneScheme) -> Result<ZneResult> {
    let c = m.repetitions as f64;
    match scheme {
        ZneScheme::LinearFull => {
            let slope = (m.e_folded - m.e0) / (c - 1.0);
            Ok(ZneResult {
                scheme,
                e0: m.e0,
                e_last: m.e_last,
                e_secondlast: m.e_secondlast,
                e_star_hat: m.e0 - slope,
                eps_hat: slope,
                lambda_hat: f64::NAN,
                accepted: true,
            })
        }
        ZneScheme::QuadraticFull => {
            if m.repetitions != 3 {
                return Err(Error::InvalidArgument(
                    "quadratic-full needs r = 3 alongside r = 5".into(),
                ));
            }
            let e5 = m.e_folded5.ok_or_else(|| {
                Error::InvalidArgument("quadratic-full needs the r = 5 measurement".into())
            })?;
            Ok(ZneResult {
                scheme,
                e0: m.e0,
                e_last: m.e_last,
                e_secondlast: m.e_secondlast,
                e_star_hat: zne_quadratic_full(m.e0, m.e_folded, e5),
                eps_hat: f64::NAN,
                lambda_hat: f64::NAN,
                accepted: true,
            })
        }
        _ => zne_geometric(m.e0, m.e_last, m.e_secondlast, c, scheme),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_recovers_line() {
        let (e, s) = (-1.2, 0.05);
        assert!((zne_linear_full(e + s, e + 3.0 * s) - e).abs() < 1e-15);
        assert_eq!(zne_linear_full(-1.0, -1.0), -1.0);
    }

    #[test]
    fn quadratic_recovers_parabola() {
        let f = |r: f64| -1.24 + 0.01 * r - 0.002 * r * r;
        assert!((zne_quadratic_full(f(1.0), f(3.0), f(5.0)) - f(0.0)).abs() < 1e-14);
    }

    #[test]
    fn additive_inverts_model() {
        let (e, eps, lam, c) = (-1.2394, 0.01, 0.27, 3.0);
        let e0 = e + eps / (1.0 - lam);
        let r = zne_geometric(
            e0,
            e0 + (c - 1.0) * eps,
            e0 + (c - 1.0) * eps * lam,
            c,
            ZneScheme::GeomAdditive,
        )
        .unwrap();
        assert!(r.accepted);
        assert!((r.e_star_hat - e).abs() < 1e-12);
        assert!((r.lambda_hat - lam).abs() < 1e-12);
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let r = zne_geometric(-1.0, -0.9, -0.8, 3.0, ZneScheme::GeomAdditive).unwrap();
        assert!(!r.accepted);
        assert_eq!(r.e_star_hat, -1.0);
        let r = zne_geometric(-1.0, -1.0, -1.0, 3.0, ZneScheme::GeomAdditive).unwrap();
        assert!(!r.accepted);
        assert!(zne_geometric(-1.0, -0.9, -0.95, 1.0, ZneScheme::GeomAdditive).is_err());
    }

    #[test]
    fn even_repetitions_rejected() {
        let spec = AmplificationSpec {
            target: AmplificationTarget::AllGates,
            repetitions: 2,
        };
        assert!(spec.validate().is_err());
    }
}
