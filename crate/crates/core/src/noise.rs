//! Gate noise models and their textual form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pauli weights of a depolarizing channel. Axes are those of the frame the
/// circuit is written in; the ZZ frame sees them with X and Z exchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bias {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Bias {
    pub const ISOTROPIC: Bias = Bias {
        x: 1.0 / 3.0,
        y: 1.0 / 3.0,
        z: 1.0 / 3.0,
    };
    pub const X: Bias = Bias {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const Y: Bias = Bias {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const Z: Bias = Bias {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Bias> {
        let b = Bias { x, y, z };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.x, self.y, self.z];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0)
            || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidArgument(format!(
                "bias weights must be nonnegative and sum to 1, got ({}, {}, {})",
                self.x, self.y, self.z
            )));
        }
        Ok(())
    }

    pub fn swapped(&self) -> Bias {
        Bias {
            x: self.z,
            y: self.y,
            z: self.x,
        }
    }

    fn label(&self) -> Option<&'static str> {
        [
            (Bias::ISOTROPIC, "iso"),
            (Bias::X, "x"),
            (Bias::Y, "y"),
            (Bias::Z, "z"),
        ]
        .iter()
        .find(|(b, _)| b == self)
        .map(|(_, l)| *l)
    }
}

impl Default for Bias {
    fn default() -> Self {
        Bias::ISOTROPIC
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    Noiseless,
    /// Gaussian MS angle error of variance `sigma2` on every MS gate.
    AngleImprecision { sigma2: f64 },
    /// Variance `sigma2·|θ|/(π/2)` for an MS gate of angle `θ`.
    AngleProportional { sigma2: f64 },
    /// Single-qubit depolarizing `p/2` on both qubits before and after every MS gate.
    Depolarizing { p: f64, bias: Bias },
}

impl NoiseModel {
    pub fn imprecision(sigma2: f64) -> NoiseModel {
        NoiseModel::AngleImprecision { sigma2 }
    }

    pub fn proportional(sigma2: f64) -> NoiseModel {
        NoiseModel::AngleProportional { sigma2 }
    }

    pub fn depolarizing(p: f64) -> NoiseModel {
        NoiseModel::Depolarizing {
            p,
            bias: Bias::ISOTROPIC,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        match *self {
            NoiseModel::Noiseless => true,
            NoiseModel::AngleImprecision { sigma2 } | NoiseModel::AngleProportional { sigma2 } => {
                sigma2 == 0.0
            }
            NoiseModel::Depolarizing { p, .. } => p == 0.0,
        }
    }

    /// Same family at a new strength `eps` (σ² or p).
    pub fn with_strength(&self, eps: f64) -> NoiseModel {
        match *self {
            NoiseModel::Noiseless => NoiseModel::imprecision(eps),
            NoiseModel::AngleImprecision { .. } => NoiseModel::AngleImprecision { sigma2: eps },
            NoiseModel::AngleProportional { .. } => NoiseModel::AngleProportional { sigma2: eps },
            NoiseModel::Depolarizing { bias, .. } => NoiseModel::Depolarizing { p: eps, bias },
        }
    }

    pub fn strength(&self) -> f64 {
        match *self {
            NoiseModel::Noiseless => 0.0,
            NoiseModel::AngleImprecision { sigma2 } | NoiseModel::AngleProportional { sigma2 } => {
                sigma2
            }
            NoiseModel::Depolarizing { p, .. } => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Noiseless => Ok(()),
            NoiseModel::AngleImprecision { sigma2 } | NoiseModel::AngleProportional { sigma2 } => {
                if sigma2.is_finite() && sigma2 >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "sigma2 must be finite and ≥ 0, got {sigma2}"
                    )))
                }
            }
            NoiseModel::Depolarizing { p, bias } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!(
                        "p must lie in [0, 1], got {p}"
                    )));
                }
                bias.validate()
            }
        }
    }

    /// Variance of the MS angle error for a gate of angle `theta`, if the model
    /// is an angle-error model.
    pub fn ms_variance(&self, theta: f64) -> Option<f64> {
        match *self {
            NoiseModel::Noiseless => Some(0.0),
            NoiseModel::AngleImprecision { sigma2 } => Some(sigma2),
            NoiseModel::AngleProportional { sigma2 } => {
                Some(sigma2 * theta.abs() / std::f64::consts::FRAC_PI_2)
            }
            NoiseModel::Depolarizing { .. } => None,
        }
    }
}

/// Probability that a Gaussian angle error of variance `sigma2` acts as a
/// π rotation: `(1 − e^{−σ²/2})/2`.
pub fn flip_probability(sigma2: f64) -> f64 {
    -0.5 * (-sigma2 / 2.0).exp_m1()
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NoiseModel::Noiseless => write!(f, "noiseless"),
            NoiseModel::AngleImprecision { sigma2 } => write!(f, "imprecision:sigma2={sigma2}"),
            NoiseModel::AngleProportional { sigma2 } => write!(f, "proportional:sigma2={sigma2}"),
            NoiseModel::Depolarizing { p, bias } => match bias.label() {
                Some("iso") => write!(f, "depolarizing:p={p}"),
                Some(l) => write!(f, "depolarizing:p={p},bias={l}"),
                None => write!(
                    f,
                    "depolarizing:p={p},bias={}/{}/{}",
                    bias.x, bias.y, bias.z
                ),
            },
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(spec: &str) -> Result<NoiseModel> {
        let fail = |reason: &str| Error::NoiseSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let s = spec.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let mut params = Vec::new();
        if let Some(rest) = rest {
            for kv in rest.split(',') {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| fail("parameters must look like key=value"))?;
                params.push((k.trim(), v.trim()));
            }
        }
        let number = |key: &str| -> Result<f64> {
            let v = params
                .iter()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| fail(&format!("missing `{key}`")))?
                .1;
            v.parse::<f64>()
                .map_err(|_| fail(&format!("`{key}` is not a number")))
        };
        let allow = |keys: &[&str]| -> Result<()> {
            match params.iter().find(|(k, _)| !keys.contains(k)) {
                Some((k, _)) => Err(fail(&format!("unexpected parameter `{k}`"))),
                None => Ok(()),
            }
        };
        let model = match head {
            "noiseless" => {
                if rest.is_some() {
                    return Err(fail("noiseless takes no parameters"));
                }
                NoiseModel::Noiseless
            }
            "imprecision" => {
                allow(&["sigma2"])?;
                NoiseModel::AngleImprecision {
                    sigma2: number("sigma2")?,
                }
            }
            "proportional" => {
                allow(&["sigma2"])?;
                NoiseModel::AngleProportional {
                    sigma2: number("sigma2")?,
                }
            }
            "depolarizing" => {
                allow(&["p", "bias"])?;
                let bias = match params.iter().find(|(k, _)| *k == "bias").map(|(_, v)| *v) {
                    None | Some("iso") => Bias::ISOTROPIC,
                    Some("x") => Bias::X,
                    Some("y") => Bias::Y,
                    Some("z") => Bias::Z,
                    Some(_) => return Err(fail("bias must be x, y, z or iso")),
                };
                NoiseModel::Depolarizing {
                    p: number("p")?,
                    bias,
                }
            }
            _ => return Err(fail("unknown model")),
        };
        model.validate().map_err(|e| fail(&e.to_string()))?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grammar() {
        assert_eq!(
            "noiseless".parse::<NoiseModel>().unwrap(),
            NoiseModel::Noiseless
        );
        assert_eq!(
            "imprecision:sigma2=0.001".parse::<NoiseModel>().unwrap(),
            NoiseModel::imprecision(0.001)
        );
        assert_eq!(
            "depolarizing:p=0.01,bias=z".parse::<NoiseModel>().unwrap(),
            NoiseModel::Depolarizing {
                p: 0.01,
                bias: Bias::Z
            }
        );
        for bad in [
            "bogus:x=1",
            "imprecision",
            "imprecision:sigma2=-1",
            "depolarizing:p=2",
            "noiseless:a=1",
        ] {
            let err = bad.parse::<NoiseModel>().unwrap_err().to_string();
            assert!(err.contains("imprecision:sigma2=<f>"), "{err}");
        }
    }

    #[test]
    fn display_round_trips() {
        for m in [
            NoiseModel::Noiseless,
            NoiseModel::imprecision(0.112),
            NoiseModel::proportional(1e-3),
            NoiseModel::Depolarizing {
                p: 0.01,
                bias: Bias::Y,
            },
            NoiseModel::depolarizing(0.25),
        ] {
            assert_eq!(m.to_string().parse::<NoiseModel>().unwrap(), m);
        }
    }

    #[test]
    fn flip_weight_at_fitted_variance() {
        assert!((flip_probability(0.112) - 0.027230).abs() < 1e-5);
    }
}
