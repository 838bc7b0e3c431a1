//! Two-qubit matchgates `W(θ)`, `U(θ)`, the native trapped-ion gate set, and
//! the two native decompositions `C1` and `C2`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, ZERO};

/// `W(θ)`: rotation by `θ − π/4` on span{|00⟩,|11⟩}, fixed mixer on the odd block.
pub fn w_matrix(theta: f64) -> CMatrix {
    let (s, co) = (theta - FRAC_PI_4).sin_cos();
    let r = FRAC_1_SQRT_2;
    linalg::real_matrix(
        4,
        4,
        &[
            co, 0.0, 0.0, s, //
            0.0, r, -r, 0.0, //
            0.0, r, r, 0.0, //
            -s, 0.0, 0.0, co,
        ],
    )
}

/// `U(θ)`: rotation by `θ` on span{|00⟩,|11⟩}, identity on the odd block.
pub fn u_matrix(theta: f64) -> CMatrix {
    let (s, co) = theta.sin_cos();
    linalg::real_matrix(
        4,
        4,
        &[
            co, 0.0, 0.0, s, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            -s, 0.0, 0.0, co,
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    W,
    U,
}

impl GateKind {
    pub fn matrix(self, theta: f64) -> CMatrix {
        match self {
            GateKind::W => w_matrix(theta),
            GateKind::U => u_matrix(theta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Variant {
    #[default]
    C1,
    C2,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::C1 => "C1",
            Variant::C2 => "C2",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C1" => Ok(Variant::C1),
            "C2" => Ok(Variant::C2),
            _ => Err(Error::InvalidArgument(format!(
                "unknown variant `{s}` (expected C1 or C2)"
            ))),
        }
    }
}

/// A native gate on local qubits of a two-qubit block.
///
/// `Xx`/`Zz` act on (0, 1). `Rx`/`Rz` use the `exp(+iφ/2 σ)` sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NativeGate {
    Xx(f64),
    Zz(f64),
    Rz { qubit: usize, angle: f64 },
    Rx { qubit: usize, angle: f64 },
    H { qubit: usize },
}

impl NativeGate {
    pub fn is_two_qubit(&self) -> bool {
        matches!(self, NativeGate::Xx(_) | NativeGate::Zz(_))
    }

    /// Local qubits the gate touches.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            NativeGate::Xx(_) | NativeGate::Zz(_) => vec![0, 1],
            NativeGate::Rz { qubit, .. }
            | NativeGate::Rx { qubit, .. }
            | NativeGate::H { qubit } => {
                vec![qubit]
            }
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            NativeGate::Xx(a) | NativeGate::Zz(a) => Some(a),
            NativeGate::Rz { angle, .. } | NativeGate::Rx { angle, .. } => Some(angle),
            NativeGate::H { .. } => None,
        }
    }

    /// Gate matrix on its own support (2×2 or 4×4).
    pub fn matrix(&self) -> CMatrix {
        match *self {
            NativeGate::Xx(t) => ms_matrix(t, false),
            NativeGate::Zz(t) => ms_matrix(t, true),
            NativeGate::Rz { angle, .. } => {
                let (s, co) = (angle / 2.0).sin_cos();
                linalg::from_rows(&[&[c(co, s), ZERO], &[ZERO, c(co, -s)]])
            }
            NativeGate::Rx { angle, .. } => {
                let (s, co) = (angle / 2.0).sin_cos();
                linalg::from_rows(&[&[c(co, 0.0), c(0.0, s)], &[c(0.0, s), c(co, 0.0)]])
            }
            NativeGate::H { .. } => linalg::hadamard(),
        }
    }

    /// Same gate in the other Pauli frame (X ↔ Z); Hadamards are unchanged.
    pub fn swapped(&self) -> NativeGate {
        match *self {
            NativeGate::Xx(t) => NativeGate::Zz(t),
            NativeGate::Zz(t) => NativeGate::Xx(t),
            NativeGate::Rz { qubit, angle } => NativeGate::Rx { qubit, angle },
            NativeGate::Rx { qubit, angle } => NativeGate::Rz { qubit, angle },
            h @ NativeGate::H { .. } => h,
        }
    }

    pub fn with_angle(&self, angle: f64) -> NativeGate {
        match *self {
            NativeGate::Xx(_) => NativeGate::Xx(angle),
            NativeGate::Zz(_) => NativeGate::Zz(angle),
            NativeGate::Rz { qubit, .. } => NativeGate::Rz { qubit, angle },
            NativeGate::Rx { qubit, .. } => NativeGate::Rx { qubit, angle },
            h @ NativeGate::H { .. } => h,
        }
    }
}

/// `exp(-iθ/2 P⊗P)` with `P = X` or `Z`.
fn ms_matrix(theta: f64, zz: bool) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    let p = if zz {
        linalg::pauli_z()
    } else {
        linalg::pauli_x()
    };
    let pp = linalg::kron(&p, &p);
    CMatrix::identity(4, 4).map(|z| z * co) - pp.map(|z| z * c(0.0, s))
}

/// Ordered native gates; the first entry acts first.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSequence(pub Vec<NativeGate>);

impl GateSequence {
    pub fn gates(&self) -> &[NativeGate] {
        &self.0
    }

    pub fn ms_count(&self) -> usize {
        self.0.iter().filter(|g| g.is_two_qubit()).count()
    }

    pub fn single_qubit_count(&self) -> usize {
        self.0.len() - self.ms_count()
    }

    /// Product of the sequence on `n_qubits` (1 or 2) local qubits.
    pub fn unitary(&self, n_qubits: usize) -> Result<CMatrix> {
        let d = 1usize << n_qubits;
        let mut u = CMatrix::identity(d, d);
        for g in &self.0 {
            let qs = g.qubits();
            if qs.iter().any(|&q| q >= n_qubits) {
                return Err(Error::Dimension {
                    expected: n_qubits,
                    found: qs.len().max(qs[0] + 1),
                });
            }
            linalg::apply_left(&mut u, &g.matrix(), &qs, n_qubits);
        }
        Ok(u)
    }

    pub fn swapped(&self) -> GateSequence {
        GateSequence(self.0.iter().map(NativeGate::swapped).collect())
    }
}

/// Native decomposition of `W(θ)` or `U(θ)`. `Z₁` of the usual notation is
/// local qubit 1 and `Z₂` local qubit 0.
pub fn decompose_gate(kind: GateKind, theta: f64, variant: Variant) -> GateSequence {
    let shifted = match kind {
        GateKind::W => theta - FRAC_PI_2,
        GateKind::U => theta,
    };
    let seq = match variant {
        Variant::C1 => vec![
            NativeGate::Xx(FRAC_PI_2),
            NativeGate::Rz {
                qubit: 1,
                angle: theta,
            },
            NativeGate::Rz {
                qubit: 0,
                angle: shifted,
            },
            NativeGate::Xx(-FRAC_PI_2),
        ],
        Variant::C2 => vec![
            NativeGate::Rz {
                qubit: 1,
                angle: FRAC_PI_2,
            },
            NativeGate::Xx(-theta),
            NativeGate::Rz {
                qubit: 1,
                angle: -FRAC_PI_2,
            },
            NativeGate::Rz {
                qubit: 0,
                angle: -FRAC_PI_2,
            },
            NativeGate::Xx(shifted),
            NativeGate::Rz {
                qubit: 0,
                angle: FRAC_PI_2,
            },
        ],
    };
    GateSequence(seq)
}

/// Global phase `φ` with `product(seq) = e^{iφ}·target` to 1e-10.
pub fn check_equivalence(seq: &GateSequence, target: &CMatrix) -> Result<f64> {
    let n = match target.nrows() {
        2 => 1,
        4 => 2,
        d => {
            return Err(Error::Dimension {
                expected: 4,
                found: d,
            })
        }
    };
    let prod = seq.unitary(n)?;
    let overlap = (target.adjoint() * &prod).trace();
    let phase = if overlap.norm() > 1e-300 {
        overlap.arg()
    } else {
        0.0
    };
    let rotated = target.map(|z| z * c(phase.cos(), phase.sin()));
    let deviation = linalg::max_abs_diff(&prod, &rotated);
    if deviation < 1e-10 {
        Ok(phase)
    } else {
        Err(Error::Mismatch { deviation })
    }
}
