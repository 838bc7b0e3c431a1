//! Pauli expectations, the energy-density estimator and the initial product states.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::DensityMatrix;
use crate::error::{Error, Result};
use crate::layout::Convention;
use crate::linalg::{self, c, CMatrix, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(ch: char) -> Result<Pauli> {
        match ch {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            _ => Err(Error::InvalidArgument(format!(
                "unknown Pauli letter `{ch}`"
            ))),
        }
    }

    /// X ↔ Z.
    pub fn swapped(self) -> Pauli {
        match self {
            Pauli::X => Pauli::Z,
            Pauli::Z => Pauli::X,
            p => p,
        }
    }

    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => CMatrix::identity(2, 2),
            Pauli::X => linalg::pauli_x(),
            Pauli::Y => linalg::pauli_y(),
            Pauli::Z => linalg::pauli_z(),
        }
    }
}

/// Tensor product of Paulis on `(site, letter)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    terms: Vec<(usize, Pauli)>,
}

impl PauliString {
    pub fn new(terms: Vec<(usize, Pauli)>) -> Result<PauliString> {
        let mut sites: Vec<usize> = terms.iter().map(|t| t.0).collect();
        sites.sort_unstable();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "repeated site in Pauli string".into(),
            ));
        }
        Ok(PauliString { terms })
    }

    /// Letters placed on consecutive sites from `start`, e.g. `("XZX", 0)`.
    pub fn parse(letters: &str, start: usize) -> Result<PauliString> {
        let terms = letters
            .chars()
            .enumerate()
            .map(|(i, ch)| Pauli::from_char(ch).map(|p| (start + i, p)))
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(terms)
    }

    pub fn terms(&self) -> &[(usize, Pauli)] {
        &self.terms
    }

    pub fn swapped(&self) -> PauliString {
        PauliString {
            terms: self.terms.iter().map(|&(q, p)| (q, p.swapped())).collect(),
        }
    }

    pub fn max_site(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }

    /// Dense `2ⁿ×2ⁿ` matrix.
    pub fn matrix(&self, n: usize) -> CMatrix {
        let factors: Vec<CMatrix> = (0..n)
            .map(|q| {
                self.terms
                    .iter()
                    .find(|t| t.0 == q)
                    .map_or(Pauli::I, |t| t.1)
                    .matrix()
            })
            .collect();
        linalg::kron_all(&factors)
    }
}

/// `Tr(ρP)`; the imaginary part must vanish to 1e-9.
pub fn pauli_expectation(rho: &DensityMatrix, p: &PauliString) -> Result<f64> {
    let n = rho.n_qubits();
    if p.max_site().is_some_and(|s| s >= n) {
        return Err(Error::Dimension {
            expected: n,
            found: p.max_site().unwrap() + 1,
        });
    }
    // P|i⟩ = phase(i)|i ⊕ flip⟩, so Tr(ρP) = Σ_i ρ[i, i⊕flip]·phase(i)
    let mut flip = 0usize;
    for &(q, l) in p.terms() {
        if matches!(l, Pauli::X | Pauli::Y) {
            flip |= 1 << (n - 1 - q);
        }
    }
    let m = rho.matrix();
    let mut acc = ZERO;
    for i in 0..1usize << n {
        let mut phase = c(1.0, 0.0);
        for &(q, l) in p.terms() {
            let bit = (i >> (n - 1 - q)) & 1;
            let sign = if bit == 1 { -1.0 } else { 1.0 };
            phase *= match l {
                Pauli::I | Pauli::X => c(1.0, 0.0),
                Pauli::Z => c(sign, 0.0),
                Pauli::Y => c(0.0, sign),
            };
        }
        acc += m[(i, i ^ flip)] * phase;
    }
    if acc.im.abs() > 1e-9 {
        return Err(Error::NotReal(acc.im));
    }
    Ok(acc.re)
}

fn expect(rho: &DensityMatrix, letters: &str, start: usize, conv: Convention) -> Result<f64> {
    let p = PauliString::parse(letters, start)?;
    let p = match conv {
        Convention::Xx => p,
        Convention::Zz => p.swapped(),
    };
    pauli_expectation(rho, &p)
}

/// Energy per site of `H = Σ −X_i X_{i+1} + X_{i−1} Z_i X_{i+1}` on a three-qubit
/// window: the bond term averaged over both bonds, the three-body term centred.
/// In the ZZ convention the letters are exchanged.
pub fn energy_density(rho: &DensityMatrix, conv: Convention) -> Result<f64> {
    if rho.n_qubits() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            found: rho.n_qubits(),
        });
    }
    let bonds = expect(rho, "XX", 0, conv)? + expect(rho, "XX", 1, conv)?;
    Ok(-0.5 * bonds + expect(rho, "XZX", 0, conv)?)
}

/// Variant of [`energy_density`] using only the left bond.
pub fn energy_density_single_bond(rho: &DensityMatrix, conv: Convention) -> Result<f64> {
    if rho.n_qubits() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            found: rho.n_qubits(),
        });
    }
    Ok(-expect(rho, "XX", 0, conv)? + expect(rho, "XZX", 0, conv)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Psi1,
    Psi2,
}

impl FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<InitialState> {
        match s.to_ascii_lowercase().as_str() {
            "psi1" => Ok(InitialState::Psi1),
            "psi2" => Ok(InitialState::Psi2),
            _ => Err(Error::InvalidArgument(format!(
                "unknown initial state `{s}` (psi1 or psi2)"
            ))),
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialState::Psi1 => "psi1",
            InitialState::Psi2 => "psi2",
        })
    }
}

/// `a|0⟩ + b|1⟩` on every qubit, written in the given frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductState {
    pub a: Complex64,
    pub b: Complex64,
    pub convention: Convention,
}

impl ProductState {
    /// Hardware-frame amplitudes of the two mean-field states.
    pub fn of(which: InitialState) -> ProductState {
        let s = 2f64.sqrt();
        let big = ((3.0 + 2.0 * s) / 6.0).sqrt();
        let small = ((3.0 - 2.0 * s) / 6.0).sqrt();
        let (a, b) = match which {
            InitialState::Psi1 => (big, -small),
            InitialState::Psi2 => (small, big),
        };
        ProductState {
            a: c(a, 0.0),
            b: c(b, 0.0),
            convention: Convention::Zz,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }

    /// The same state in the other frame (`H` on the qubit).
    pub fn swapped(&self) -> ProductState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        ProductState {
            a: (self.a + self.b) * h,
            b: (self.a - self.b) * h,
            convention: self.convention.swapped(),
        }
    }

    pub fn density(&self, n: usize) -> Result<DensityMatrix> {
        let single = [self.a, self.b];
        let psi: Vec<Complex64> = (0..1usize << n)
            .map(|i| (0..n).map(|q| single[(i >> (n - 1 - q)) & 1]).product())
            .collect();
        DensityMatrix::pure(&psi)
    }
}

/// `n`-qubit product state in the simulation (XX) frame.
pub fn initial_state(which: InitialState, n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    ProductState::of(which).swapped().density(n)
}

/// Observables under their hardware-frame names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observable {
    X,
    Z,
    ZZ,
    ZXZ,
    Energy,
}

impl Observable {
    pub const ALL: [Observable; 5] = [
        Observable::X,
        Observable::Z,
        Observable::ZZ,
        Observable::ZXZ,
        Observable::Energy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::X => "X",
            Observable::Z => "Z",
            Observable::ZZ => "ZZ",
            Observable::ZXZ => "ZXZ",
            Observable::Energy => "energy",
        }
    }

    /// Expectation on a three-qubit simulation-frame state. Single-site terms
    /// average the three sites, `ZZ` the two bonds.
    pub fn measure(self, rho: &DensityMatrix) -> Result<f64> {
        let hw = Convention::Zz;
        match self {
            Observable::X => Ok((0..3)
                .map(|q| expect(rho, "X", q, hw))
                .sum::<Result<f64>>()?
                / 3.0),
            Observable::Z => Ok((0..3)
                .map(|q| expect(rho, "Z", q, hw))
                .sum::<Result<f64>>()?
                / 3.0),
            Observable::ZZ => Ok((expect(rho, "ZZ", 0, hw)? + expect(rho, "ZZ", 1, hw)?) / 2.0),
            Observable::ZXZ => expect(rho, "ZXZ", 0, hw),
            Observable::Energy => energy_density(rho, Convention::Xx),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Observable> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("unknown observable `{s}` (X, Z, ZZ, ZXZ, energy)"))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expectation_matches_dense_trace() {
        let rho = initial_state(InitialState::Psi1, 3).unwrap();
        for s in ["XYZ", "ZIX", "YY"] {
            let p = PauliString::parse(s, 0).unwrap();
            let dense = (rho.matrix() * p.matrix(3)).trace().re;
            assert!((pauli_expectation(&rho, &p).unwrap() - dense).abs() < 1e-14);
        }
    }

    #[test]
    fn mean_field_energies() {
        let e1 = energy_density(
            &initial_state(InitialState::Psi1, 3).unwrap(),
            Convention::Xx,
        )
        .unwrap();
        let e2 = energy_density(
            &initial_state(InitialState::Psi2, 3).unwrap(),
            Convention::Xx,
        )
        .unwrap();
        assert!((e1 + 32.0 / 27.0).abs() < 1e-12);
        assert!((e2 + 16.0 / 27.0).abs() < 1e-12);
    }

    #[test]
    fn observable_names_round_trip() {
        for o in Observable::ALL {
            assert_eq!(o.name().parse::<Observable>().unwrap(), o);
        }
        assert!("Y".parse::<Observable>().is_err());
    }
}
