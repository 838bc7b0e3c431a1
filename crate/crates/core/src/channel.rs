//! Superoperators of (noisy) scale-transformation channels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gatelib::NativeGate;
use crate::layout::{self, AngleProfile, Convention, LayerCircuit, NativeCircuit, Side};
use crate::linalg::{self, c, CMatrix, CVector, ONE, ZERO};
use crate::noise::{flip_probability, Bias, NoiseModel};

/// Hermitian, unit-trace, positive semidefinite state of `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub const TOL: f64 = 1e-10;

    pub fn new(matrix: CMatrix) -> Result<DensityMatrix> {
        let rho = DensityMatrix::from_matrix_unchecked(matrix)?;
        rho.validate(Self::TOL)?;
        Ok(rho)
    }

    /// Wraps a square `2ⁿ×2ⁿ` matrix, checking only its shape.
    pub fn from_matrix_unchecked(matrix: CMatrix) -> Result<DensityMatrix> {
        let d = matrix.nrows();
        if d != matrix.ncols() || !d.is_power_of_two() {
            return Err(Error::Dimension {
                expected: d.next_power_of_two(),
                found: matrix.ncols(),
            });
        }
        Ok(DensityMatrix {
            n: d.trailing_zeros() as usize,
            matrix,
        })
    }

    pub fn maximally_mixed(n: usize) -> DensityMatrix {
        DensityMatrix {
            n,
            matrix: linalg::maximally_mixed(n),
        }
    }

    pub fn pure(psi: &[Complex64]) -> Result<DensityMatrix> {
        let v = CVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = v / c(norm, 0.0);
        DensityMatrix::new(&v * v.adjoint())
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = linalg::max_abs_diff(&self.matrix, &self.matrix.adjoint());
        if herm > tol {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = self.matrix.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let min = linalg::hermitian_eigenvalues(&self.matrix)[0];
        if min < -tol {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        0.5 * linalg::trace_norm(&(&self.matrix - &other.matrix))
    }
}

/// Linear map on column-stacked operators, `4^n_out × 4^n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    pub n_in: usize,
    pub n_out: usize,
    pub matrix: CMatrix,
}

impl Superoperator {
    pub fn identity(n: usize) -> Superoperator {
        let d = 1usize << (2 * n);
        Superoperator {
            n_in: n,
            n_out: n,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn from_matrix(n: usize, matrix: CMatrix) -> Result<Superoperator> {
        let d = 1usize << (2 * n);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: matrix.nrows(),
            });
        }
        Ok(Superoperator {
            n_in: n,
            n_out: n,
            matrix,
        })
    }

    /// Conjugation by a unitary `u`: `conj(u) ⊗ u`.
    pub fn unitary(u: &CMatrix) -> Superoperator {
        let n = u.nrows().trailing_zeros() as usize;
        Superoperator {
            n_in: n,
            n_out: n,
            matrix: linalg::kron(&u.map(|z| z.conj()), u),
        }
    }

    pub fn is_square(&self) -> bool {
        self.n_in == self.n_out
    }

    pub fn d_in(&self) -> usize {
        1 << self.n_in
    }

    pub fn d_out(&self) -> usize {
        1 << self.n_out
    }

    /// `Φ(ρ)` on a bare matrix, without any state checks.
    pub fn apply_raw(&self, rho: &CMatrix) -> CMatrix {
        linalg::unvectorize(&(&self.matrix * linalg::vectorize(rho)), self.d_out())
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &Superoperator) -> Result<Superoperator> {
        if first.n_out != self.n_in {
            return Err(Error::Dimension {
                expected: self.n_in,
                found: first.n_out,
            });
        }
        Ok(Superoperator {
            n_in: first.n_in,
            n_out: self.n_out,
            matrix: &self.matrix * &first.matrix,
        })
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`.
    pub fn choi(&self) -> CMatrix {
        let (di, dout) = (self.d_in(), self.d_out());
        CMatrix::from_fn(di * dout, di * dout, |r, col| {
            let (i, a) = (r / dout, r % dout);
            let (j, b) = (col / dout, col % dout);
            self.matrix[(a + dout * b, i + di * j)]
        })
    }

    pub fn distance(&self, other: &Superoperator) -> f64 {
        (&self.matrix - &other.matrix).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet(pub Vec<CMatrix>);

impl KrausSet {
    /// `max |Σ K†K − I|`.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.0[0].ncols();
        let sum = self
            .0
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k);
        linalg::max_abs_diff(&sum, &CMatrix::identity(d, d))
    }

    pub fn superoperator(&self) -> Superoperator {
        let k0 = &self.0[0];
        let n_in = k0.ncols().trailing_zeros() as usize;
        let n_out = k0.nrows().trailing_zeros() as usize;
        let d = k0.nrows() * k0.nrows();
        let e = k0.ncols() * k0.ncols();
        let matrix = self.0.iter().fold(CMatrix::zeros(d, e), |acc, k| {
            acc + linalg::kron(&k.map(|z| z.conj()), k)
        });
        Superoperator {
            n_in,
            n_out,
            matrix,
        }
    }
}

/// Kraus form of an MS gate `XX(θ)` with Gaussian angle error.
pub fn noisy_ms_kraus(theta: f64, model: &NoiseModel) -> Result<KrausSet> {
    model.validate()?;
    let var = model.ms_variance(theta).ok_or_else(|| {
        Error::InvalidArgument(
            "depolarizing noise has no MS Kraus form; use depolarize_kraus".into(),
        )
    })?;
    let gate = NativeGate::Xx(theta).matrix();
    if var == 0.0 {
        return Ok(KrausSet(vec![gate]));
    }
    let q = flip_probability(var);
    let flipped = NativeGate::Xx(theta - std::f64::consts::PI).matrix();
    Ok(KrausSet(vec![
        gate.map(|z| z * (1.0 - q).sqrt()),
        flipped.map(|z| z * q.sqrt()),
    ]))
}

/// Single-qubit Pauli channel `{√(1−p) I, √(p b_x) X, √(p b_y) Y, √(p b_z) Z}`.
pub fn depolarize_kraus(p: f64, bias: Bias) -> Result<KrausSet> {
    NoiseModel::Depolarizing { p, bias }.validate()?;
    let mut ks = vec![CMatrix::identity(2, 2).map(|z| z * (1.0 - p).sqrt())];
    for (w, m) in [
        (bias.x, linalg::pauli_x()),
        (bias.y, linalg::pauli_y()),
        (bias.z, linalg::pauli_z()),
    ] {
        if p * w > 0.0 {
            ks.push(m.map(|z| z * (p * w).sqrt()));
        }
    }
    Ok(KrausSet(ks))
}

/// Columns `|i⟩_inputs ⊗ |prep⟩` for every input basis state `i`.
fn embedding(nc: &NativeCircuit) -> CMatrix {
    let m = nc.n_total;
    let n_in = nc.inputs.len();
    let prep_amp: [Complex64; 2] = match nc.convention {
        Convention::Xx => [ONE, ZERO],
        Convention::Zz => [c(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2],
    };
    let mut e = CMatrix::zeros(1 << m, 1 << n_in);
    for i in 0..1usize << n_in {
        for a in 0..1usize << nc.prep.len() {
            let mut idx = 0usize;
            let mut amp = ONE;
            for (t, &q) in nc.inputs.iter().enumerate() {
                idx |= ((i >> (n_in - 1 - t)) & 1) << (m - 1 - q);
            }
            for (t, &q) in nc.prep.iter().enumerate() {
                let bit = (a >> (nc.prep.len() - 1 - t)) & 1;
                idx |= bit << (m - 1 - q);
                amp *= prep_amp[bit];
            }
            if amp != ZERO {
                e[(idx, i)] = amp;
            }
        }
    }
    e
}

fn pauli_channel(rho: &mut CMatrix, q: usize, n: usize, p: f64, bias: Bias) {
    if p == 0.0 {
        return;
    }
    let m = linalg::qubit_mask(&[q], n);
    let mut acc = rho.map(|z| z * (1.0 - p));
    for (w, x, z) in [(bias.x, m, 0), (bias.y, m, m), (bias.z, 0, m)] {
        if w > 0.0 {
            let mut t = rho.clone();
            linalg::conjugate_pauli(&mut t, x, z);
            acc += t.map(|v| v * (p * w));
        }
    }
    *rho = acc;
}

/// Bit-flip and phase masks of the Pauli generating a native rotation, and
/// the rotation angle in the `exp(−iθ/2 P)` convention.
fn rotation_generator(
    gate: &NativeGate,
    qubits: &[usize],
    n: usize,
) -> Option<(f64, usize, usize)> {
    let m = linalg::qubit_mask(qubits, n);
    match *gate {
        NativeGate::Xx(t) => Some((t, m, 0)),
        NativeGate::Zz(t) => Some((t, 0, m)),
        NativeGate::Rx { angle, .. } => Some((-angle, m, 0)),
        NativeGate::Rz { angle, .. } => Some((-angle, 0, m)),
        NativeGate::H { .. } => None,
    }
}

/// `ρ ← G ρ G†` for a native gate placed on `qubits`.
fn conjugate_native(rho: &mut CMatrix, gate: &NativeGate, qubits: &[usize], n: usize) {
    match rotation_generator(gate, qubits, n) {
        Some((theta, x, z)) => linalg::conjugate_pauli_rotation(rho, theta, x, z),
        None => linalg::conjugate(rho, &gate.matrix(), qubits, n),
    }
}

fn evolve(rho: &mut CMatrix, nc: &NativeCircuit, noise: &NoiseModel) {
    let m = nc.n_total;
    let bias = match (noise, nc.convention) {
        (NoiseModel::Depolarizing { bias, .. }, Convention::Zz) => bias.swapped(),
        (NoiseModel::Depolarizing { bias, .. }, Convention::Xx) => *bias,
        _ => Bias::ISOTROPIC,
    };
    for op in &nc.ops {
        if !op.gate.is_two_qubit() {
            conjugate_native(rho, &op.gate, &op.qubits, m);
            continue;
        }
        match *noise {
            NoiseModel::Depolarizing { p, .. } => {
                for &q in &op.qubits {
                    pauli_channel(rho, q, m, p / 2.0, bias);
                }
                conjugate_native(rho, &op.gate, &op.qubits, m);
                for &q in &op.qubits {
                    pauli_channel(rho, q, m, p / 2.0, bias);
                }
            }
            _ => {
                let (theta, x, z) =
                    rotation_generator(&op.gate, &op.qubits, m).expect("MS gates are rotations");
                let q = flip_probability(noise.ms_variance(theta).unwrap_or(0.0));
                // a π error on the angle is the gate's own Pauli applied first
                if q > 0.0 {
                    let mut flipped = rho.clone();
                    linalg::conjugate_pauli(&mut flipped, x, z);
                    *rho = rho.map(|v| v * (1.0 - q)) + flipped.map(|v| v * q);
                }
                conjugate_native(rho, &op.gate, &op.qubits, m);
            }
        }
    }
}

/// Superoperator of a lowered circuit under `noise`.
///
/// Noiseless circuits go through their isometry; noisy ones evolve each input
/// matrix unit `|i⟩⟨j|`, `i ≤ j`, and fill `Φ(|j⟩⟨i|) = Φ(|i⟩⟨j|)†`.
pub fn assemble_native(nc: &NativeCircuit, noise: &NoiseModel) -> Result<Superoperator> {
    noise.validate()?;
    let m = nc.n_total;
    let n_in = nc.inputs.len();
    let n_out = nc.output_window.len();
    let window: Vec<usize> = nc.output_window.clone().collect();
    let emb = embedding(nc);
    let d_in = 1usize << n_in;
    let d_out = 1usize << n_out;
    if noise.is_noiseless() {
        let mut v = emb;
        for op in &nc.ops {
            linalg::apply_left(&mut v, &op.gate.matrix(), &op.qubits, m);
        }
        // Kraus operators ⟨r|_discard V
        let d_rest = 1usize << (m - n_out);
        let mut kraus = vec![CMatrix::zeros(d_out, d_in); d_rest];
        for row in 0..1usize << m {
            let a = linalg::gather_bits(row, &window, m);
            let r = linalg::gather_bits(row, &nc.discard, m);
            for col in 0..d_in {
                kraus[r][(a, col)] = v[(row, col)];
            }
        }
        return Ok(KrausSet(kraus).superoperator());
    }
    let mut s = CMatrix::zeros(d_out * d_out, d_in * d_in);
    for j in 0..d_in {
        for i in 0..=j {
            let mut rho = emb.column(i) * emb.column(j).adjoint();
            evolve(&mut rho, nc, noise);
            let out = linalg::partial_trace(&rho, m, &window);
            s.set_column(i + d_in * j, &linalg::vectorize(&out));
            if i != j {
                s.set_column(j + d_in * i, &linalg::vectorize(&out.adjoint()));
            }
        }
    }
    Ok(Superoperator {
        n_in,
        n_out,
        matrix: s,
    })
}

pub fn assemble_superoperator(cone: &LayerCircuit, noise: &NoiseModel) -> Result<Superoperator> {
    cone.check()?;
    assemble_native(&layout::compile(cone), noise)
}

/// `Φ(ρ)` with the output re-Hermitized and checked.
pub fn apply_channel(s: &Superoperator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.n_qubits() != s.n_in {
        return Err(Error::Dimension {
            expected: s.n_in,
            found: rho.n_qubits(),
        });
    }
    let out = s.apply_raw(rho.matrix());
    let drift = linalg::max_abs_diff(&out, &out.adjoint());
    if drift > 1e-8 {
        return Err(Error::InvalidState(format!(
            "output drifted from Hermitian by {drift:.3e}"
        )));
    }
    DensityMatrix::new(linalg::hermitian_part(&out))
}

/// Equal-weight mixture `(S_L + S_R)/2`.
pub fn mixture_channel(left: &Superoperator, right: &Superoperator) -> Result<Superoperator> {
    if left.n_in != right.n_in || left.n_out != right.n_out {
        return Err(Error::Dimension {
            expected: left.n_in,
            found: right.n_in,
        });
    }
    Ok(Superoperator {
        n_in: left.n_in,
        n_out: left.n_out,
        matrix: (&left.matrix + &right.matrix).scale(0.5),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CptpReport {
    pub tp_residual: f64,
    pub choi_min_eigenvalue: f64,
    pub max_abs_eigenvalue: f64,
}

impl CptpReport {
    pub const TOL: f64 = 1e-10;

    pub fn passed(&self) -> bool {
        self.tp_residual < Self::TOL
            && self.choi_min_eigenvalue >= -Self::TOL
            && self.max_abs_eigenvalue <= 1.0 + Self::TOL
    }
}

pub fn verify_cptp(s: &Superoperator) -> CptpReport {
    let (di, dout) = (s.d_in(), s.d_out());
    let mut tp_residual: f64 = 0.0;
    for col in 0..di * di {
        let tr: Complex64 = (0..dout).map(|a| s.matrix[(a + dout * a, col)]).sum();
        let target = if col % di == col / di { ONE } else { ZERO };
        tp_residual = tp_residual.max((tr - target).norm());
    }
    let choi_min_eigenvalue = linalg::hermitian_eigenvalues(&s.choi())[0];
    let max_abs_eigenvalue = if s.is_square() {
        linalg::eigenvalues(&s.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    CptpReport {
        tp_residual,
        choi_min_eigenvalue,
        max_abs_eigenvalue,
    }
}

/// Which local channel to iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Alignment {
    #[default]
    Mixture,
    Left,
    Right,
}

impl std::str::FromStr for Alignment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Alignment> {
        match s.to_ascii_lowercase().as_str() {
            "mixture" | "mix" => Ok(Alignment::Mixture),
            "left" => Ok(Alignment::Left),
            "right" => Ok(Alignment::Right),
            _ => Err(Error::InvalidArgument(format!("unknown alignment `{s}`"))),
        }
    }
}

/// The three-qubit scale channel used by every experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub profile: AngleProfile,
    pub noise: NoiseModel,
    pub alignment: Alignment,
    pub n: usize,
    /// Each MS gate runs as `G (G† G)^k` with `2k+1 = repetitions`.
    pub repetitions: usize,
}

impl ChannelSpec {
    pub fn new(profile: &AngleProfile, noise: NoiseModel) -> ChannelSpec {
        ChannelSpec {
            profile: profile.clone(),
            noise,
            alignment: Alignment::Mixture,
            n: 3,
            repetitions: 1,
        }
    }

    pub fn alignment(mut self, alignment: Alignment) -> ChannelSpec {
        self.alignment = alignment;
        self
    }

    pub fn repetitions(mut self, r: usize) -> ChannelSpec {
        self.repetitions = r;
        self
    }

    pub fn side_circuit(&self, side: Side) -> Result<NativeCircuit> {
        let cone = layout::segment_cone(&self.profile, self.n, side)?;
        let nc = layout::compile(&cone);
        crate::mitigation::fold_ms_gates(&nc, self.repetitions)
    }

    pub fn build(&self) -> Result<Superoperator> {
        let side = |s| assemble_native(&self.side_circuit(s)?, &self.noise);
        match self.alignment {
            Alignment::Left => side(Side::Left),
            Alignment::Right => side(Side::Right),
            Alignment::Mixture => mixture_channel(&side(Side::Left)?, &side(Side::Right)?),
        }
    }
}

/// Noiseless mixture channel of a profile.
pub fn noiseless_channel(profile: &AngleProfile) -> Result<Superoperator> {
    ChannelSpec::new(profile, NoiseModel::Noiseless).build()
}
