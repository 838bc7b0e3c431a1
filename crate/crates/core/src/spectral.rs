//! Fixed points, spectra and scaling dimensions of channels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{DensityMatrix, Superoperator};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub state: DensityMatrix,
    pub iterations: usize,
    /// `‖Φ(ρ) − ρ‖₁` at the returned state.
    pub residual: f64,
}

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITERS: usize = 100_000;
pub const EIGEN_RESIDUAL_BOUND: f64 = 1e-8;

/// Power iteration from the maximally mixed state until successive iterates
/// differ by less than `tol` in trace norm.
pub fn fixed_point(s: &Superoperator, tol: f64, max_iters: usize) -> Result<FixedPoint> {
    if !s.is_square() {
        return Err(Error::Dimension {
            expected: s.n_in,
            found: s.n_out,
        });
    }
    let mut rho = linalg::maximally_mixed(s.n_in);
    let mut change = f64::INFINITY;
    for it in 1..=max_iters {
        let next = linalg::hermitian_part(&s.apply_raw(&rho));
        change = linalg::trace_norm(&(&next - &rho));
        rho = next;
        if change < tol {
            let residual = linalg::trace_norm(&(linalg::hermitian_part(&s.apply_raw(&rho)) - &rho));
            let state = DensityMatrix::new(rho)?;
            return Ok(FixedPoint {
                state,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        change,
    })
}

/// Fixed point with the default tolerance and iteration cap.
pub fn fixed_state(s: &Superoperator) -> Result<DensityMatrix> {
    Ok(fixed_point(s, FIXED_POINT_TOL, FIXED_POINT_MAX_ITERS)?.state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Eigenvalues by descending modulus.
    pub eigenvalues: Vec<Complex64>,
    /// `‖S v − λ v‖ / ‖v‖` per eigenpair.
    pub residuals: Vec<f64>,
}

impl Spectrum {
    pub fn deltas(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| delta_of(*l)).collect()
    }
}

/// `−log₂|λ|`, with `+∞` for `λ = 0`.
pub fn delta_of(lambda: Complex64) -> f64 {
    let m = lambda.norm();
    if m == 0.0 {
        f64::INFINITY
    } else {
        -m.log2()
    }
}

fn sorted_eigenvalues(s: &Superoperator) -> Vec<Complex64> {
    let mut ev = linalg::eigenvalues(&s.matrix);
    ev.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    ev
}

/// Largest-modulus eigenvalues without eigenvector certificates.
pub fn leading_eigenvalues(s: &Superoperator, k: usize) -> Vec<Complex64> {
    let mut ev = sorted_eigenvalues(s);
    ev.truncate(k);
    ev
}

/// Top `k` eigenvalues by modulus, each certified by an eigenvector residual.
pub fn spectrum_topk(s: &Superoperator, k: usize) -> Result<Spectrum> {
    let dim = s.matrix.nrows();
    if k > dim || !s.is_square() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds superoperator dimension {dim}"
        )));
    }
    let eigenvalues = leading_eigenvalues(s, k);
    let mut residuals = Vec::with_capacity(k);
    for &l in &eigenvalues {
        let (_, r) = linalg::eigenvector(&s.matrix, l);
        if r >= EIGEN_RESIDUAL_BOUND {
            return Err(Error::Residual {
                residual: r,
                bound: EIGEN_RESIDUAL_BOUND,
            });
        }
        residuals.push(r);
    }
    Ok(Spectrum {
        eigenvalues,
        residuals,
    })
}

/// Trace-normalized right eigenvector of the leading eigenvalue.
pub fn leading_eigenvector_state(s: &Superoperator) -> Result<CMatrix> {
    let l = leading_eigenvalues(s, 1)[0];
    let (v, r) = linalg::eigenvector(&s.matrix, l);
    if r >= EIGEN_RESIDUAL_BOUND {
        return Err(Error::Residual {
            residual: r,
            bound: EIGEN_RESIDUAL_BOUND,
        });
    }
    let m = linalg::unvectorize(&v, s.d_out());
    let tr = m.trace();
    Ok(m / tr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingDimension {
    pub delta: f64,
    pub complex: bool,
}

pub fn scaling_dimensions(spec: &Spectrum) -> Vec<ScalingDimension> {
    spec.eigenvalues
        .iter()
        .map(|l| ScalingDimension {
            delta: delta_of(*l),
            complex: l.im.abs() > 1e-8,
        })
        .collect()
}

/// Scaling dimensions of the Ising CFT with multiplicities: `Δ = h + h̄` over
/// the sectors `(0,0)`, `(½,½)`, `(1/16,1/16)`, counted from the Virasoro
/// characters up to `Δ = 41/8`.
pub const ISING_TOWER: [(f64, usize); 12] = [
    (0.0, 1),
    (0.125, 1),
    (1.0, 1),
    (1.125, 2),
    (2.0, 4),
    (2.125, 3),
    (3.0, 5),
    (3.125, 6),
    (4.0, 9),
    (4.125, 9),
    (5.0, 13),
    (5.125, 14),
];

/// The `count` smallest Ising scaling dimensions, repeated by multiplicity.
pub fn ising_cft_reference(count: usize) -> Result<Vec<f64>> {
    if count > 64 {
        return Err(Error::InvalidArgument(format!(
            "at most 64 reference dimensions, asked for {count}"
        )));
    }
    Ok(ISING_TOWER
        .iter()
        .flat_map(|&(d, m)| std::iter::repeat_n(d, m))
        .take(count)
        .collect())
}
