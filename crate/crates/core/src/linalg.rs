//! Dense complex linear algebra on qubit registers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn from_rows(rows: &[&[Complex64]]) -> CMatrix {
    let n = rows.len();
    let m = rows[0].len();
    CMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn real_matrix(n: usize, m: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_fn(n, m, |i, j| c(data[i * m + j], 0.0))
}

pub fn pauli_x() -> CMatrix {
    real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> CMatrix {
    from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

pub fn pauli_z() -> CMatrix {
    real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn hadamard() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    real_matrix(2, 2, &[h, h, h, -h])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, f| kron(&acc, f))
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Row/column offsets touched by a gate on `qubits`, and the base indices it
/// is applied at. Local index bit `k-1-t` belongs to `qubits[t]`.
fn index_sets(qubits: &[usize], n: usize) -> (Vec<usize>, Vec<usize>) {
    let k = qubits.len();
    let masks: Vec<usize> = qubits.iter().map(|&q| 1usize << (n - 1 - q)).collect();
    let offsets = (0..1usize << k)
        .map(|j| {
            (0..k)
                .filter(|&t| (j >> (k - 1 - t)) & 1 == 1)
                .map(|t| masks[t])
                .sum()
        })
        .collect();
    let all: usize = masks.iter().sum();
    let bases = (0..1usize << n).filter(|i| i & all == 0).collect();
    (offsets, bases)
}

/// `m ← G m` where the rows of `m` are indexed by an `n`-qubit register.
pub fn apply_left(m: &mut CMatrix, g: &CMatrix, qubits: &[usize], n: usize) {
    debug_assert_eq!(m.nrows(), 1 << n);
    let (offsets, bases) = index_sets(qubits, n);
    let d = offsets.len();
    let rows = m.nrows();
    let mut buf = vec![ZERO; d];
    let data = m.as_mut_slice();
    for col in data.chunks_mut(rows) {
        for &b in &bases {
            for (j, &o) in offsets.iter().enumerate() {
                buf[j] = col[b + o];
            }
            for (i, &o) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for j in 0..d {
                    acc += g[(i, j)] * buf[j];
                }
                col[b + o] = acc;
            }
        }
    }
}

/// `m ← m G†` where the columns of `m` are indexed by an `n`-qubit register.
pub fn apply_right_adjoint(m: &mut CMatrix, g: &CMatrix, qubits: &[usize], n: usize) {
    debug_assert_eq!(m.ncols(), 1 << n);
    let (offsets, bases) = index_sets(qubits, n);
    let d = offsets.len();
    let rows = m.nrows();
    let gc = g.map(|z| z.conj());
    let mut cols = vec![ZERO; d * rows];
    let data = m.as_mut_slice();
    for &b in &bases {
        for (j, &o) in offsets.iter().enumerate() {
            cols[j * rows..(j + 1) * rows]
                .copy_from_slice(&data[(b + o) * rows..(b + o + 1) * rows]);
        }
        for (i, &o) in offsets.iter().enumerate() {
            let out = &mut data[(b + o) * rows..(b + o + 1) * rows];
            out.fill(ZERO);
            for j in 0..d {
                let w = gc[(i, j)];
                if w == ZERO {
                    continue;
                }
                for (x, y) in out.iter_mut().zip(&cols[j * rows..(j + 1) * rows]) {
                    *x += w * y;
                }
            }
        }
    }
}

/// `ρ ← G ρ G†` on the given qubits of an `n`-qubit operator.
pub fn conjugate(rho: &mut CMatrix, g: &CMatrix, qubits: &[usize], n: usize) {
    apply_left(rho, g, qubits, n);
    apply_right_adjoint(rho, g, qubits, n);
}

/// `(−1)^{|a ∧ z|}` for every index `a < d`.
fn parity_signs(d: usize, z: usize) -> Vec<f64> {
    (0..d)
        .map(|a| {
            if (a & z).count_ones() % 2 == 1 {
                -1.0
            } else {
                1.0
            }
        })
        .collect()
}

/// `ρ ← P ρ P†` for the Pauli string with bit-flip mask `x` and phase mask `z`
/// (index-bit masks; a qubit in both carries `Y`).
pub fn conjugate_pauli(rho: &mut CMatrix, x: usize, z: usize) {
    let d = rho.nrows();
    let sg = parity_signs(d, z);
    let src = rho.clone();
    let (src, dst) = (src.as_slice(), rho.as_mut_slice());
    for col in 0..d {
        let sc = sg[col ^ x];
        let (out, inp) = (
            &mut dst[col * d..(col + 1) * d],
            &src[(col ^ x) * d..((col ^ x) + 1) * d],
        );
        for (r, o) in out.iter_mut().enumerate() {
            *o = inp[r ^ x] * (sc * sg[r ^ x]);
        }
    }
}

/// `ρ ← G ρ G†` for `G = exp(−iθ/2 P)`, `P` a Pauli string without `Y`
/// (`x & z == 0`).
pub fn conjugate_pauli_rotation(rho: &mut CMatrix, theta: f64, x: usize, z: usize) {
    debug_assert_eq!(x & z, 0);
    let d = rho.nrows();
    let (s, co) = (theta / 2.0).sin_cos();
    if x == 0 {
        // diagonal: G|a⟩ = e^{−iθσ(a)/2}|a⟩
        let g: Vec<Complex64> = parity_signs(d, z)
            .iter()
            .map(|&sg| Complex64::new(co, -s * sg))
            .collect();
        for (col, column) in rho.as_mut_slice().chunks_mut(d).enumerate() {
            let gc = g[col].conj();
            for (v, gr) in column.iter_mut().zip(&g) {
                *v *= gr * gc;
            }
        }
        return;
    }
    let sg = parity_signs(d, z);
    let (cc, ss, cs) = (co * co, s * s, Complex64::new(0.0, co * s));
    let src = rho.clone();
    let (src, dst) = (src.as_slice(), rho.as_mut_slice());
    for col in 0..d {
        let scol = sg[col];
        let a = &src[col * d..(col + 1) * d];
        let b = &src[(col ^ x) * d..((col ^ x) + 1) * d];
        let out = &mut dst[col * d..(col + 1) * d];
        for r in 0..d {
            let sr = sg[r ^ x];
            out[r] =
                a[r] * cc + b[r ^ x] * (ss * sr * scol) - cs * (a[r ^ x] * sr) + cs * (b[r] * scol);
        }
    }
}

/// Index-bit mask of `qubits` in an `n`-qubit register.
pub fn qubit_mask(qubits: &[usize], n: usize) -> usize {
    qubits.iter().map(|&q| 1usize << (n - 1 - q)).sum()
}

/// Apply a gate to a state vector in place.
pub fn apply_to_state(psi: &mut [Complex64], g: &CMatrix, qubits: &[usize], n: usize) {
    let (offsets, bases) = index_sets(qubits, n);
    let d = offsets.len();
    let mut buf = vec![ZERO; d];
    for &b in &bases {
        for (j, &o) in offsets.iter().enumerate() {
            buf[j] = psi[b + o];
        }
        for (i, &o) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for j in 0..d {
                acc += g[(i, j)] * buf[j];
            }
            psi[b + o] = acc;
        }
    }
}

/// Bits of `index` at `qubits`, packed with `qubits[0]` most significant.
#[inline]
pub fn gather_bits(index: usize, qubits: &[usize], n: usize) -> usize {
    qubits
        .iter()
        .fold(0, |acc, &q| (acc << 1) | ((index >> (n - 1 - q)) & 1))
}

/// Reduced operator on `keep` (in that order) of an `n`-qubit operator.
pub fn partial_trace(rho: &CMatrix, n: usize, keep: &[usize]) -> CMatrix {
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let dk = 1usize << keep.len();
    let mut out = CMatrix::zeros(dk, dk);
    let dim = 1usize << n;
    let tmask: usize = traced.iter().map(|&q| 1usize << (n - 1 - q)).sum();
    let kept_idx: Vec<usize> = (0..dim).map(|i| gather_bits(i, keep, n)).collect();
    for j in 0..dim {
        let tj = j & tmask;
        let cj = kept_idx[j];
        for i in 0..dim {
            if i & tmask == tj {
                out[(kept_idx[i], cj)] += rho[(i, j)];
            }
        }
    }
    out
}

/// Reduced density matrix of a pure state on `keep`.
pub fn reduced_from_state(psi: &[Complex64], n: usize, keep: &[usize]) -> CMatrix {
    let k = keep.len();
    let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let dk = 1usize << k;
    let dr = 1usize << rest.len();
    // amplitude matrix A[a, r] with a over kept bits and r over the rest
    let mut a = CMatrix::zeros(dk, dr);
    for (idx, amp) in psi.iter().enumerate() {
        a[(gather_bits(idx, keep, n), gather_bits(idx, &rest, n))] = *amp;
    }
    &a * a.adjoint()
}

pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix (ascending eigenvalues).
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(m.nrows(), m.ncols(), |r, k| eig.eigenvectors[(r, order[k])]);
    (vals, vecs)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// Principal square root of a positive semidefinite matrix; small negative
/// eigenvalues from rounding are clipped.
pub fn sqrt_psd(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&x| c(x.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let s = sqrt_psd(rho);
    let inner = &s * sigma * &s;
    let t: f64 = hermitian_eigenvalues(&inner)
        .iter()
        .map(|&x| x.max(0.0).sqrt())
        .sum();
    t * t
}

/// All eigenvalues of a general complex matrix from its Schur form.
///
/// The QR iteration is capped; when it stalls the matrix is shifted by a
/// scalar, which moves the iteration off the cycle without changing the
/// spectrum beyond that shift.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    for &(re, im) in &[(0.0, 0.0), (0.137, 0.071), (-0.291, 0.113), (0.53, -0.37)] {
        let alpha = c(re * scale, im * scale);
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] += alpha;
        }
        if let Some(schur) = nalgebra::Schur::try_new(a, f64::EPSILON, 60 * n.max(1)) {
            let (_, t) = schur.unpack();
            return t.diagonal().iter().map(|z| z - alpha).collect();
        }
    }
    let (_, t) = m.clone().schur().unpack();
    t.diagonal().iter().copied().collect()
}

/// Right eigenvector for a known eigenvalue by shifted inverse iteration.
/// Returns the unit vector and the relative residual `‖Mv − λv‖ / ‖v‖`.
pub fn eigenvector(m: &CMatrix, lambda: Complex64) -> (CVector, f64) {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let residual = |v: &CVector| (m * v - v * lambda).norm() / v.norm();
    let mut best: Option<(CVector, f64)> = None;
    for &rel in &[1e-13, 1e-10, 1e-8] {
        let shift = lambda + c(rel * scale, 0.5 * rel * scale);
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] -= shift;
        }
        let lu = a.lu();
        let mut v = CVector::from_fn(n, |i, _| c(1.0 + 0.37 * i as f64, 0.11 * (i % 7) as f64));
        v /= c(v.norm(), 0.0);
        for _ in 0..4 {
            match lu.solve(&v) {
                Some(x)
                    if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && x.norm() > 0.0 =>
                {
                    v = &x / c(x.norm(), 0.0);
                }
                _ => break,
            }
        }
        let r = residual(&v);
        if best.as_ref().is_none_or(|(_, b)| r < *b) {
            best = Some((v, r));
        }
        if best.as_ref().is_some_and(|(_, b)| *b < 1e-12) {
            break;
        }
    }
    best.expect("at least one shift attempted")
}

/// Uniformly mixed state on `n` qubits.
pub fn maximally_mixed(n: usize) -> CMatrix {
    let d = 1usize << n;
    CMatrix::identity(d, d).scale(1.0 / d as f64)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

/// Operator norm proxy used for convergence tests: Frobenius norm.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_operator(d: usize, seed: u64) -> CMatrix {
        CMatrix::from_fn(d, d, |i, j| {
            let t = (seed as f64 + 1.0) * (i as f64 * 1.3 + j as f64 * 0.7 + 0.1);
            c(t.sin(), (1.7 * t).cos())
        })
    }

    #[test]
    fn pauli_kernels_match_dense() {
        let n = 3;
        let x = pauli_x();
        let y = pauli_y();
        let z = pauli_z();
        let id = CMatrix::identity(2, 2);
        let rho = random_operator(8, 3);
        // X on 0, Y on 1, Z on 2
        let p = kron_all(&[x.clone(), y, z.clone()]);
        let mut fast = rho.clone();
        conjugate_pauli(&mut fast, qubit_mask(&[0, 1], n), qubit_mask(&[1, 2], n));
        assert!(max_abs_diff(&fast, &(&p * &rho * p.adjoint())) < 1e-13);
        for (px, pz, full) in [
            (
                qubit_mask(&[0, 2], n),
                0,
                kron_all(&[x.clone(), id.clone(), x]),
            ),
            (
                0,
                qubit_mask(&[1, 2], n),
                kron_all(&[id.clone(), z.clone(), z]),
            ),
        ] {
            let theta: f64 = 0.37;
            let g = CMatrix::identity(8, 8).map(|v| v * (theta / 2.0).cos())
                - full.map(|v| v * c(0.0, (theta / 2.0).sin()));
            let mut fast = rho.clone();
            conjugate_pauli_rotation(&mut fast, theta, px, pz);
            assert!(max_abs_diff(&fast, &(&g * &rho * g.adjoint())) < 1e-13);
        }
    }

    fn random_matrix(d: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(d, d, |_, _| c(next(), next()))
    }

    fn embed(g: &CMatrix, qubits: &[usize], n: usize) -> CMatrix {
        let d = 1usize << n;
        let rest: Vec<usize> = (0..n).filter(|q| !qubits.contains(q)).collect();
        CMatrix::from_fn(d, d, |i, j| {
            if gather_bits(i, &rest, n) != gather_bits(j, &rest, n) {
                return ZERO;
            }
            g[(gather_bits(i, qubits, n), gather_bits(j, qubits, n))]
        })
    }

    #[test]
    fn strided_kernels_match_embedded_products() {
        let n = 4;
        let g = random_matrix(4, 3);
        let rho = random_matrix(16, 9);
        for qs in [[0usize, 1], [2, 0], [1, 3], [3, 2]] {
            let big = embed(&g, &qs, n);
            let mut a = rho.clone();
            apply_left(&mut a, &g, &qs, n);
            assert!(max_abs_diff(&a, &(&big * &rho)) < 1e-12);
            let mut b = rho.clone();
            apply_right_adjoint(&mut b, &g, &qs, n);
            assert!(max_abs_diff(&b, &(&rho * big.adjoint())) < 1e-12);
        }
    }

    #[test]
    fn embedding_agrees_with_kron_for_adjacent_qubits() {
        let g = random_matrix(4, 5);
        let id = CMatrix::identity(2, 2);
        let big = kron_all(&[id.clone(), g.clone(), id]);
        assert!(max_abs_diff(&big, &embed(&g, &[1, 2], 4)) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = random_matrix(2, 1);
        let b = random_matrix(4, 2);
        let ab = kron(&a, &b);
        let ta = partial_trace(&ab, 3, &[0]);
        assert!(max_abs_diff(&ta, &a.map(|z| z * b.trace())) < 1e-12);
        let tb = partial_trace(&ab, 3, &[1, 2]);
        assert!(max_abs_diff(&tb, &b.map(|z| z * a.trace())) < 1e-12);
    }

    #[test]
    fn reduced_state_matches_partial_trace() {
        let psi: Vec<Complex64> = (0..8)
            .map(|i| c(0.1 * i as f64, 0.3 - 0.05 * i as f64))
            .collect();
        let v = CVector::from_vec(psi.clone());
        let rho = &v * v.adjoint();
        for keep in [vec![0usize], vec![2, 0], vec![1, 2]] {
            let a = reduced_from_state(&psi, 3, &keep);
            let b = partial_trace(&rho, 3, &keep);
            assert!(max_abs_diff(&a, &b) < 1e-12);
        }
    }

    #[test]
    fn column_stacking_lifts_conjugation() {
        let u = random_matrix(4, 7);
        let rho = random_matrix(4, 8);
        let lhs = vectorize(&(&u * &rho * u.adjoint()));
        let sup = kron(&u.map(|z| z.conj()), &u);
        assert!((lhs - sup * vectorize(&rho)).norm() < 1e-12);
    }

    #[test]
    fn fidelity_of_pure_states_is_overlap() {
        let a = CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let b = CVector::from_vec(vec![c(1.0, 0.0), ZERO]);
        let f = fidelity(&(&a * a.adjoint()), &(&b * b.adjoint()));
        assert!((f - 0.36).abs() < 1e-10);
        assert!((fidelity(&maximally_mixed(2), &maximally_mixed(2)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenpairs_of_random_matrix() {
        let m = random_matrix(12, 11);
        for lam in eigenvalues(&m) {
            let (_, r) = eigenvector(&m, lam);
            assert!(r < 1e-9, "{r}");
        }
    }
}
