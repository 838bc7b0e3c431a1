use dmera::channel::{
    assemble_superoperator, noiseless_channel, Alignment, ChannelSpec, Superoperator,
};
use dmera::gatelib::{check_equivalence, decompose_gate};
use dmera::layout::{build_scale_layer, compile, gate_counts, segment_cone, swap_convention};
use dmera::linalg::{self, c, CMatrix};
use dmera::mitigation::{amplify_gates, fold_ms_gates, AmplificationSpec, AmplificationTarget};
use dmera::{AngleProfile, GateKind, NoiseModel, Side, Variant};
use num_complex::Complex64;
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = f64> {
    -std::f64::consts::PI..std::f64::consts::PI
}

fn embed_adjacent(g: &CMatrix, a: usize, n: usize) -> CMatrix {
    let left = CMatrix::identity(1 << a, 1 << a);
    let right = CMatrix::identity(1 << (n - a - 2), 1 << (n - a - 2));
    left.kronecker(g).kronecker(&right)
}

/// Trace out every qubit outside `keep` (sorted, MSB-first labels).
fn partial_trace(rho: &CMatrix, n: usize, keep: &[usize]) -> CMatrix {
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let bit = |q: usize| 1usize << (n - 1 - q);
    let compose = |a: usize, e: usize| {
        let mut idx = 0;
        for (t, &q) in keep.iter().enumerate() {
            if (a >> (keep.len() - 1 - t)) & 1 == 1 {
                idx |= bit(q);
            }
        }
        for (t, &q) in traced.iter().enumerate() {
            if (e >> (traced.len() - 1 - t)) & 1 == 1 {
                idx |= bit(q);
            }
        }
        idx
    };
    let dk = 1 << keep.len();
    CMatrix::from_fn(dk, dk, |a, b| {
        (0..1usize << traced.len())
            .map(|e| rho[(compose(a, e), compose(b, e))])
            .sum()
    })
}

fn random_state(seed: u64, n: usize) -> Vec<Complex64> {
    let mut x = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
    let mut next = || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let v: Vec<Complex64> = (0..1 << n).map(|_| c(next(), next())).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn outer(psi: &[Complex64]) -> CMatrix {
    CMatrix::from_fn(psi.len(), psi.len(), |i, j| psi[i] * psi[j].conj())
}

/// Unpruned six-qubit layer with ideal gates, fresh `|0⟩` on even sites.
fn brute_force_layer(profile: &AngleProfile, psi_in: &[Complex64], window: &[usize]) -> CMatrix {
    let n = 6;
    let layer = build_scale_layer(profile, n).unwrap();
    let mut psi = vec![c(0.0, 0.0); 1 << n];
    for (i, amp) in psi_in.iter().enumerate() {
        let mut j = 0;
        for k in 0..3 {
            if (i >> (2 - k)) & 1 == 1 {
                j |= 1 << (n - 1 - (2 * k + 1));
            }
        }
        psi[j] = *amp;
    }
    let mut u = CMatrix::identity(1 << n, 1 << n);
    for g in &layer.gates {
        assert_eq!(g.qubits.1, g.qubits.0 + 1);
        u = embed_adjacent(&g.kind.matrix(g.theta), g.qubits.0, n) * u;
    }
    let out = &u * nalgebra::DVector::from_vec(psi);
    partial_trace(&outer(out.as_slice()), n, window)
}

#[test]
fn segment_channel_matches_unpruned_layer() {
    let profiles = [
        AngleProfile::new(vec![0.26675, -0.52029], Variant::C1).unwrap(),
        AngleProfile::new(vec![0.7, 0.3], Variant::C2).unwrap(),
        AngleProfile::new(vec![0.2258, 2.634, -0.1168], Variant::C1).unwrap(),
    ];
    for p in &profiles {
        for (alignment, window) in [(Alignment::Left, [1, 2, 3]), (Alignment::Right, [2, 3, 4])] {
            let s = ChannelSpec::new(p, NoiseModel::Noiseless)
                .alignment(alignment)
                .build()
                .unwrap();
            for seed in 1..4 {
                let psi = random_state(seed, 3);
                let got = s.apply_raw(&outer(&psi));
                let want = brute_force_layer(p, &psi, &window);
                assert!(
                    linalg::max_abs_diff(&got, &want) < 1e-12,
                    "{alignment:?} {:?}",
                    p.thetas()
                );
            }
        }
    }
}

#[test]
fn frame_swap_is_hadamard_conjugation() {
    let p = AngleProfile::new(vec![0.4, -0.9], Variant::C2).unwrap();
    let cone = segment_cone(&p, 3, Side::Left).unwrap();
    let xx = assemble_superoperator(&cone, &NoiseModel::Noiseless).unwrap();
    let zz = assemble_superoperator(&swap_convention(&cone), &NoiseModel::Noiseless).unwrap();
    let h3 = linalg::kron_all(&[linalg::hadamard(), linalg::hadamard(), linalg::hadamard()]);
    let hh = Superoperator::unitary(&h3);
    let conjugated = hh.after(&xx).unwrap().after(&hh).unwrap();
    assert!(zz.distance(&conjugated) < 1e-12);
    assert_eq!(swap_convention(&swap_convention(&cone)), cone);
}

#[test]
fn twelve_layer_resources() {
    let p = AngleProfile::new(vec![0.26675, -0.52029], Variant::C1).unwrap();
    let g = gate_counts(&p, 3, 12).unwrap();
    assert_eq!((g.ms_gates, g.single_qubit_gates, g.resets), (120, 156, 33));
    let one = gate_counts(&p, 3, 1).unwrap();
    assert_eq!(
        (one.ms_gates * 12, one.single_qubit_gates * 12, one.resets),
        (120, 156, 0)
    );
    assert_eq!(gate_counts(&p, 3, 0).unwrap().ms_gates, 0);
}

#[test]
fn noiseless_folding_changes_nothing() {
    let p = AngleProfile::new(vec![0.3, -0.6, 0.2], Variant::C2).unwrap();
    let base = noiseless_channel(&p).unwrap();
    for r in [3, 5] {
        let folded = ChannelSpec::new(&p, NoiseModel::Noiseless)
            .repetitions(r)
            .build()
            .unwrap();
        assert!(folded.distance(&base) < 1e-12, "r = {r}");
    }
    let nc = compile(&segment_cone(&p, 3, Side::Left).unwrap());
    assert_eq!(fold_ms_gates(&nc, 3).unwrap().ms_count, 3 * nc.ms_count);
    assert!(fold_ms_gates(&nc, 2).is_err());
}

#[test]
fn layer_amplification_touches_one_layer() {
    let p = AngleProfile::new(vec![0.3, -0.6], Variant::C1).unwrap();
    let nc = compile(&segment_cone(&p, 3, Side::Left).unwrap());
    let stack = vec![nc.clone(), nc.clone(), nc.clone()];
    let spec = AmplificationSpec {
        target: AmplificationTarget::Layer(0),
        repetitions: 3,
    };
    let amp = amplify_gates(&stack, spec).unwrap();
    let counts: Vec<usize> = amp.iter().map(|c| c.ms_count).collect();
    assert_eq!(counts, vec![nc.ms_count, nc.ms_count, 3 * nc.ms_count]);
    let all = amplify_gates(
        &stack,
        AmplificationSpec {
            target: AmplificationTarget::AllGates,
            repetitions: 5,
        },
    )
    .unwrap();
    assert!(all.iter().all(|c| c.ms_count == 5 * nc.ms_count));
    assert!(amplify_gates(
        &stack,
        AmplificationSpec {
            target: AmplificationTarget::Layer(3),
            repetitions: 3
        }
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decompositions_reproduce_targets(theta in angle()) {
        for kind in [GateKind::W, GateKind::U] {
            for v in [Variant::C1, Variant::C2] {
                let seq = decompose_gate(kind, theta, v);
                prop_assert!(check_equivalence(&seq, &kind.matrix(theta)).is_ok(), "{kind:?} {v:?}");
                let hh = linalg::kron(&linalg::hadamard(), &linalg::hadamard());
                let target = &hh * kind.matrix(theta) * &hh;
                prop_assert!(check_equivalence(&seq.swapped(), &target).is_ok());
            }
        }
    }

    #[test]
    fn targets_are_unitary(theta in angle()) {
        for kind in [GateKind::W, GateKind::U] {
            let g = kind.matrix(theta);
            let id = CMatrix::identity(4, 4);
            prop_assert!(linalg::max_abs_diff(&(g.adjoint() * &g), &id) < 1e-14);
        }
    }
}
