use dmera::channel::{noisy_ms_kraus, verify_cptp, ChannelSpec, KrausSet, Superoperator};
use dmera::experiments::sample_gate;
use dmera::gatelib::{decompose_gate, NativeGate};
use dmera::linalg::{self, c, CMatrix};
use dmera::observables::energy_density;
use dmera::spectral::fixed_state;
use dmera::{AngleProfile, Bias, Convention, GateKind, NoiseModel, Side, Variant};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `g` on `qubits` of an `n`-qubit register, by index bookkeeping.
fn embed(g: &CMatrix, qubits: &[usize], n: usize) -> CMatrix {
    let local = |i: usize| {
        qubits
            .iter()
            .fold(0, |acc, &q| (acc << 1) | ((i >> (n - 1 - q)) & 1))
    };
    let mask: usize = qubits.iter().map(|&q| 1 << (n - 1 - q)).sum();
    let d = 1 << n;
    CMatrix::from_fn(d, d, |r, col| {
        if r & !mask == col & !mask {
            g[(local(r), local(col))]
        } else {
            c(0.0, 0.0)
        }
    })
}

/// Gaussian average of `U(θ+δ) ρ U(θ+δ)†` by the trapezoid rule over ±8σ.
fn averaged(rho: &CMatrix, gate: impl Fn(f64) -> CMatrix, var: f64) -> CMatrix {
    if var == 0.0 {
        let u = gate(0.0);
        return &u * rho * u.adjoint();
    }
    let sd = var.sqrt();
    let nodes = 33;
    let h = 16.0 * sd / (nodes - 1) as f64;
    let mut acc = CMatrix::zeros(rho.nrows(), rho.ncols());
    let mut wsum = 0.0;
    for i in 0..nodes {
        let d = -8.0 * sd + i as f64 * h;
        let w = (-d * d / (2.0 * var)).exp();
        let u = gate(d);
        acc += (&u * rho * u.adjoint()).map(|z| z * w);
        wsum += w;
    }
    acc.map(|z| z / wsum)
}

fn random_density(seed: u64, n: usize) -> CMatrix {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 1 << n;
    let a = CMatrix::from_fn(d, d, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let m = &a * a.adjoint();
    let tr = m.trace();
    m.map(|z| z / tr)
}

fn pauli_kraus_dense(rho: &CMatrix, q: usize, n: usize, p: f64, bias: Bias) -> CMatrix {
    let mut out = rho.map(|z| z * (1.0 - p));
    for (w, m) in [
        (bias.x, linalg::pauli_x()),
        (bias.y, linalg::pauli_y()),
        (bias.z, linalg::pauli_z()),
    ] {
        let e = embed(&m, &[q], n);
        out += (&e * rho * e.adjoint()).map(|z| z * (p * w));
    }
    out
}

/// Dense evolution of one side of the channel, every noise source written out.
fn dense_side(spec: &ChannelSpec, side: Side, rho_in: &CMatrix) -> CMatrix {
    let nc = spec.side_circuit(side).unwrap();
    let n = nc.n_total;
    let n_in = nc.inputs.len();
    let fresh = match nc.convention {
        Convention::Xx => vec![c(1.0, 0.0), c(0.0, 0.0)],
        Convention::Zz => vec![c(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2],
    };
    let emb = CMatrix::from_fn(1 << n, 1 << n_in, |row, col| {
        let mut amp = c(1.0, 0.0);
        for (t, &q) in nc.inputs.iter().enumerate() {
            if ((row >> (n - 1 - q)) & 1) != ((col >> (n_in - 1 - t)) & 1) {
                return c(0.0, 0.0);
            }
        }
        for &q in &nc.prep {
            amp *= fresh[(row >> (n - 1 - q)) & 1];
        }
        amp
    });
    let mut rho = &emb * rho_in * emb.adjoint();
    for op in &nc.ops {
        let g = |delta: f64| {
            let gate = match op.gate.angle() {
                Some(t) => op.gate.with_angle(t + delta),
                None => op.gate,
            };
            embed(&gate.matrix(), &op.qubits, n)
        };
        if !op.gate.is_two_qubit() {
            rho = averaged(&rho, g, 0.0);
            continue;
        }
        match spec.noise {
            NoiseModel::Depolarizing { p, bias } => {
                for &q in &op.qubits {
                    rho = pauli_kraus_dense(&rho, q, n, p / 2.0, bias);
                }
                rho = averaged(&rho, g, 0.0);
                for &q in &op.qubits {
                    rho = pauli_kraus_dense(&rho, q, n, p / 2.0, bias);
                }
            }
            model => {
                let var = model.ms_variance(op.gate.angle().unwrap()).unwrap();
                rho = averaged(&rho, g, var);
            }
        }
    }
    let window: Vec<usize> = nc.output_window.clone().collect();
    linalg::partial_trace(&rho, n, &window)
}

#[test]
fn side_channels_match_dense_evolution() {
    let p = AngleProfile::new(vec![0.26675, -0.52029], Variant::C2).unwrap();
    for noise in [
        NoiseModel::imprecision(0.05),
        NoiseModel::proportional(0.2),
        NoiseModel::depolarizing(0.03),
    ] {
        for r in [1, 3] {
            let spec = ChannelSpec::new(&p, noise).repetitions(r);
            for side in [Side::Left, Side::Right] {
                let s = dmera::channel::assemble_native(&spec.side_circuit(side).unwrap(), &noise)
                    .unwrap();
                for seed in 0..2 {
                    let rho = random_density(seed, 3);
                    let got = s.apply_raw(&rho);
                    let want = dense_side(&spec, side, &rho);
                    assert!(
                        linalg::max_abs_diff(&got, &want) < 1e-10,
                        "{noise} r={r} {side:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn biased_depolarizing_matches_dense_evolution() {
    let p = AngleProfile::new(vec![0.4, -0.3, 0.2], Variant::C1).unwrap();
    for bias in [Bias::X, Bias::Y, Bias::Z, Bias::new(0.5, 0.2, 0.3).unwrap()] {
        let noise = NoiseModel::Depolarizing { p: 0.02, bias };
        let spec = ChannelSpec::new(&p, noise);
        let s = dmera::channel::assemble_native(&spec.side_circuit(Side::Left).unwrap(), &noise)
            .unwrap();
        let rho = random_density(9, 3);
        assert!(
            linalg::max_abs_diff(&s.apply_raw(&rho), &dense_side(&spec, Side::Left, &rho)) < 1e-10
        );
    }
}

#[test]
fn ms_kraus_is_the_gaussian_average() {
    for (theta, model) in [
        (0.7, NoiseModel::imprecision(0.1)),
        (-1.3, NoiseModel::imprecision(0.5)),
        (0.4, NoiseModel::proportional(0.3)),
        (1.1, NoiseModel::Noiseless),
    ] {
        let kraus = noisy_ms_kraus(theta, &model).unwrap();
        assert!(kraus.completeness_residual() < 1e-14);
        let var = model.ms_variance(theta).unwrap();
        for seed in 0..3 {
            let rho = random_density(seed, 2);
            let want = averaged(&rho, |d| NativeGate::Xx(theta + d).matrix(), var);
            let got = kraus
                .0
                .iter()
                .fold(CMatrix::zeros(4, 4), |acc, k| acc + k * &rho * k.adjoint());
            assert!(linalg::max_abs_diff(&got, &want) < 1e-12);
        }
    }
}

#[test]
fn trajectory_average_converges_to_kraus_channel() {
    let noise = NoiseModel::imprecision(0.3);
    let (kind, theta, variant) = (GateKind::W, 0.26675, Variant::C2);
    let mut exact = Superoperator::identity(2);
    for g in decompose_gate(kind, theta, variant).gates() {
        let local: Vec<usize> = if g.is_two_qubit() {
            vec![0, 1]
        } else {
            g.qubits()
        };
        let step = if g.is_two_qubit() {
            let ks = noisy_ms_kraus(g.angle().unwrap(), &noise).unwrap();
            let (a, b) = (ks.0[0].clone(), ks.0[1].clone());
            let same_axis = |k: CMatrix| match g {
                NativeGate::Xx(_) => k,
                _ => unreachable!("simulation-frame sequences use XX"),
            };
            KrausSet(vec![same_axis(a), same_axis(b)]).superoperator()
        } else {
            Superoperator::unitary(&embed(&g.matrix(), &local, 2))
        };
        exact = step.after(&exact).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples = 20_000;
    let mut acc = CMatrix::zeros(16, 16);
    for _ in 0..samples {
        let u = sample_gate(kind, theta, variant, &noise, &mut rng).unwrap();
        acc += Superoperator::unitary(&u).matrix;
    }
    let mean = acc.map(|z| z / samples as f64);
    let dev = linalg::max_abs_diff(&mean, &exact.matrix);
    assert!(dev < 0.02, "deviation {dev}");
}

#[test]
fn small_noise_response_is_linear() {
    let p = AngleProfile::new(vec![0.26675, -0.52029], Variant::C1).unwrap();
    let e = |s2: f64| {
        let noise = if s2 == 0.0 {
            NoiseModel::Noiseless
        } else {
            NoiseModel::imprecision(s2)
        };
        energy_density(
            &fixed_state(&ChannelSpec::new(&p, noise).build().unwrap()).unwrap(),
            Convention::Xx,
        )
        .unwrap()
    };
    let e0 = e(0.0);
    let (d1, d2) = (e(1e-4) - e0, e(2e-4) - e0);
    assert!(d1 > 0.0);
    assert!((d2 / d1 - 2.0).abs() < 1e-3, "ratio {}", d2 / d1);
}

fn noise_strategy() -> impl Strategy<Value = NoiseModel> {
    let strength = prop_oneof![Just(1e-4), Just(1e-3), Just(1e-2)];
    (0..3usize, strength).prop_map(|(k, s)| match k {
        0 => NoiseModel::imprecision(s),
        1 => NoiseModel::proportional(s),
        _ => NoiseModel::depolarizing(s),
    })
}

fn profile_strategy() -> impl Strategy<Value = Vec<f64>> {
    (2..=4usize).prop_flat_map(|d| {
        proptest::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn noisy_channels_are_cptp(thetas in profile_strategy(), noise in noise_strategy(), c2 in any::<bool>()) {
        let v = if c2 { Variant::C2 } else { Variant::C1 };
        let p = AngleProfile::new(thetas, v).unwrap();
        let report = verify_cptp(&ChannelSpec::new(&p, noise).build().unwrap());
        prop_assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn variants_agree_without_noise(thetas in profile_strategy()) {
        let a = ChannelSpec::new(&AngleProfile::new(thetas.clone(), Variant::C1).unwrap(), NoiseModel::Noiseless).build().unwrap();
        let b = ChannelSpec::new(&AngleProfile::new(thetas, Variant::C2).unwrap(), NoiseModel::Noiseless).build().unwrap();
        prop_assert!(a.distance(&b) < 1e-10);
    }

    #[test]
    fn channels_preserve_trace_of_random_inputs(thetas in profile_strategy(), seed in 0u64..1000) {
        let p = AngleProfile::new(thetas, Variant::C1).unwrap();
        let s = ChannelSpec::new(&p, NoiseModel::imprecision(0.05)).build().unwrap();
        let out = s.apply_raw(&random_density(seed, 3));
        let tr: Complex64 = out.trace();
        prop_assert!((tr - c(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(linalg::max_abs_diff(&out, &out.adjoint()) < 1e-12);
    }
}
