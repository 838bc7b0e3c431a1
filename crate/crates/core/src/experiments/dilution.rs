use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::item_rng;
use crate::error::{Error, Result};
use crate::gatelib::{decompose_gate, GateKind, Variant};
use crate::layout::AngleProfile;
use crate::linalg::{self, CMatrix, ZERO};
use crate::noise::NoiseModel;

/// Largest ring the pure-state simulation accepts.
pub const MAX_SITES: usize = 16;
pub const MAX_SUBSYSTEM: usize = 6;
const JACKKNIFE_BLOCKS: usize = 20;

/// Two-qubit unitary of `kind(θ)` compiled to native gates, with every MS
/// angle shifted by an independent Gaussian draw of the model's variance.
pub fn sample_gate<R: Rng + ?Sized>(
    kind: GateKind,
    theta: f64,
    variant: Variant,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<CMatrix> {
    let mut seq = decompose_gate(kind, theta, variant);
    for g in seq.0.iter_mut() {
        if let (true, Some(angle)) = (g.is_two_qubit(), g.angle()) {
            let var = noise.ms_variance(angle).ok_or_else(|| {
                Error::InvalidArgument(format!("`{noise}` is not an angle-error model"))
            })?;
            if var > 0.0 {
                let normal = Normal::new(0.0, var.sqrt())
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                *g = g.with_angle(angle + normal.sample(rng));
            }
        }
    }
    seq.unitary(2)
}

/// `(kind, θ, fine qubits)` of one layer on a ring of `2·sites` fine qubits.
fn ring_gates(profile: &AngleProfile, sites: usize) -> Vec<(GateKind, f64, (usize, usize))> {
    let width = 2 * sites;
    let th = profile.thetas();
    let mut gates: Vec<_> = (0..sites)
        .map(|k| (GateKind::W, th[0], (2 * k, 2 * k + 1)))
        .collect();
    for (d, &theta) in th.iter().enumerate().skip(1) {
        gates.extend(
            (d % 2..width)
                .step_by(2)
                .map(|a| (GateKind::U, theta, (a, (a + 1) % width))),
        );
    }
    gates
}

/// Coarse qubit `k` moves to fine qubit `2k+1`; fine qubit `2k` starts in |0⟩.
fn embed(psi: &[Complex64], sites: usize) -> Vec<Complex64> {
    let n = 2 * sites;
    let mut out = vec![ZERO; 1 << n];
    for (i, &amp) in psi.iter().enumerate() {
        let mut j = 0usize;
        for k in 0..sites {
            if (i >> (sites - 1 - k)) & 1 == 1 {
                j |= 1 << (n - 1 - (2 * k + 1));
            }
        }
        out[j] = amp;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilutionOptions {
    pub initial_sites: usize,
    pub l_max: usize,
    pub subsystem_sizes: Vec<usize>,
    pub trajectories: usize,
    pub seed: u64,
}

impl Default for DilutionOptions {
    fn default() -> Self {
        DilutionOptions {
            initial_sites: 4,
            l_max: 16,
            subsystem_sizes: vec![1, 2, 3],
            trajectories: 500,
            seed: 7,
        }
    }
}

impl DilutionOptions {
    fn validate(&self) -> Result<()> {
        if self.initial_sites < 4 || self.l_max > MAX_SITES || self.l_max < 2 * self.initial_sites {
            return Err(Error::InvalidArgument(format!(
                "need 4 ≤ initial sites and 2·initial ≤ L_max ≤ {MAX_SITES}, got {} → {}",
                self.initial_sites, self.l_max
            )));
        }
        if self
            .subsystem_sizes
            .iter()
            .any(|&l| l == 0 || l > MAX_SUBSYSTEM)
        {
            return Err(Error::InvalidArgument(format!(
                "subsystem sizes must lie in 1..={MAX_SUBSYSTEM}"
            )));
        }
        if self.trajectories == 0 {
            return Err(Error::InvalidArgument(
                "need at least one trajectory".into(),
            ));
        }
        Ok(())
    }
}

/// One output row; `ell = L` is the global state fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilutionRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub ell: usize,
    pub layer: usize,
    pub fidelity: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilutionStudy {
    pub rows: Vec<DilutionRow>,
    pub options: DilutionOptions,
    pub noise: NoiseModel,
}

impl DilutionStudy {
    pub fn row(&self, l: usize, ell: usize) -> Option<&DilutionRow> {
        self.rows.iter().find(|r| r.l == l && r.ell == ell)
    }
}

fn apply_layer(
    psi: &[Complex64],
    sites: usize,
    unitaries: &[(CMatrix, (usize, usize))],
) -> Vec<Complex64> {
    let mut out = embed(psi, sites);
    for (u, (a, b)) in unitaries {
        linalg::apply_to_state(&mut out, u, &[*a, *b], 2 * sites);
    }
    out
}

/// Amplitudes relabelled so qubit `start` becomes qubit 0 (cyclically).
fn rotate(psi: &[Complex64], n: usize, start: usize) -> Vec<Complex64> {
    let mask = (1usize << n) - 1;
    let mut out = vec![ZERO; psi.len()];
    for (i, &a) in psi.iter().enumerate() {
        let j = if start == 0 {
            i
        } else {
            ((i << start) | (i >> (n - start))) & mask
        };
        out[j] = a;
    }
    out
}

/// Reduced state of the leading `ell` qubits.
fn reduced_leading(psi: &[Complex64], n: usize, ell: usize) -> CMatrix {
    let dk = 1usize << ell;
    let dr = 1usize << (n - ell);
    let mut rho = CMatrix::zeros(dk, dk);
    for a in 0..dk {
        let ra = &psi[a * dr..(a + 1) * dr];
        for b in a..dk {
            let rb = &psi[b * dr..(b + 1) * dr];
            let v: Complex64 = ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum();
            rho[(a, b)] = v;
            rho[(b, a)] = v.conj();
        }
    }
    rho
}

/// Reduced states of every cyclic window, indexed `[size][position]`.
fn window_states(psi: &[Complex64], n: usize, sizes: &[usize]) -> Vec<Vec<CMatrix>> {
    let mut out: Vec<Vec<CMatrix>> = sizes.iter().map(|_| Vec::with_capacity(n)).collect();
    for start in 0..n {
        let r = rotate(psi, n, start);
        for (e, &ell) in sizes.iter().enumerate() {
            out[e].push(reduced_leading(&r, n, ell));
        }
    }
    out
}

/// Mean Uhlmann fidelity over window positions.
fn mean_fidelity(avg: &[CMatrix], reference: &[CMatrix]) -> f64 {
    avg.iter()
        .zip(reference)
        .map(|(a, r)| linalg::fidelity(a, r))
        .sum::<f64>()
        / avg.len() as f64
}

/// Grow a ring from `initial_sites` in |0…0⟩ to `L_max`, with angle noise only
/// in the first layer, and compare against the noiseless state.
///
/// Subsystem rows average the reduced states over trajectories before taking
/// the fidelity; their errors are jackknife estimates over 20 blocks. Global
/// rows average the per-trajectory overlap `|⟨ψ_ref|ψ⟩|²`.
pub fn dilution_study(
    profile: &AngleProfile,
    noise: NoiseModel,
    opts: &DilutionOptions,
) -> Result<DilutionStudy> {
    opts.validate()?;
    noise.validate()?;
    let mut schedule = vec![opts.initial_sites];
    while 2 * schedule.last().unwrap() <= opts.l_max {
        schedule.push(2 * schedule.last().unwrap());
    }
    let layers = schedule.len() - 1;

    let mut psi0 = vec![ZERO; 1 << opts.initial_sites];
    psi0[0] = linalg::ONE;
    let clean_layer = |sites: usize| -> Result<Vec<(CMatrix, (usize, usize))>> {
        ring_gates(profile, sites)
            .into_iter()
            .map(|(k, th, q)| Ok((decompose_gate(k, th, profile.variant()).unitary(2)?, q)))
            .collect()
    };
    let clean: Vec<_> = schedule[..layers]
        .iter()
        .map(|&s| clean_layer(s))
        .collect::<Result<_>>()?;

    let mut reference = Vec::with_capacity(layers);
    let mut psi = psi0.clone();
    for (layer, &sites) in schedule[..layers].iter().enumerate() {
        psi = apply_layer(&psi, sites, &clean[layer]);
        reference.push(psi.clone());
    }
    // reduced reference states per (layer, ell, position)
    let ref_reduced: Vec<Vec<Vec<CMatrix>>> = (0..layers)
        .map(|layer| {
            window_states(
                &reference[layer],
                schedule[layer + 1],
                &opts.subsystem_sizes,
            )
        })
        .collect();

    let blocks = JACKKNIFE_BLOCKS.min(opts.trajectories);
    let zero_like = |layer: usize, e: usize| -> Vec<CMatrix> {
        let d = 1 << opts.subsystem_sizes[e];
        vec![CMatrix::zeros(d, d); schedule[layer + 1]]
    };
    let mut block_sums: Vec<Vec<Vec<Vec<CMatrix>>>> = (0..blocks)
        .map(|_| {
            (0..layers)
                .map(|l| {
                    (0..opts.subsystem_sizes.len())
                        .map(|e| zero_like(l, e))
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut block_counts = vec![0usize; blocks];
    let mut overlaps = vec![Vec::with_capacity(opts.trajectories); layers];

    for t in 0..opts.trajectories {
        let block = t * blocks / opts.trajectories;
        let mut rng = item_rng(opts.seed, t as u64);
        let noisy_first: Vec<_> = ring_gates(profile, schedule[0])
            .into_iter()
            .map(|(k, th, q)| Ok((sample_gate(k, th, profile.variant(), &noise, &mut rng)?, q)))
            .collect::<Result<_>>()?;
        let mut psi = psi0.clone();
        for layer in 0..layers {
            let gates = if layer == 0 {
                &noisy_first
            } else {
                &clean[layer]
            };
            psi = apply_layer(&psi, schedule[layer], gates);
            let n = schedule[layer + 1];
            let ov: Complex64 = reference[layer]
                .iter()
                .zip(&psi)
                .map(|(r, p)| r.conj() * p)
                .sum();
            overlaps[layer].push(ov.norm_sqr());
            for (e, states) in window_states(&psi, n, &opts.subsystem_sizes)
                .into_iter()
                .enumerate()
            {
                for (pos, m) in states.into_iter().enumerate() {
                    block_sums[block][layer][e][pos] += m;
                }
            }
        }
        block_counts[block] += 1;
    }

    let mut rows = Vec::new();
    for layer in 0..layers {
        let l = schedule[layer + 1];
        for (e, &ell) in opts.subsystem_sizes.iter().enumerate() {
            let total: Vec<CMatrix> = (0..l)
                .map(|pos| {
                    block_sums
                        .iter()
                        .fold(CMatrix::zeros(1 << ell, 1 << ell), |acc, b| {
                            acc + &b[layer][e][pos]
                        })
                })
                .collect();
            let avg = |sums: &[CMatrix], count: usize| -> Vec<CMatrix> {
                sums.iter().map(|m| m.unscale(count as f64)).collect()
            };
            let fidelity = mean_fidelity(&avg(&total, opts.trajectories), &ref_reduced[layer][e]);
            let stderr = if blocks > 1 {
                let loo: Vec<f64> = (0..blocks)
                    .map(|b| {
                        let sums: Vec<CMatrix> = (0..l)
                            .map(|pos| &total[pos] - &block_sums[b][layer][e][pos])
                            .collect();
                        mean_fidelity(
                            &avg(&sums, opts.trajectories - block_counts[b]),
                            &ref_reduced[layer][e],
                        )
                    })
                    .collect();
                let m = loo.iter().sum::<f64>() / blocks as f64;
                ((blocks - 1) as f64 / blocks as f64
                    * loo.iter().map(|f| (f - m).powi(2)).sum::<f64>())
                .sqrt()
            } else {
                0.0
            };
            rows.push(DilutionRow {
                l,
                ell,
                layer: layer + 1,
                fidelity,
                stderr,
            });
        }
        let ov = &overlaps[layer];
        let mean = ov.iter().sum::<f64>() / ov.len() as f64;
        let stderr = if ov.len() > 1 {
            (ov.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
                / (ov.len() - 1) as f64
                / ov.len() as f64)
                .sqrt()
        } else {
            0.0
        };
        rows.push(DilutionRow {
            l,
            ell: l,
            layer: layer + 1,
            fidelity: mean,
            stderr,
        });
    }
    Ok(DilutionStudy {
        rows,
        options: opts.clone(),
        noise,
    })
}
