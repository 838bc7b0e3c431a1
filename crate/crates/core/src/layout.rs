//! Scale-transformation layers, causal-cone pruning and native compilation.
//!
//! Fine-lattice wiring: carried (coarse) site `k` lands on fine qubit `2k+1`,
//! its fresh ancilla on `2k`. `W(θ₁)` acts on `(2k, 2k+1)`; the `U(θ_d)` sublayer
//! `d = 1..D-1` acts on `(a, a+1)` with `a` odd for odd `d` and even for even `d`.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gatelib::{decompose_gate, GateKind, NativeGate, Variant};

/// Angles of one depth-`D` scale transformation: `thetas[0]` drives the `W`
/// sublayer, `thetas[1..]` the successive `U` sublayers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct AngleProfile {
    depth: usize,
    thetas: Vec<f64>,
    variant: Variant,
}

#[derive(Serialize, Deserialize)]
struct ProfileRepr {
    depth: usize,
    thetas: Vec<f64>,
    variant: Variant,
}

impl TryFrom<ProfileRepr> for AngleProfile {
    type Error = Error;
    fn try_from(r: ProfileRepr) -> Result<Self> {
        if r.thetas.len() != r.depth {
            return Err(Error::InvalidArgument(format!(
                "depth {} but {} angles",
                r.depth,
                r.thetas.len()
            )));
        }
        AngleProfile::new(r.thetas, r.variant)
    }
}

impl From<AngleProfile> for ProfileRepr {
    fn from(p: AngleProfile) -> Self {
        ProfileRepr {
            depth: p.depth,
            thetas: p.thetas,
            variant: p.variant,
        }
    }
}

impl AngleProfile {
    pub fn new(thetas: Vec<f64>, variant: Variant) -> Result<Self> {
        if thetas.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "depth must be at least 2, got {}",
                thetas.len()
            )));
        }
        if let Some(t) = thetas.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite angle {t}")));
        }
        Ok(AngleProfile {
            depth: thetas.len(),
            thetas,
            variant,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn with_variant(&self, variant: Variant) -> AngleProfile {
        AngleProfile {
            variant,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Pauli frame of a circuit: `Xx` (simulation) or `Zz` (hardware).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Convention {
    #[default]
    Xx,
    Zz,
}

impl Convention {
    pub fn swapped(self) -> Convention {
        match self {
            Convention::Xx => Convention::Zz,
            Convention::Zz => Convention::Xx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerGate {
    pub kind: GateKind,
    pub theta: f64,
    /// Fine qubits `(a, b)`; `a` is the gate's local qubit 0.
    pub qubits: (usize, usize),
    /// Sublayer index: 0 for `W`, `d` for the `d`-th `U` sublayer.
    pub sublayer: usize,
}

/// One scale transformation restricted to some set of fine qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCircuit {
    pub n_total: usize,
    /// Qubits prepared fresh (`|0⟩`, or `|+⟩` in the ZZ convention).
    pub prep: Vec<usize>,
    /// Carried qubits receiving the input state, in lattice order.
    pub inputs: Vec<usize>,
    pub gates: Vec<LayerGate>,
    pub output_window: Range<usize>,
    pub discard: Vec<usize>,
    pub variant: Variant,
    pub convention: Convention,
}

impl LayerCircuit {
    pub fn n_in(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_out(&self) -> usize {
        self.output_window.len()
    }

    pub fn window(&self) -> Vec<usize> {
        self.output_window.clone().collect()
    }

    pub fn check(&self) -> Result<()> {
        let all: BTreeSet<usize> = (0..self.n_total).collect();
        let pi: BTreeSet<usize> = self.prep.iter().chain(&self.inputs).copied().collect();
        if pi != all || self.prep.len() + self.inputs.len() != self.n_total {
            return Err(Error::InvalidArgument(
                "prep and inputs must partition the qubits".into(),
            ));
        }
        let wd: BTreeSet<usize> = self
            .output_window
            .clone()
            .chain(self.discard.iter().copied())
            .collect();
        if wd != all || self.output_window.len() + self.discard.len() != self.n_total {
            return Err(Error::InvalidArgument(
                "output window and discard must partition the qubits".into(),
            ));
        }
        if self
            .gates
            .iter()
            .any(|g| g.qubits.0 >= self.n_total || g.qubits.1 >= self.n_total)
        {
            return Err(Error::InvalidArgument("gate outside register".into()));
        }
        Ok(())
    }
}

fn layer_gates(profile: &AngleProfile, width: usize) -> Vec<LayerGate> {
    let th = profile.thetas();
    let mut gates: Vec<LayerGate> = (0..width / 2)
        .map(|k| LayerGate {
            kind: GateKind::W,
            theta: th[0],
            qubits: (2 * k, 2 * k + 1),
            sublayer: 0,
        })
        .collect();
    for (d, &theta) in th.iter().enumerate().skip(1) {
        let offset = d % 2;
        gates.extend(
            (offset..width.saturating_sub(1))
                .step_by(2)
                .map(|a| LayerGate {
                    kind: GateKind::U,
                    theta,
                    qubits: (a, a + 1),
                    sublayer: d,
                }),
        );
    }
    gates
}

/// Full open-boundary layer on `width` fine qubits, no pruning.
pub fn build_scale_layer(profile: &AngleProfile, width: usize) -> Result<LayerCircuit> {
    if width < 4 || width % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "layer width must be even and ≥ 4, got {width}"
        )));
    }
    Ok(LayerCircuit {
        n_total: width,
        prep: (0..width).step_by(2).collect(),
        inputs: (1..width).step_by(2).collect(),
        gates: layer_gates(profile, width),
        output_window: 0..width,
        discard: vec![],
        variant: profile.variant(),
        convention: Convention::Xx,
    })
}

/// Backward pruning of a full layer to the past cone of `window`. Carried
/// qubits listed in `keep_inputs` stay as inputs even when outside the cone.
fn prune(full: &LayerCircuit, window: Range<usize>, keep_inputs: &[usize]) -> LayerCircuit {
    let mut active: BTreeSet<usize> = window.clone().collect();
    let mut kept = Vec::new();
    for g in full.gates.iter().rev() {
        let (a, b) = g.qubits;
        if active.contains(&a) || active.contains(&b) {
            active.insert(a);
            active.insert(b);
            kept.push(*g);
        }
    }
    kept.reverse();
    active.extend(keep_inputs.iter().copied());
    let qubits: Vec<usize> = active.into_iter().collect();
    let label = |q: usize| qubits.binary_search(&q).expect("qubit in cone");
    let prep: Vec<usize> = qubits
        .iter()
        .filter(|q| full.prep.contains(q))
        .map(|&q| label(q))
        .collect();
    let inputs: Vec<usize> = qubits
        .iter()
        .filter(|q| full.inputs.contains(q))
        .map(|&q| label(q))
        .collect();
    let start = label(window.start);
    let output_window = start..start + window.len();
    let discard = (0..qubits.len())
        .filter(|q| !output_window.contains(q))
        .collect();
    LayerCircuit {
        n_total: qubits.len(),
        prep,
        inputs,
        gates: kept
            .into_iter()
            .map(|g| LayerGate {
                qubits: (label(g.qubits.0), label(g.qubits.1)),
                ..g
            })
            .collect(),
        output_window,
        discard,
        variant: full.variant,
        convention: full.convention,
    }
}

/// Exact past causal cone of an `n_out`-qubit window of an infinite layer.
///
/// A `Left` window starts on a carried qubit, a `Right` window on an ancilla.
/// The layer is built `4·n_out + 2D` wide so the cone never reaches its edge.
pub fn causal_cone(profile: &AngleProfile, n_out: usize, side: Side) -> Result<LayerCircuit> {
    if n_out == 0 {
        return Err(Error::InvalidArgument("empty output window".into()));
    }
    let width = 4 * n_out + 2 * profile.depth() + 4;
    let full = build_scale_layer(profile, width)?;
    let base = ((width - n_out) / 2) & !1;
    let start = match side {
        Side::Left => base + 1,
        Side::Right => base + 2,
    };
    Ok(prune(&full, start..start + n_out, &[]))
}

/// The iterated local channel: `n` carried qubits and their `n` ancillas on an
/// open segment of `2n` fine qubits, pruned to the `Left` window `[1, n]` or
/// the `Right` window `[2, n+1]`. Input and output both have `n` qubits.
///
/// For `D = 2` and `n = 3` this coincides with [`causal_cone`]; deeper layers
/// are truncated at the segment edges.
pub fn segment_cone(profile: &AngleProfile, n: usize, side: Side) -> Result<LayerCircuit> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "segment needs at least 2 carried qubits, got {n}"
        )));
    }
    let full = build_scale_layer(profile, 2 * n)?;
    let start = match side {
        Side::Left => 1,
        Side::Right => 2,
    };
    let carried = full.inputs.clone();
    Ok(prune(&full, start..start + n, &carried))
}

/// Resources for `n_layers` iterations of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub ms_gates: usize,
    pub single_qubit_gates: usize,
    pub resets: usize,
}

/// Native gate counts for `n_layers` applications of the `n_out`-qubit channel.
/// Single-qubit gates include the Hadamard that prepares each fresh ancilla in
/// the hardware frame; resets count ancilla reuse after the first layer.
pub fn gate_counts(profile: &AngleProfile, n_out: usize, n_layers: usize) -> Result<GateCounts> {
    let cone = segment_cone(profile, n_out, Side::Left)?;
    if n_layers == 0 {
        return Ok(GateCounts {
            ms_gates: 0,
            single_qubit_gates: 0,
            resets: 0,
        });
    }
    let mut ms = 0;
    let mut single = cone.prep.len();
    for g in &cone.gates {
        let seq = decompose_gate(g.kind, g.theta, cone.variant);
        ms += seq.ms_count();
        single += seq.single_qubit_count();
    }
    Ok(GateCounts {
        ms_gates: ms * n_layers,
        single_qubit_gates: single * n_layers,
        resets: cone.prep.len() * (n_layers - 1),
    })
}

/// Toggle between the XX and ZZ frames. Gate angles and wiring are untouched;
/// the frame decides MS axes, rotation axes and the fresh-qubit state.
pub fn swap_convention(circuit: &LayerCircuit) -> LayerCircuit {
    LayerCircuit {
        convention: circuit.convention.swapped(),
        ..circuit.clone()
    }
}

/// A native gate placed on global qubits: local qubit `i` is `qubits[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeOp {
    pub gate: NativeGate,
    pub qubits: Vec<usize>,
}

/// A layer lowered to native gates in its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeCircuit {
    pub n_total: usize,
    pub prep: Vec<usize>,
    pub inputs: Vec<usize>,
    pub ops: Vec<NativeOp>,
    pub output_window: Range<usize>,
    pub discard: Vec<usize>,
    pub convention: Convention,
    pub ms_count: usize,
}

pub fn compile(circuit: &LayerCircuit) -> NativeCircuit {
    let mut ops = Vec::new();
    for g in &circuit.gates {
        let seq = decompose_gate(g.kind, g.theta, circuit.variant);
        let seq = match circuit.convention {
            Convention::Xx => seq,
            Convention::Zz => seq.swapped(),
        };
        for gate in seq.0 {
            let qubits = gate
                .qubits()
                .into_iter()
                .map(|l| if l == 0 { g.qubits.0 } else { g.qubits.1 })
                .collect();
            ops.push(NativeOp { gate, qubits });
        }
    }
    let ms_count = ops.iter().filter(|o| o.gate.is_two_qubit()).count();
    NativeCircuit {
        n_total: circuit.n_total,
        prep: circuit.prep.clone(),
        inputs: circuit.inputs.clone(),
        ops,
        output_window: circuit.output_window.clone(),
        discard: circuit.discard.clone(),
        convention: circuit.convention,
        ms_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(d: usize) -> AngleProfile {
        AngleProfile::new((0..d).map(|i| 0.1 + 0.2 * i as f64).collect(), Variant::C1).unwrap()
    }

    #[test]
    fn d2_layer_of_width_six() {
        let l = build_scale_layer(&profile(2), 6).unwrap();
        let kinds: Vec<GateKind> = l.gates.iter().map(|g| g.kind).collect();
        assert_eq!(
            kinds,
            vec![
                GateKind::W,
                GateKind::W,
                GateKind::W,
                GateKind::U,
                GateKind::U
            ]
        );
        assert_eq!(l.gates[3].qubits, (1, 2));
        assert_eq!(l.gates[4].qubits, (3, 4));
        l.check().unwrap();
    }

    #[test]
    fn odd_width_rejected() {
        assert!(build_scale_layer(&profile(2), 7).is_err());
    }

    #[test]
    fn cone_of_d2_window() {
        for side in [Side::Left, Side::Right] {
            let c = causal_cone(&profile(2), 3, side).unwrap();
            assert_eq!(c.n_total, 6);
            assert_eq!(c.gates.iter().filter(|g| g.kind == GateKind::W).count(), 3);
            assert_eq!(c.gates.iter().filter(|g| g.kind == GateKind::U).count(), 2);
            assert_eq!(c.n_in(), 3);
            c.check().unwrap();
            assert_eq!(c, segment_cone(&profile(2), 3, side).unwrap());
        }
    }

    #[test]
    fn segment_keeps_all_inputs() {
        for d in 2..=5 {
            for side in [Side::Left, Side::Right] {
                let c = segment_cone(&profile(d), 3, side).unwrap();
                assert_eq!(c.n_in(), 3);
                assert_eq!(c.n_out(), 3);
                c.check().unwrap();
            }
        }
    }

    #[test]
    fn profile_json_rejects_wrong_length() {
        let bad = r#"{"depth": 3, "thetas": [0.1, 0.2], "variant": "C1"}"#;
        assert!(serde_json::from_str::<AngleProfile>(bad).is_err());
        let good = r#"{"depth": 2, "thetas": [0.1, 0.2], "variant": "C2"}"#;
        let p: AngleProfile = serde_json::from_str(good).unwrap();
        assert_eq!(p.variant(), Variant::C2);
        let back: AngleProfile = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
