//! Scale-invariant DMERA channels for the critical transverse-field Ising chain.
//!
//! One scale transformation of a depth-`D` DMERA circuit, restricted to the past
//! causal cone of a few output qubits, is a quantum channel on a fixed number of
//! qubits. Its fixed point approximates a local patch of the ground state and its
//! spectrum encodes scaling dimensions. This crate builds those channels from
//! native trapped-ion gates, attaches gate noise, and runs the numerical studies
//! around them: calibration, convergence, susceptibility, error dilution and
//! zero-noise extrapolation.
//!
//! Conventions used throughout:
//! - qubit 0 is the most significant tensor factor;
//! - operators are vectorized by stacking columns, so `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`;
//! - simulations run in the XX convention (MS gates `exp(-iθ/2 X⊗X)`, fresh qubits in
//!   `|0⟩`); the hardware ZZ convention exists at the edges and is reached by
//!   conjugating every qubit with a Hadamard.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod gatelib;
pub mod layout;
pub mod linalg;
pub mod mitigation;
pub mod noise;
pub mod observables;
pub mod spectral;

pub use channel::{DensityMatrix, KrausSet, Superoperator};
pub use error::{Error, Result};
pub use gatelib::{GateKind, NativeGate, Variant};
pub use layout::{AngleProfile, Convention, LayerCircuit, Side};
pub use noise::{Bias, NoiseModel};

/// Exact ground-state energy density of the critical Ising chain, `-4/π`.
pub const EXACT_ENERGY: f64 = -4.0 / std::f64::consts::PI;
