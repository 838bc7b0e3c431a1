//! Browser bindings. Every entry point takes plain values and returns JSON.

use dmera::channel::{Alignment, ChannelSpec};
use dmera::experiments::{noise_response as response, run_dynamics};
use dmera::observables::{energy_density, energy_density_single_bond, InitialState, Observable};
use dmera::spectral::{self, spectrum_topk};
use dmera::{AngleProfile, Convention, NoiseModel, Variant};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn profile(thetas: &[f64], variant: &str) -> Result<AngleProfile, String> {
    let v: Variant = variant.parse().map_err(|e: dmera::Error| e.to_string())?;
    AngleProfile::new(thetas.to_vec(), v).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Out {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Eigen {
    re: f64,
    im: f64,
    delta: f64,
}

#[derive(Serialize)]
struct Summary {
    energy: f64,
    energy_single_bond: f64,
    exact_energy: f64,
    iterations: usize,
    eigenvalues: Vec<Eigen>,
}

pub fn summary_json(thetas: &[f64], variant: &str, noise: &str, top: usize) -> Out {
    let p = profile(thetas, variant)?;
    let noise: NoiseModel = noise.parse().map_err(|e: dmera::Error| e.to_string())?;
    let run = || -> dmera::Result<Summary> {
        let s = ChannelSpec::new(&p, noise).build()?;
        let fp = spectral::fixed_point(
            &s,
            spectral::FIXED_POINT_TOL,
            spectral::FIXED_POINT_MAX_ITERS,
        )?;
        let spec = spectrum_topk(&s, top.clamp(1, 64))?;
        Ok(Summary {
            energy: energy_density(&fp.state, Convention::Xx)?,
            energy_single_bond: energy_density_single_bond(&fp.state, Convention::Xx)?,
            exact_energy: dmera::EXACT_ENERGY,
            iterations: fp.iterations,
            eigenvalues: spec
                .eigenvalues
                .iter()
                .map(|l| Eigen {
                    re: l.re,
                    im: l.im,
                    delta: spectral::delta_of(*l),
                })
                .collect(),
        })
    };
    to_json(&run().map_err(|e| e.to_string())?)
}

#[derive(Serialize)]
struct Series {
    observable: &'static str,
    values: Vec<f64>,
}

pub fn dynamics_json(
    thetas: &[f64],
    variant: &str,
    noise: &str,
    initial: &str,
    layers: usize,
) -> Out {
    let p = profile(thetas, variant)?;
    let noise: NoiseModel = noise.parse().map_err(|e: dmera::Error| e.to_string())?;
    let initial: InitialState = initial.parse().map_err(|e: dmera::Error| e.to_string())?;
    if layers > 200 {
        return Err("at most 200 layers".into());
    }
    let ts = run_dynamics(
        &p,
        noise,
        initial,
        layers,
        &Observable::ALL,
        Alignment::Mixture,
    )
    .map_err(|e| e.to_string())?;
    let series: Vec<Series> = Observable::ALL
        .iter()
        .map(|&o| Series {
            observable: o.name(),
            values: ts.series(o),
        })
        .collect();
    to_json(&series)
}

#[derive(Serialize)]
struct Response {
    e_star: f64,
    deviations: Vec<f64>,
    delta_fit: f64,
}

pub fn noise_response_json(thetas: &[f64], variant: &str, sigma2: f64, layers: usize) -> Out {
    let p = profile(thetas, variant)?;
    let r = response(&p, sigma2, layers, 6).map_err(|e| e.to_string())?;
    to_json(&Response {
        e_star: r.e_star,
        deviations: r.deviations,
        delta_fit: r.delta_fit,
    })
}

fn js(r: Out) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Fixed-point energies and the leading `top` eigenvalues.
#[wasm_bindgen]
pub fn channel_summary(
    thetas: Vec<f64>,
    variant: &str,
    noise: &str,
    top: usize,
) -> Result<String, JsError> {
    js(summary_json(&thetas, variant, noise, top))
}

/// Every observable after each of `layers` channel applications.
#[wasm_bindgen]
pub fn dynamics(
    thetas: Vec<f64>,
    variant: &str,
    noise: &str,
    initial: &str,
    layers: usize,
) -> Result<String, JsError> {
    js(dynamics_json(&thetas, variant, noise, initial, layers))
}

/// Energy deviation after one noisy layer followed by clean ones.
#[wasm_bindgen]
pub fn noise_response(
    thetas: Vec<f64>,
    variant: &str,
    sigma2: f64,
    layers: usize,
) -> Result<String, JsError> {
    js(noise_response_json(&thetas, variant, sigma2, layers))
}
