mod angles;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dmera::channel::Alignment;
use dmera::mitigation::ZneScheme;
use dmera::observables::{InitialState, Observable};
use dmera::{NoiseModel, Variant};
use serde::Serialize;

pub const OUT_DIR_ENV: &str = "DMERA_OUT_DIR";
pub const CACHE_DIR_ENV: &str = "DMERA_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "dmera",
    version,
    about = "DMERA causal-cone channels for the critical Ising chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Circuit depth D.
    #[arg(long, short = 'D', default_value_t = 2)]
    pub depth: usize,
    /// Decomposition variant; overrides the one stored in an angle file.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// AngleProfile JSON file; calibrated (and cached) angles are used otherwise.
    #[arg(long)]
    pub angles: Option<PathBuf>,
    /// Output directory [env: DMERA_OUT_DIR, default: dmera-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory of cached calibrations [env: DMERA_CACHE_DIR, default: <out>/cache].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if let [a, b, c] = s.split(':').collect::<Vec<_>>()[..] {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{t}` is not a number"))
        };
        let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
        if !(step > 0.0) || stop < start {
            return Err("range must be start:stop:step with step > 0 and stop ≥ start".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..n).map(|i| start + i as f64 * step).collect());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{t}` is not a number"))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

impl std::str::FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Grid, String> {
        parse_grid(s).map(Grid)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit circuit angles to the reference energy and dimensions; caches the result.
    Calibrate(CalibrateArgs),
    /// Fixed point of the channel for every alignment.
    FixedPoint(FixedPointArgs),
    /// Leading eigenvalues and scaling dimensions.
    Spectrum(SpectrumArgs),
    /// Observables over repeated channel layers from a product state.
    Dynamics(DynamicsArgs),
    /// Decay of the energy after one noisy layer.
    NoiseResponse(NoiseResponseArgs),
    /// Fixed-point energy against noise strength.
    Sweep(SweepArgs),
    /// Mean susceptibility slope over random angle profiles.
    Ensemble(EnsembleArgs),
    /// Error dilution on a growing ring.
    Dilution(DilutionArgs),
    /// Zero-noise extrapolation of the fixed-point energy.
    Zne(ZneArgs),
    /// Fit the imprecision strength to measured expectation values.
    FitNoise(FitNoiseArgs),
    /// Native gate counts for a number of layers.
    GateCount(GateCountArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 32)]
    pub starts: usize,
    #[arg(long, default_value_t = 2021)]
    pub seed: u64,
    #[arg(long, default_value_t = 4000)]
    pub max_iters: u64,
    /// Energy tolerance against the reference [default: 1e-4 for D=2, 1e-3 otherwise].
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FixedPointArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "noiseless")]
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "noiseless")]
    pub noise: NoiseModel,
    #[arg(long, default_value_t = 16)]
    pub top: usize,
    #[arg(long, default_value = "mixture")]
    pub alignment: Alignment,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "noiseless")]
    pub noise: NoiseModel,
    #[arg(long, default_value = "psi1")]
    pub initial: InitialState,
    #[arg(long, default_value_t = 12)]
    pub layers: usize,
    #[arg(long, value_delimiter = ',', default_value = "X,Z,ZZ,ZXZ,energy")]
    pub observables: Vec<Observable>,
    #[arg(long, default_value = "mixture")]
    pub alignment: Alignment,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NoiseResponseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Imprecision strengths of the single noisy layer.
    #[arg(long, default_value = "1e-3,1e-2,1e-1")]
    pub sigma2: Grid,
    /// Noiseless layers after the noisy one.
    #[arg(long, default_value_t = 12)]
    pub layers: usize,
    /// Leading layers used in the exponential fit.
    #[arg(long, default_value_t = 6)]
    pub fit_layers: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Noise family; its strength is replaced by each grid value.
    #[arg(long, default_value = "imprecision:sigma2=0")]
    pub noise: NoiseModel,
    #[arg(
        long,
        default_value = "1e-4,2.5e-4,5e-4,1e-3,2e-3,5e-3,1e-2,2e-2,5e-2,1e-1"
    )]
    pub grid: Grid,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnsembleArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub depths: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    #[arg(long, default_value = "C2")]
    pub variant: Variant,
    #[arg(long, default_value = "imprecision:sigma2=0")]
    pub noise: NoiseModel,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DilutionArgs {
    #[command(flatten)]
    pub common: Common,
    /// Noise on the first layer.
    #[arg(long, default_value = "imprecision:sigma2=1e-2")]
    pub noise: NoiseModel,
    #[arg(long, default_value_t = 500)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 4)]
    pub initial_sites: usize,
    #[arg(long, default_value_t = 16)]
    pub l_max: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub ell: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ZneArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(
        long,
        default_value = "1e-4,3.1622776601683795e-4,1e-3,3.1622776601683795e-3,1e-2"
    )]
    pub sigma2: Grid,
    /// Schemes to report [default: all].
    #[arg(long, value_delimiter = ',')]
    pub scheme: Vec<ZneScheme>,
    /// Fold count of the full-circuit baseline.
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Also measure five-fold circuits for the quadratic baseline.
    #[arg(long)]
    pub quadratic: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitNoiseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Measured data (layer,observable,mean,n_samples). Synthesized when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "psi1")]
    pub initial: InitialState,
    /// Grid of imprecision strengths, `start:stop:step` or a list.
    #[arg(long, default_value = "0:0.2:0.01")]
    pub grid: Grid,
    #[arg(long, value_delimiter = ',', default_value = "X,Z,ZZ,ZXZ,energy")]
    pub observables: Vec<Observable>,
    /// Strength used to synthesize data.
    #[arg(long, default_value_t = 0.112)]
    pub true_sigma2: f64,
    #[arg(long, default_value_t = 12)]
    pub layers: usize,
    #[arg(long, default_value_t = 200)]
    pub samples: u64,
    #[arg(long, default_value_t = 5)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GateCountArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 12)]
    pub layers: usize,
    /// Output qubits of the channel.
    #[arg(long, default_value_t = 3)]
    pub n_out: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate(a) => commands::calibrate(a),
        Command::FixedPoint(a) => commands::fixed_point(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Dynamics(a) => commands::dynamics(a),
        Command::NoiseResponse(a) => commands::noise_response(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Ensemble(a) => commands::ensemble(a),
        Command::Dilution(a) => commands::dilution(a),
        Command::Zne(a) => commands::zne(a),
        Command::FitNoise(a) => commands::fit_noise(a),
        Command::GateCount(a) => commands::gate_count(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
