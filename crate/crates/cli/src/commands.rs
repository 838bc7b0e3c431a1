use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use dmera::channel::{Alignment, ChannelSpec};
use dmera::experiments::{
    depth_ensemble, dilution_study, fit_sigma2, noise_response as response, run_dynamics,
    susceptibility_sweep, synthesize_measurements, DilutionOptions, EnsembleSpec, MeasuredPoint,
};
use dmera::layout::gate_counts;
use dmera::mitigation::{extrapolate, measure_zne, ZneScheme};
use dmera::observables::{energy_density, energy_density_single_bond, Observable};
use dmera::spectral::{
    self, scaling_dimensions, spectrum_topk, FIXED_POINT_MAX_ITERS, FIXED_POINT_TOL,
};
use dmera::{AngleProfile, Convention, NoiseModel, Variant};
use serde::Serialize;

use crate::angles::{self, AngleSource, CalibrationRequest};
use crate::output::{OutputSet, Table};
use crate::{
    CalibrateArgs, Common, DilutionArgs, DynamicsArgs, EnsembleArgs, FitNoiseArgs, FixedPointArgs,
    GateCountArgs, NoiseResponseArgs, SpectrumArgs, SweepArgs, ZneArgs, CACHE_DIR_ENV, OUT_DIR_ENV,
};

pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("dmera-out"))
}

fn cache_dir(c: &Common, out: &Path) -> PathBuf {
    c.cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| out.join("cache"))
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
    seeds: BTreeMap<&'a str, u64>,
    profile: Option<&'a AngleProfile>,
    angle_source: Option<&'a AngleSource>,
    outputs: Vec<String>,
    wall_time_seconds: f64,
}

/// One command invocation: resolved paths, profile, and files written so far.
struct Run<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    started: Instant,
    out: OutputSet,
    profile: Option<AngleProfile>,
    source: Option<AngleSource>,
    seeds: BTreeMap<&'a str, u64>,
}

impl<'a, C: Serialize> Run<'a, C> {
    fn new(command: &'a str, config: &'a C, out: PathBuf) -> Self {
        Run {
            command,
            config,
            started: Instant::now(),
            out: OutputSet::new(out),
            profile: None,
            source: None,
            seeds: BTreeMap::new(),
        }
    }

    fn with_profile(command: &'a str, config: &'a C, common: &Common) -> Result<Self> {
        let out = out_dir(common.out.as_deref());
        let cache = cache_dir(common, &out);
        let (profile, source) = angles::resolve(
            common.angles.as_deref(),
            common.depth,
            common.variant,
            &cache,
        )?;
        if common.angles.is_none() && profile.depth() != common.depth {
            bail!(
                "cached profile has depth {} but {} was requested",
                profile.depth(),
                common.depth
            );
        }
        let mut run = Run::new(command, config, out);
        run.profile = Some(profile);
        run.source = Some(source);
        Ok(run)
    }

    fn profile(&self) -> &AngleProfile {
        self.profile.as_ref().expect("profile resolved")
    }

    fn finish(mut self) -> Result<()> {
        let sidecar = Sidecar {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config: self.config,
            seeds: std::mem::take(&mut self.seeds),
            profile: self.profile.as_ref(),
            angle_source: self.source.as_ref(),
            outputs: self.out.names(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let name = format!("{}.meta.json", self.command);
        self.out.json(&name, &sidecar)?;
        for p in self.out.commit() {
            eprintln!("wrote {}", p.display());
        }
        Ok(())
    }
}

pub fn calibrate(a: CalibrateArgs) -> Result<()> {
    let out = out_dir(a.common.out.as_deref());
    let cache = cache_dir(&a.common, &out);
    let mut req = CalibrationRequest::new(a.common.depth, a.common.variant.unwrap_or(Variant::C1));
    req.options.starts = a.starts;
    req.options.seed = a.seed;
    req.options.max_iters = a.max_iters;
    if let Some(t) = a.tol {
        req.target_tol = t;
    }
    let mut run = Run::new("calibrate", &a, out);
    run.seeds.insert("calibration", a.seed);
    let (cal, path) = angles::calibrate_into(&cache, &req)?;
    let mut t = Table::new(&[
        "depth",
        "variant",
        "energy",
        "energy_single_bond",
        "delta_sigma",
        "delta_epsilon",
        "objective",
        "start_index",
    ]);
    let f = cal.features;
    t.push(vec![
        cal.profile.depth().into(),
        cal.profile.variant().to_string().into(),
        f.energy.into(),
        f.energy_single_bond.into(),
        f.delta_sigma.into(),
        f.delta_epsilon.into(),
        cal.objective.into(),
        cal.start_index.into(),
    ]);
    run.out.csv("calibration.csv", &t)?;
    println!(
        "D={} angles {:?}: E*={:.8} Δσ={:.6} Δε={:.6} -> {}",
        cal.profile.depth(),
        cal.profile.thetas(),
        f.energy,
        f.delta_sigma,
        f.delta_epsilon,
        path.display()
    );
    run.profile = Some(cal.profile);
    run.source = Some(AngleSource::Calibrated { path });
    run.finish()
}

pub fn fixed_point(a: FixedPointArgs) -> Result<()> {
    let mut run = Run::with_profile("fixed-point", &a, &a.common)?;
    let mut t = Table::new(&[
        "alignment",
        "iterations",
        "residual",
        "energy",
        "energy_single_bond",
        "X",
        "Z",
        "ZZ",
        "ZXZ",
        "purity",
    ]);
    for (name, al) in [
        ("mixture", Alignment::Mixture),
        ("left", Alignment::Left),
        ("right", Alignment::Right),
    ] {
        let s = ChannelSpec::new(run.profile(), a.noise)
            .alignment(al)
            .build()?;
        let fp = spectral::fixed_point(&s, FIXED_POINT_TOL, FIXED_POINT_MAX_ITERS)?;
        let rho = &fp.state;
        let e = energy_density(rho, Convention::Xx)?;
        let mut row = vec![
            name.into(),
            fp.iterations.into(),
            fp.residual.into(),
            e.into(),
            energy_density_single_bond(rho, Convention::Xx)?.into(),
        ];
        for o in [
            Observable::X,
            Observable::Z,
            Observable::ZZ,
            Observable::ZXZ,
        ] {
            row.push(o.measure(rho)?.into());
        }
        row.push(rho.purity().into());
        t.push(row);
        println!("{name:>8}: E* = {e:.10}");
    }
    run.out.csv("fixed_point.csv", &t)?;
    run.finish()
}

pub fn spectrum(a: SpectrumArgs) -> Result<()> {
    let mut run = Run::with_profile("spectrum", &a, &a.common)?;
    let s = ChannelSpec::new(run.profile(), a.noise)
        .alignment(a.alignment)
        .build()?;
    let spec = spectrum_topk(&s, a.top)?;
    let mut t = Table::new(&[
        "index",
        "re_lambda",
        "im_lambda",
        "modulus",
        "delta",
        "residual",
    ]);
    for (i, (l, r)) in spec.eigenvalues.iter().zip(&spec.residuals).enumerate() {
        t.push(vec![
            (i + 1).into(),
            l.re.into(),
            l.im.into(),
            l.norm().into(),
            spectral::delta_of(*l).into(),
            (*r).into(),
        ]);
    }
    run.out.csv("spectrum.csv", &t)?;
    let dims: Vec<String> = scaling_dimensions(&spec)
        .iter()
        .take(8)
        .map(|d| format!("{:.4}{}", d.delta, if d.complex { "*" } else { "" }))
        .collect();
    println!("Δ: {}", dims.join(" "));
    run.finish()
}

pub fn dynamics(a: DynamicsArgs) -> Result<()> {
    if a.observables.is_empty() {
        bail!("no observables selected");
    }
    let mut run = Run::with_profile("dynamics", &a, &a.common)?;
    let ts = run_dynamics(
        run.profile(),
        a.noise,
        a.initial,
        a.layers,
        &a.observables,
        a.alignment,
    )?;
    let mut t = Table::new(&["layer", "observable", "value"]);
    for r in &ts.rows {
        t.push(vec![
            r.layer.into(),
            r.observable.name().into(),
            r.value.into(),
        ]);
    }
    run.out.csv("dynamics.csv", &t)?;
    if let Some(e) = ts.series(Observable::Energy).last() {
        println!("energy after {} layers: {e:.6}", a.layers);
    }
    run.finish()
}

pub fn noise_response(a: NoiseResponseArgs) -> Result<()> {
    if a.sigma2.0.is_empty() {
        bail!("empty σ² grid");
    }
    let mut run = Run::with_profile("noise-response", &a, &a.common)?;
    let mut curve = Table::new(&["sigma2", "layer", "deviation"]);
    let mut fits = Table::new(&["sigma2", "e_star", "delta_fit", "fitted_layers"]);
    for &s2 in &a.sigma2.0 {
        let nr = response(run.profile(), s2, a.layers, a.fit_layers)?;
        for (k, d) in nr.deviations.iter().enumerate() {
            curve.push(vec![s2.into(), k.into(), (*d).into()]);
        }
        fits.push(vec![
            s2.into(),
            nr.e_star.into(),
            nr.delta_fit.into(),
            nr.fitted_layers.into(),
        ]);
        println!("σ²={s2:e}: Δ_fit = {:.4}", nr.delta_fit);
    }
    run.out.csv("noise_response.csv", &curve)?;
    run.out.csv("noise_response_fit.csv", &fits)?;
    run.finish()
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let mut run = Run::with_profile("sweep", &a, &a.common)?;
    let sw = susceptibility_sweep(run.profile(), a.noise, &a.grid.0)?;
    let mut t = Table::new(&["epsilon", "energy", "percent_error"]);
    for r in &sw.rows {
        t.push(vec![
            r.epsilon.into(),
            r.energy.into(),
            r.percent_error.into(),
        ]);
    }
    run.out.csv("sweep.csv", &t)?;
    let mut f = Table::new(&["slope", "intercept", "r_squared", "fitted_points"]);
    f.push(vec![
        sw.fit.slope.into(),
        sw.fit.intercept.into(),
        sw.fit.r_squared.into(),
        sw.fitted_points.into(),
    ]);
    run.out.csv("sweep_fit.csv", &f)?;
    println!("slope dE/dε = {:.6}", sw.slope());
    run.finish()
}

pub fn ensemble(a: EnsembleArgs) -> Result<()> {
    if a.depths.is_empty() {
        bail!("no depths given");
    }
    let mut run = Run::new("ensemble", &a, out_dir(a.out.as_deref()));
    run.seeds.insert("base", a.seed);
    let mut t = Table::new(&["depth", "mean_slope", "stderr", "n"]);
    let mut members = Table::new(&["depth", "sample", "slope", "thetas"]);
    for &d in &a.depths {
        let r = depth_ensemble(EnsembleSpec::new(d, a.samples, a.variant, a.seed), a.noise)
            .with_context(|| format!("ensemble at D={d}"))?;
        t.push(vec![
            d.into(),
            r.mean_slope.into(),
            r.stderr.into(),
            r.n.into(),
        ]);
        for (i, (s, p)) in r.slopes.iter().zip(&r.profiles).enumerate() {
            let th: Vec<String> = p
                .thetas()
                .iter()
                .map(|x| crate::output::format_float(*x))
                .collect();
            members.push(vec![d.into(), i.into(), (*s).into(), th.join(" ").into()]);
        }
        println!(
            "D={d}: mean slope {:.4} ± {:.4} (n={}, {} attempts)",
            r.mean_slope, r.stderr, r.n, r.attempts
        );
    }
    run.out.csv("ensemble.csv", &t)?;
    run.out.csv("ensemble_members.csv", &members)?;
    run.finish()
}

pub fn dilution(a: DilutionArgs) -> Result<()> {
    let mut run = Run::with_profile("dilution", &a, &a.common)?;
    run.seeds.insert("trajectories", a.seed);
    let opts = DilutionOptions {
        initial_sites: a.initial_sites,
        l_max: a.l_max,
        subsystem_sizes: a.ell.clone(),
        trajectories: a.trajectories,
        seed: a.seed,
    };
    let study = dilution_study(run.profile(), a.noise, &opts)?;
    let mut t = Table::new(&["L", "ell", "layer", "fidelity", "stderr"]);
    for r in &study.rows {
        t.push(vec![
            r.l.into(),
            r.ell.into(),
            r.layer.into(),
            r.fidelity.into(),
            r.stderr.into(),
        ]);
    }
    run.out.csv("dilution.csv", &t)?;
    run.finish()
}

pub fn zne(a: ZneArgs) -> Result<()> {
    let schemes = if a.scheme.is_empty() {
        ZneScheme::ALL
            .iter()
            .copied()
            .filter(|s| a.quadratic || *s != ZneScheme::QuadraticFull)
            .collect()
    } else {
        a.scheme.clone()
    };
    let quadratic = a.quadratic || schemes.contains(&ZneScheme::QuadraticFull);
    let mut run = Run::with_profile("zne", &a, &a.common)?;
    let mut t = Table::new(&[
        "scheme",
        "sigma2",
        "E0",
        "E_last",
        "E_secondlast",
        "E_star_hat",
        "eps_hat",
        "lambda_hat",
        "accepted",
    ]);
    for &s2 in &a.sigma2.0 {
        let m = measure_zne(
            run.profile(),
            NoiseModel::imprecision(s2),
            a.repetitions,
            quadratic,
        )?;
        for &scheme in &schemes {
            let r = extrapolate(&m, scheme)?;
            t.push(vec![
                scheme.name().into(),
                s2.into(),
                r.e0.into(),
                r.e_last.into(),
                r.e_secondlast.into(),
                r.e_star_hat.into(),
                r.eps_hat.into(),
                r.lambda_hat.into(),
                r.accepted.into(),
            ]);
        }
    }
    run.out.csv("zne.csv", &t)?;
    run.finish()
}

/// Rows of a `layer,observable,mean,n_samples` file.
pub fn read_measured(path: &Path) -> Result<Vec<MeasuredPoint>> {
    #[derive(serde::Deserialize)]
    struct Row {
        layer: usize,
        observable: String,
        mean: f64,
        n_samples: u64,
    }
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["layer", "observable", "mean", "n_samples"] {
        bail!(
            "{}: header must be layer,observable,mean,n_samples",
            path.display()
        );
    }
    rdr.deserialize::<Row>()
        .enumerate()
        .map(|(i, r)| {
            let r = r.with_context(|| format!("{} row {}", path.display(), i + 2))?;
            Ok(MeasuredPoint {
                layer: r.layer,
                observable: r.observable.parse()?,
                mean: r.mean,
                n_samples: r.n_samples,
            })
        })
        .collect()
}

fn measured_table(points: &[MeasuredPoint]) -> Table {
    let mut t = Table::new(&["layer", "observable", "mean", "n_samples"]);
    for p in points {
        t.push(vec![
            p.layer.into(),
            p.observable.name().into(),
            p.mean.into(),
            p.n_samples.into(),
        ]);
    }
    t
}

pub fn fit_noise(a: FitNoiseArgs) -> Result<()> {
    let mut run = Run::with_profile("fit-noise", &a, &a.common)?;
    let data = match &a.data {
        Some(p) => read_measured(p)?,
        None => {
            run.seeds.insert("shot_noise", a.seed);
            let d = synthesize_measurements(
                run.profile(),
                NoiseModel::imprecision(a.true_sigma2),
                a.initial,
                a.layers,
                &Observable::ALL,
                a.samples,
                a.seed,
            )?;
            run.out.csv("measured.csv", &measured_table(&d))?;
            d
        }
    };
    let fit = fit_sigma2(&data, run.profile(), a.initial, &a.grid.0, &a.observables)?;
    let mut t = Table::new(&["sigma2", "residual"]);
    for (s, r) in &fit.grid {
        t.push(vec![(*s).into(), (*r).into()]);
    }
    run.out.csv("fit.csv", &t)?;
    let mut best = Table::new(&["sigma2", "residual", "refined"]);
    best.push(vec![
        fit.sigma2.into(),
        fit.residual.into(),
        fit.refined.into(),
    ]);
    run.out.csv("fit_best.csv", &best)?;
    println!("best σ² = {:.5}", fit.sigma2);
    run.finish()
}

pub fn gate_count(a: GateCountArgs) -> Result<()> {
    let mut run = Run::with_profile("gate-count", &a, &a.common)?;
    let g = gate_counts(run.profile(), a.n_out, a.layers)?;
    let mut t = Table::new(&["layers", "ms_gates", "single_qubit_gates", "resets"]);
    t.push(vec![
        a.layers.into(),
        g.ms_gates.into(),
        g.single_qubit_gates.into(),
        g.resets.into(),
    ]);
    run.out.csv("gate_count.csv", &t)?;
    println!("{}/{}/{}", g.ms_gates, g.single_qubit_gates, g.resets);
    run.finish()
}
