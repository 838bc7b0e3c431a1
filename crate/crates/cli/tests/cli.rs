use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dmera(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmera"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DMERA_OUT_DIR")
        .env_remove("DMERA_CACHE_DIR")
        .output()
        .expect("spawn dmera")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = dmera(out, args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let body = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, body)
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

#[test]
fn gate_count_prints_totals() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ok(dir.path(), &["gate-count"]).contains("120/156/33"));
    let (h, b) = rows(&dir.path().join("gate_count.csv"));
    assert_eq!(h, ["layers", "ms_gates", "single_qubit_gates", "resets"]);
    assert_eq!(b[0], ["12", "120", "156", "33"]);
}

#[test]
fn spectrum_lists_requested_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["spectrum", "--depth", "2", "--top", "32"]);
    let (h, b) = rows(&dir.path().join("spectrum.csv"));
    assert_eq!(
        h,
        [
            "index",
            "re_lambda",
            "im_lambda",
            "modulus",
            "delta",
            "residual"
        ]
    );
    assert_eq!(b.len(), 32);
    let lambda1: f64 = b[0][1].parse().unwrap();
    assert!((lambda1 - 1.0).abs() < 1e-9);
    let delta2: f64 = b[1][4].parse().unwrap();
    assert!((delta2 - 0.136).abs() < 0.005);
}

#[test]
fn geometric_zne_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["zne", "--scheme", "geom-additive", "--sigma2", "0.003"],
    );
    let (h, b) = rows(&dir.path().join("zne.csv"));
    assert_eq!(
        h,
        [
            "scheme",
            "sigma2",
            "E0",
            "E_last",
            "E_secondlast",
            "E_star_hat",
            "eps_hat",
            "lambda_hat",
            "accepted"
        ]
    );
    assert_eq!(b.len(), 1);
    assert_eq!(b[0][0], "geom-additive");
    assert_eq!(b[0][8], "true");
}

#[test]
fn bad_noise_spec_shows_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let o = dmera(dir.path(), &["dynamics", "--noise", "imprecision:sigma=1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("imprecision:sigma2=<f>"), "{err}");
    assert!(files(dir.path()).is_empty());
}

#[test]
fn failed_runs_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "layer,observable,value\n0,X,0.1\n").unwrap();
    let out = dir.path().join("out");
    let o = dmera(&out, &["fit-noise", "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("layer,observable,mean,n_samples"));
    assert!(files(&out).is_empty(), "{:?}", files(&out));

    let o = dmera(&out, &["noise-response", "--sigma2", "1e-3,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(files(&out).is_empty(), "{:?}", files(&out));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 5] = [
        &[
            "dynamics",
            "--noise",
            "imprecision:sigma2=0.112",
            "--initial",
            "psi2",
        ],
        &["fit-noise", "--samples", "50", "--layers", "4"],
        &["dilution", "--trajectories", "20", "--l-max", "8"],
        &["ensemble", "--depths", "2", "--samples", "2"],
        &["sweep", "--depth", "3"],
    ];
    for args in runs {
        ok(a.path(), args);
        ok(b.path(), args);
    }
    let names: Vec<String> = files(a.path())
        .into_iter()
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert!(names.len() >= 8, "{names:?}");
    for n in &names {
        assert_eq!(
            fs::read(a.path().join(n)).unwrap(),
            fs::read(b.path().join(n)).unwrap(),
            "{n}"
        );
    }
}

#[test]
fn sidecar_names_the_profile() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fixed-point", "-D", "4", "--variant", "C2"]);
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("fixed-point.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["command"], "fixed-point");
    assert_eq!(meta["profile"]["depth"], 4);
    assert_eq!(meta["profile"]["variant"], "C2");
    assert_eq!(meta["angle_source"]["kind"], "reference");
    assert_eq!(meta["outputs"], serde_json::json!(["fixed_point.csv"]));
}

#[test]
fn angle_files_override_the_reference() {
    let dir = tempfile::tempdir().unwrap();
    let angles = dir.path().join("a.json");
    fs::write(
        &angles,
        r#"{"depth": 2, "thetas": [0.3, -0.6], "variant": "C1"}"#,
    )
    .unwrap();
    ok(
        dir.path(),
        &["fixed-point", "--angles", angles.to_str().unwrap()],
    );
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("fixed-point.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["angle_source"]["kind"], "file");
    assert_eq!(meta["profile"]["thetas"], serde_json::json!([0.3, -0.6]));
}

#[test]
fn calibration_is_cached_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cache_s = cache.to_str().unwrap();
    ok(
        dir.path(),
        &[
            "calibrate",
            "--starts",
            "1",
            "--max-iters",
            "30",
            "--tol",
            "1",
            "--cache-dir",
            cache_s,
        ],
    );
    let (_, b) = rows(&dir.path().join("calibration.csv"));
    assert_eq!(b.len(), 1);
    let cached = files(&cache);
    assert!(
        cached.contains(&"calibrated-D2-C1.ref".to_string()),
        "{cached:?}"
    );
    ok(
        dir.path(),
        &["spectrum", "--top", "4", "--cache-dir", cache_s],
    );
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("spectrum.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["angle_source"]["kind"], "cache");

    // a tampered entry is refused rather than silently used
    let angle_file = cached.iter().find(|n| n.starts_with("angles-")).unwrap();
    fs::write(cache.join(angle_file), "{}").unwrap();
    let o = dmera(dir.path(), &["spectrum", "--cache-dir", cache_s]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn measured_data_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    ok(
        &first,
        &[
            "fit-noise",
            "--samples",
            "80",
            "--layers",
            "5",
            "--grid",
            "0:0.2:0.02",
        ],
    );
    let (h, _) = rows(&first.join("measured.csv"));
    assert_eq!(h, ["layer", "observable", "mean", "n_samples"]);
    let data = first.join("measured.csv");
    ok(
        &second,
        &[
            "fit-noise",
            "--data",
            data.to_str().unwrap(),
            "--grid",
            "0:0.2:0.02",
        ],
    );
    for n in ["fit.csv", "fit_best.csv"] {
        assert_eq!(
            fs::read(first.join(n)).unwrap(),
            fs::read(second.join(n)).unwrap(),
            "{n}"
        );
    }
    let (h, b) = rows(&second.join("fit.csv"));
    assert_eq!(h, ["sigma2", "residual"]);
    assert_eq!(b.len(), 11);
}

#[test]
fn empty_selection_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["spectrum", "--top", "0"]);
    let text = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(text, "index,re_lambda,im_lambda,modulus,delta,residual\r\n");
}
