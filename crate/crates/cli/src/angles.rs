//! Angle profiles: explicit files or cached calibrations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dmera::experiments::{calibrate_angles, reference_profile, CalibrationOptions};
use dmera::{AngleProfile, Variant};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Where a profile came from, recorded in every sidecar.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngleSource {
    File {
        path: PathBuf,
    },
    Cache {
        path: PathBuf,
    },
    Calibrated {
        path: PathBuf,
    },
    /// Built-in table shipped with the library.
    Reference {
        depth: usize,
    },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationRequest {
    pub depth: usize,
    pub variant: Variant,
    pub target_tol: f64,
    pub options: CalibrationOptions,
}

impl CalibrationRequest {
    pub fn new(depth: usize, variant: Variant) -> CalibrationRequest {
        CalibrationRequest {
            depth,
            variant,
            target_tol: default_tolerance(depth),
            options: CalibrationOptions::default(),
        }
    }
}

/// Energy tolerance of the reference at each depth.
pub fn default_tolerance(depth: usize) -> f64 {
    if depth == 2 {
        1e-4
    } else {
        1e-3
    }
}

fn short_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))[..16].to_string()
}

pub fn profile_bytes(profile: &AngleProfile) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(profile)?;
    b.push(b'\n');
    Ok(b)
}

pub fn read_profile(path: &Path) -> Result<AngleProfile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading angle file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing angle file {}", path.display()))
}

/// Store a profile under a name derived from its content; returns the path.
pub fn store_profile(cache: &Path, profile: &AngleProfile) -> Result<PathBuf> {
    let bytes = profile_bytes(profile)?;
    let path = cache.join(format!("angles-{}.json", short_hash(&bytes)));
    if !path.exists() {
        crate::output::write_atomic(&path, &bytes)?;
    }
    Ok(path)
}

/// Pointer to the latest calibration at this depth and variant.
fn ref_path(cache: &Path, depth: usize, variant: Variant) -> PathBuf {
    cache.join(format!("calibrated-D{depth}-{variant}.ref"))
}

/// The cached calibration, if one exists and still matches its name.
pub fn cached(cache: &Path, depth: usize, variant: Variant) -> Result<Option<PathBuf>> {
    let r = ref_path(cache, depth, variant);
    if !r.exists() {
        return Ok(None);
    }
    let name = fs::read_to_string(&r)?.trim().to_string();
    let path = cache.join(&name);
    let bytes = fs::read(&path)
        .with_context(|| format!("cache entry {} points at missing {name}", r.display()))?;
    if name != format!("angles-{}.json", short_hash(&bytes)) {
        bail!(
            "cached angle file {} does not match its content hash",
            path.display()
        );
    }
    Ok(Some(path))
}

pub fn calibrate_into(
    cache: &Path,
    req: &CalibrationRequest,
) -> Result<(dmera::experiments::Calibration, PathBuf)> {
    let cal = calibrate_angles(req.depth, req.variant, req.target_tol, req.options)?;
    let path = store_profile(cache, &cal.profile)?;
    let name = path
        .file_name()
        .expect("file path")
        .to_string_lossy()
        .into_owned();
    crate::output::write_atomic(
        &ref_path(cache, req.depth, req.variant),
        format!("{name}\n").as_bytes(),
    )?;
    Ok((cal, path))
}

/// Explicit file if given, otherwise the cached or freshly calibrated profile.
pub fn resolve(
    file: Option<&Path>,
    depth: usize,
    variant: Option<Variant>,
    cache: &Path,
) -> Result<(AngleProfile, AngleSource)> {
    if let Some(path) = file {
        let p = read_profile(path)?;
        let p = match variant {
            Some(v) => p.with_variant(v),
            None => p,
        };
        return Ok((
            p,
            AngleSource::File {
                path: path.to_path_buf(),
            },
        ));
    }
    let req = CalibrationRequest::new(depth, variant.unwrap_or(Variant::C1));
    if let Some(path) = cached(cache, depth, req.variant)? {
        return Ok((read_profile(&path)?, AngleSource::Cache { path }));
    }
    if let Some(p) = reference_profile(depth, req.variant) {
        return Ok((p, AngleSource::Reference { depth }));
    }
    eprintln!(
        "no cached angles for D={depth}; calibrating ({} starts)",
        req.options.starts
    );
    let (cal, path) = calibrate_into(cache, &req)?;
    Ok((cal.profile, AngleSource::Calibrated { path }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_is_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let p = AngleProfile::new(vec![0.26675, -0.52029], Variant::C1).unwrap();
        let a = store_profile(dir.path(), &p).unwrap();
        let b = store_profile(dir.path(), &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(read_profile(&a).unwrap(), p);
        let q = p.with_variant(Variant::C2);
        assert_ne!(store_profile(dir.path(), &q).unwrap(), a);
    }
}
