//! File formats: pseudo-orbit files with a checksum over the cached step
//! errors, JSON reports, CSV curves, and block-plan manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::concat::{BlockPlan, GrowthRule};
use crate::error::{Error, Result};
use crate::pseudo_orbit::PseudoOrbit;
use crate::space::Point;
use crate::system::System;

pub const SCHEMA_VERSION: u32 = 1;

/// Hex SHA-256 of the little-endian bytes of `values`.
pub fn checksum(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Serialize, Deserialize)]
struct OrbitFile {
    schema_version: u32,
    system: System,
    points: Vec<Point>,
    step_errors: Vec<f64>,
    #[serde(default)]
    clamped: Vec<usize>,
    checksum: String,
}

fn check_schema(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::param(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, found {found}"),
        ));
    }
    Ok(())
}

pub fn orbit_to_json(xi: &PseudoOrbit) -> Result<String> {
    let file = OrbitFile {
        schema_version: SCHEMA_VERSION,
        system: xi.system().clone(),
        points: xi.points().to_vec(),
        step_errors: xi.step_errors().to_vec(),
        clamped: xi.clamped().to_vec(),
        checksum: checksum(xi.step_errors()),
    };
    Ok(serde_json::to_string_pretty(&file)? + "\n")
}

/// Parses an orbit file, checks the checksum of the cached errors and then
/// the cached errors against recomputed ones.
pub fn orbit_from_json(text: &str) -> Result<PseudoOrbit> {
    let file: OrbitFile = serde_json::from_str(text)?;
    check_schema(file.schema_version)?;
    let actual = checksum(&file.step_errors);
    if actual != file.checksum {
        return Err(Error::Integrity(format!(
            "checksum {} does not match cached step errors ({actual})",
            file.checksum
        )));
    }
    let horizon = file.points.len().saturating_sub(1);
    if let Some(&j) = file.clamped.iter().find(|&&j| j >= horizon) {
        return Err(Error::range("clamped index", j, format!("[0, {horizon})")));
    }
    Ok(PseudoOrbit::with_cached_errors(file.system, file.points, &file.step_errors)?.with_clamped(file.clamped))
}

pub fn save_orbit(path: &Path, xi: &PseudoOrbit) -> Result<()> {
    fs::write(path, orbit_to_json(xi)?)?;
    Ok(())
}

pub fn load_orbit(path: &Path) -> Result<PseudoOrbit> {
    orbit_from_json(&fs::read_to_string(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes a header and numeric rows.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the first column of a CSV file as numbers. Blank lines are skipped
/// and a non-numeric first row is taken as a header.
pub fn read_sequence_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let Some(field) = record.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::param("sequence", format!("line {}: `{field}` is not a number", i + 1)));
            }
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct PlanManifest {
    schema_version: u32,
    system: System,
    growth: GrowthRule,
    /// Block files, relative to the manifest.
    blocks: Vec<PathBuf>,
    lengths: Vec<usize>,
    offsets: Vec<usize>,
    quality: Vec<usize>,
}

/// Writes `block_<k>.json` for every block and `manifest.json` referencing
/// them into `dir`; returns the manifest path.
pub fn save_plan(dir: &Path, plan: &BlockPlan) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (i, b) in plan.blocks().iter().enumerate() {
        let name = PathBuf::from(format!("block_{}.json", i + 1));
        save_orbit(&dir.join(&name), b)?;
        names.push(name);
    }
    let manifest = PlanManifest {
        schema_version: SCHEMA_VERSION,
        system: plan.system().clone(),
        growth: plan.growth(),
        blocks: names,
        lengths: plan.lengths(),
        offsets: plan.offsets().to_vec(),
        quality: plan.quality_levels().to_vec(),
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Loads the blocks named by a manifest and rebuilds the plan, checking the
/// recorded bookkeeping against the recomputed one.
pub fn load_plan(manifest_path: &Path) -> Result<BlockPlan> {
    let manifest: PlanManifest = read_json(manifest_path)?;
    check_schema(manifest.schema_version)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let blocks = manifest
        .blocks
        .iter()
        .map(|name| load_orbit(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    let plan = BlockPlan::new(manifest.system, blocks, manifest.growth)?;
    if plan.lengths() != manifest.lengths || plan.offsets() != manifest.offsets || plan.quality_levels() != manifest.quality {
        return Err(Error::Integrity("manifest bookkeeping differs from its blocks".into()));
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concat::noisy_blocks;
    use crate::density::IndexSet;
    use crate::disk_example::build_disk_system;
    use crate::pseudo_orbit::{make_corrupted_orbit, JumpRule};

    fn sample() -> PseudoOrbit {
        let s = build_disk_system();
        let c = IndexSet::new(vec![3, 10, 20], 40).unwrap();
        make_corrupted_orbit(&s, &[0.5, 0.5], 40, &c, &JumpRule::Uniform, 8).unwrap()
    }

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("shadowlab-io-{}-{name}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn orbit_round_trip() {
        let xi = sample();
        let text = orbit_to_json(&xi).unwrap();
        let back = orbit_from_json(&text).unwrap();
        assert_eq!(back, xi);
        assert_eq!(orbit_to_json(&back).unwrap(), text);
    }

    #[test]
    fn tampered_checksum_is_an_integrity_error() {
        let text = orbit_to_json(&sample()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["checksum"] = serde_json::Value::String("00".repeat(32));
        let err = orbit_from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
    }

    #[test]
    fn tampered_errors_with_fresh_checksum_fail_recomputation() {
        let text = orbit_to_json(&sample()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut errs: Vec<f64> = serde_json::from_value(v["step_errors"].clone()).unwrap();
        errs[5] += 0.01;
        v["checksum"] = serde_json::Value::String(checksum(&errs));
        v["step_errors"] = serde_json::to_value(&errs).unwrap();
        assert!(matches!(orbit_from_json(&v.to_string()), Err(Error::Integrity(_))));
    }

    #[test]
    fn wrong_schema_version() {
        let text = orbit_to_json(&sample()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["schema_version"] = 7.into();
        assert!(matches!(orbit_from_json(&v.to_string()), Err(Error::Parameter { .. })));
    }

    #[test]
    fn sequence_csv() {
        let dir = tmp("csv");
        let p = dir.join("a.csv");
        fs::write(&p, "value\n1\n0.5\n\n0\n").unwrap();
        assert_eq!(read_sequence_csv(&p).unwrap(), vec![1.0, 0.5, 0.0]);
        fs::write(&p, "1\nx\n").unwrap();
        assert!(read_sequence_csv(&p).is_err());
        write_csv(&p, &["n", "mean"], vec![vec![1.0, 0.25], vec![2.0, 0.5]]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "n,mean\n1,0.25\n2,0.5\n");
    }

    #[test]
    fn plan_round_trip() {
        let s = build_disk_system();
        let blocks = noisy_blocks(&s, &[8, 80], &[0.5, 0.3], 1).unwrap();
        let plan = BlockPlan::new(s, blocks, GrowthRule::default()).unwrap();
        let dir = tmp("plan");
        let manifest = save_plan(&dir, &plan).unwrap();
        assert_eq!(load_plan(&manifest).unwrap(), plan);
    }
}
