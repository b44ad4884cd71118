//! On-disk cohort layout: one EDF and one ground-truth JSON per subject plus
//! a `manifest.json` index.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GroundTruth;
use crate::detect::SlowingCategory;
use crate::edf::{read_edf, write_edf};
use crate::error::{Error, Result};
use crate::recording::Recording;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub site: String,
    pub subject: String,
    /// Paths relative to the manifest's directory.
    pub edf: String,
    pub truth: String,
    pub eeg_label: u8,
    pub category: SlowingCategory,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes (or extends) a cohort directory. Existing manifest entries with the
/// same site and subject are replaced.
pub fn write_cohort(dir: impl AsRef<Path>, cohort: &[(Recording, GroundTruth)]) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = if dir.join(MANIFEST).exists() { read_manifest(dir)? } else { Manifest::default() };
    for (rec, gt) in cohort {
        let stem = format!("{}_{}", gt.site, gt.subject);
        let edf = format!("{stem}.edf");
        let truth = format!("{stem}.truth.json");
        write_edf(rec, dir.join(&edf))?;
        write_json(&dir.join(&truth), gt)?;
        manifest.entries.retain(|e| !(e.site == gt.site && e.subject == gt.subject));
        manifest.entries.push(ManifestEntry {
            site: gt.site.clone(),
            subject: gt.subject.clone(),
            edf,
            truth,
            eeg_label: gt.eeg_label,
            category: gt.category,
        });
    }
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads every subject listed in the manifest.
pub fn read_cohort(dir: impl AsRef<Path>) -> Result<Vec<(Recording, GroundTruth)>> {
    let dir = dir.as_ref();
    read_manifest(dir)?
        .entries
        .iter()
        .map(|e| {
            let mut rec = read_edf(dir.join(&e.edf))?;
            rec.meta.insert("site_id".into(), e.site.clone());
            rec.meta.insert("subject_id".into(), e.subject.clone());
            let truth_path: PathBuf = dir.join(&e.truth);
            let text = fs::read_to_string(&truth_path).map_err(|err| Error::io(&truth_path, err))?;
            Ok((rec, serde_json::from_str(&text)?))
        })
        .collect()
}
