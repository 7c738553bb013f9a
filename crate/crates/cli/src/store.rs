//! On-disk layout of a two-layer run, shared by `two-layer` and `stack`.

use std::fs;
use std::path::{Path, PathBuf};

use lodkit::experiment::{TrainedLower, TwoLayerConfig};
use lodkit::ingestion::EmpiricalDataset;
use lodkit::model_io::{load_model, save_model};
use lodkit::ModelKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const RUN_FILE: &str = "run.json";

/// JSON sidecar of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub fingerprint: String,
    /// `mnist` or `synthetic`; for MNIST, the images file used.
    pub data_description: String,
    pub config: TwoLayerConfig,
}

/// Short hash of the configuration: seed, quantization, patch locations and
/// everything else that changes results.
pub fn fingerprint<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

pub fn model_path(dir: &Path, kind: ModelKind, size: usize, patch_set: usize) -> PathBuf {
    dir.join("models").join(format!(
        "{}_ny{size}_patch{patch_set}.json",
        kind.as_str().to_lowercase()
    ))
}

pub fn dataset_path(dir: &Path, patch_set: usize) -> PathBuf {
    dir.join("datasets").join(format!("patch{patch_set}.json"))
}

pub fn save_run(
    dir: &Path,
    manifest: &RunManifest,
    datasets: &[EmpiricalDataset],
    models: &[TrainedLower],
) -> Result<(), Failure> {
    fs::create_dir_all(dir.join("models")).map_err(Failure::io(dir))?;
    fs::create_dir_all(dir.join("datasets")).map_err(Failure::io(dir))?;
    for (n, d) in datasets.iter().enumerate() {
        let p = dataset_path(dir, n);
        fs::write(&p, d.to_json().map_err(Failure::data)?).map_err(Failure::io(&p))?;
    }
    for m in models {
        save_model(&m.model, &model_path(dir, m.kind, m.size, m.patch_set)).map_err(Failure::data)?;
    }
    let p = dir.join(RUN_FILE);
    fs::write(&p, serde_json::to_string_pretty(manifest).expect("manifest serializes")).map_err(Failure::io(&p))?;
    Ok(())
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest, Failure> {
    let p = dir.join(RUN_FILE);
    let s = fs::read_to_string(&p).map_err(|e| {
        Failure::Data(format!(
            "cannot read {}: {e}; run `lodkit two-layer --out {}` first",
            p.display(),
            dir.display()
        ))
    })?;
    serde_json::from_str(&s).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))
}

pub fn load_datasets(dir: &Path, count: usize) -> Result<Vec<EmpiricalDataset>, Failure> {
    (0..count)
        .map(|n| {
            let p = dataset_path(dir, n);
            let s = fs::read_to_string(&p).map_err(Failure::io(&p))?;
            EmpiricalDataset::from_json(&s).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Loads every listed lower model, reporting all absent files at once.
pub fn load_lowers(dir: &Path, wanted: &[(ModelKind, usize, usize)]) -> Result<Vec<TrainedLower>, Failure> {
    let missing: Vec<String> = wanted
        .iter()
        .map(|&(k, s, n)| model_path(dir, k, s, n))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Failure::Data(format!(
            "missing lower models ({}):\n  {}",
            missing.len(),
            missing.join("\n  ")
        )));
    }
    wanted
        .iter()
        .map(|&(kind, size, patch_set)| {
            let p = model_path(dir, kind, size, patch_set);
            let model = load_model(&p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            Ok(TrainedLower {
                patch_set,
                kind,
                size,
                model,
            })
        })
        .collect()
}
