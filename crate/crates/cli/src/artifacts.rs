//! Run-directory layout: everything a `train` invocation leaves on disk and
//! everything `eval` needs to reconstruct a trained model.
//!
//! ```text
//! RUN_DIR/
//!   manifest.json        resolved config, seeds, dataset shape (provenance)
//!   metrics.csv          per-seed rows + aggregate mean±std row
//!   seed-<S>/
//!     config.json        the exact TrainConfig used for this seed
//!     view-<V>.bin       per-view network checkpoint (binary, see core docs)
//!     fusion.json        discount logits ρ
//!     centers.json       class centers fit on this seed's training split
//!     epochs.csv         per-epoch loss breakdown and accuracies
//! ```
//!
//! Nothing here records wall-clock or timestamps, so a rerun with the same
//! configuration reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use edpmvc_core::fusion::FusionWeights;
use edpmvc_core::impute::ClassCenters;
use edpmvc_core::mlp::MlpParams;
use edpmvc_core::train::{AdamState, EpochRecord, FitReport, TrainConfig, TrainState};

/// Provenance block written to `manifest.json` for `train` runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainManifest {
    pub command: String,
    pub data: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_data: Option<String>,
    pub seeds: Vec<u64>,
    /// Shared config; each seed's exact copy (with its own `seed` field)
    /// lives in `seed-<S>/config.json`.
    pub config: TrainConfig,
    pub dataset: DatasetShape,
}

/// Shape of the dataset a run was trained on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetShape {
    pub n_samples: usize,
    pub n_views: usize,
    pub n_classes: usize,
    pub view_dims: Vec<usize>,
    pub missing_rate: f64,
    pub provenance: String,
}

impl DatasetShape {
    pub fn of(ds: &edpmvc_core::data::Dataset) -> Self {
        DatasetShape {
            n_samples: ds.len(),
            n_views: ds.num_views(),
            n_classes: ds.n_classes,
            view_dims: ds.view_dims.clone(),
            missing_rate: ds.missing_rate(),
            provenance: ds.provenance.clone(),
        }
    }
}

pub fn seed_dir(run: &Path, seed: u64) -> PathBuf {
    run.join(format!("seed-{seed}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing JSON artifact")?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Serializes one trained seed (config, checkpoints, fusion logits, centers,
/// epoch log) under `run/seed-<S>/`.
pub fn write_seed_artifacts(run: &Path, state: &TrainState, report: &FitReport) -> Result<()> {
    let dir = seed_dir(run, state.config.seed);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("config.json"), &state.config)?;
    write_json(&dir.join("fusion.json"), &state.weights)?;
    write_json(&dir.join("centers.json"), &state.centers)?;
    for (v, net) in state.nets.iter().enumerate() {
        let path = dir.join(format!("view-{v}.bin"));
        net.save(&path)
            .with_context(|| format!("writing checkpoint {}", path.display()))?;
    }
    write_epochs_csv(&dir.join("epochs.csv"), &report.epochs)?;
    Ok(())
}

/// Rebuilds an evaluable [`TrainState`] from a seed directory. The optimizer
/// state is not persisted; it is re-created empty (evaluation never reads it).
pub fn load_seed_artifacts(run: &Path, seed: u64) -> Result<TrainState> {
    let dir = seed_dir(run, seed);
    let config: TrainConfig = read_json(&dir.join("config.json"))?;
    let weights: FusionWeights = read_json(&dir.join("fusion.json"))?;
    let centers: ClassCenters = read_json(&dir.join("centers.json"))?;
    let mut nets = Vec::with_capacity(centers.num_views());
    for v in 0..centers.num_views() {
        let path = dir.join(format!("view-{v}.bin"));
        let net = MlpParams::load(&path)
            .with_context(|| format!("reading checkpoint {}", path.display()))?;
        nets.push(net);
    }
    let adam = AdamState::new(&nets, nets.len());
    let epoch = config.epochs;
    Ok(TrainState {
        nets,
        weights,
        adam,
        epoch,
        centers,
        config,
    })
}

/// One row per epoch: the λ in effect, the batch-averaged loss breakdown
/// (view columns joined by `;`), and train/validation accuracy.
pub fn write_epochs_csv(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut out =
        String::from("epoch,lambda,beta,ece_fused,kl_fused,view_acc,total,train_acc,val_acc\n");
    for r in records {
        let view_acc = r
            .loss
            .view_acc
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let val = r.val_accuracy.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.lambda,
            r.loss.beta,
            r.loss.ece_fused,
            r.loss.kl_fused,
            view_acc,
            r.loss.total,
            r.train_accuracy,
            val,
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
