//! The `run` command: train both stages, evaluate, persist everything.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use patchx::bundle;
use patchx::data::Dataset;
use patchx::metadata::{write_vectors, ClassPresenceVector};
use patchx::neuralnet::TrainLog;
use patchx::pipeline::{PatchStage, PatchX};
use patchx::shallow::Evaluation;

use crate::config::RunConfig;
use crate::{create_dir, write_file, CliError, StageExt};

pub const METRICS_FILE: &str = "metrics.json";
pub const TIMING_FILE: &str = "timing.json";
pub const BUNDLE_FILE: &str = "model.pchx";
pub const CONFIG_FILE: &str = "config.resolved.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAIN_VECTORS_FILE: &str = "vectors_train.csv";
pub const TEST_VECTORS_FILE: &str = "vectors_test.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Everything measured by a run except wall-clock time, so two runs with the
/// same configuration produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub schema: String,
    pub version: u32,
    pub seed: u64,
    pub configs: Vec<String>,
    pub shallow: String,
    pub class_count: usize,
    pub sizes: SplitSizes,
    pub train_log: TrainLog,
    pub patch_accuracy_test: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Network plus shallow-classifier training.
    pub train_seconds: f64,
    pub network_seconds: f64,
    pub shallow_seconds: f64,
    /// Full test-split inference.
    pub inference_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub created_at: String,
    pub seed: u64,
    pub files: Vec<String>,
}

pub struct RunArtifacts {
    pub model: PatchX,
    pub metrics: RunMetrics,
    pub timing: Timing,
    pub train_vectors: Vec<ClassPresenceVector>,
    pub test_vectors: Vec<ClassPresenceVector>,
}

/// Trains and evaluates on the given splits.
pub fn execute_on(cfg: &RunConfig, train: &Dataset, val: &Dataset, test: &Dataset) -> Result<RunArtifacts, CliError> {
    let configs = cfg.patch_configs()?;
    let config_names = configs.iter().map(ToString::to_string).collect();
    let spec = cfg.stage_spec(configs);

    let started = Instant::now();
    let (stage, train_log) = PatchStage::fit(&spec, train, val).stage("network training")?;
    let network_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let train_preds = stage.predict_dataset(train).stage("patch prediction")?;
    let model = PatchX::assemble_from(stage, &train_preds, cfg.metadata_options(), &cfg.shallow_spec())
        .stage("shallow training")?;
    let shallow_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let test_preds = model.stage.predict_dataset(test).stage("patch prediction")?;
    let test_eval = model.evaluate_from(&test_preds, test.class_count).stage("evaluation")?;
    let inference_seconds = started.elapsed().as_secs_f64();

    let train_eval = model
        .evaluate_from(&train_preds, train.class_count)
        .stage("evaluation")?;
    let val_eval = model.evaluate(val).stage("evaluation")?;
    let train_vectors = model.stage.vectors(&train_preds, model.metadata).stage("metadata")?;
    let test_vectors = model.stage.vectors(&test_preds, model.metadata).stage("metadata")?;

    let metrics = RunMetrics {
        schema: "patchx/run-metrics".into(),
        version: patchx::explain::EXPORT_VERSION,
        seed: cfg.master_seed(),
        configs: config_names,
        shallow: format!("{:?}", model.shallow.kind()).to_lowercase(),
        class_count: train.class_count,
        sizes: SplitSizes {
            train: train.len(),
            val: val.len(),
            test: test.len(),
        },
        train_log,
        patch_accuracy_test: PatchStage::patch_accuracy(&test_preds),
        train_accuracy: train_eval.accuracy,
        val_accuracy: val_eval.accuracy,
        test: test_eval,
    };
    Ok(RunArtifacts {
        model,
        metrics,
        timing: Timing {
            train_seconds: network_seconds + shallow_seconds,
            network_seconds,
            shallow_seconds,
            inference_seconds,
        },
        train_vectors,
        test_vectors,
    })
}

pub fn execute(cfg: &RunConfig) -> Result<RunArtifacts, CliError> {
    let (train, val, test) = cfg.datasets()?;
    execute_on(cfg, &train, &val, &test)
}

/// Writes the run outputs (no manifest) into an existing directory.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, art: &RunArtifacts) -> Result<Vec<String>, CliError> {
    write_file(dir.join(CONFIG_FILE), cfg.to_toml()?)?;
    let bytes = bundle::to_bytes(&art.model).stage("export")?;
    write_file(dir.join(BUNDLE_FILE), bytes)?;
    write_file(dir.join(METRICS_FILE), serde_json::to_vec_pretty(&art.metrics)?)?;
    write_file(dir.join(TIMING_FILE), serde_json::to_vec_pretty(&art.timing)?)?;
    for (name, vectors) in [
        (TRAIN_VECTORS_FILE, &art.train_vectors),
        (TEST_VECTORS_FILE, &art.test_vectors),
    ] {
        let mut buf = Vec::new();
        write_vectors(vectors, &mut buf).stage("export")?;
        write_file(dir.join(name), buf)?;
    }
    Ok([
        CONFIG_FILE,
        BUNDLE_FILE,
        METRICS_FILE,
        TIMING_FILE,
        TRAIN_VECTORS_FILE,
        TEST_VECTORS_FILE,
    ]
    .map(String::from)
    .to_vec())
}

/// A fresh directory `<parent>/<prefix>-<UTC timestamp>-s<seed>[-n]`.
pub fn timestamped_dir(parent: &Path, prefix: &str, seed: u64) -> Result<PathBuf, CliError> {
    create_dir(parent)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{prefix}-{stamp}-s{seed}");
    let mut n = 0;
    loop {
        let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let dir = parent.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
            Err(source) => return Err(CliError::Io { path: dir, source }),
        }
    }
}

pub fn write_manifest(dir: &Path, command: &str, seed: u64, files: Vec<String>) -> Result<(), CliError> {
    let manifest = Manifest {
        tool: "patchx".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        created_at: chrono::Utc::now().to_rfc3339(),
        seed,
        files,
    };
    write_file(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)
}

/// Runs the pipeline and returns the new run directory.
pub fn cmd_run(cfg: &RunConfig) -> Result<(PathBuf, RunArtifacts), CliError> {
    let art = execute(cfg)?;
    let dir = timestamped_dir(&cfg.output_dir, "run", cfg.master_seed())?;
    let files = write_outputs(&dir, cfg, &art)?;
    write_manifest(&dir, "run", cfg.master_seed(), files)?;
    Ok((dir, art))
}
