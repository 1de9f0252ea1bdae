//! The `bench` command: a grid of patch-config sets against sample-level
//! classifiers, a whole-sample baseline, and optional transformation-flag rows.
//! Every cell stores its bundle and metrics under the bench directory.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use patchx::bundle;
use patchx::data::Dataset;
use patchx::metadata::MetadataOptions;
use patchx::patching::PatchConfig;
use patchx::pipeline::{blackbox_config, blackbox_evaluate, PatchStage, PatchX};
use patchx::shallow::{ShallowKind, ShallowSpec, TrivialMode};

use crate::config::RunConfig;
use crate::run::{timestamped_dir, write_manifest};
use crate::{create_dir, write_file, CliError, StageExt};

pub const BLACKBOX_ROW: &str = "whole-sample";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub row: String,
    pub variant: String,
    pub accuracy: Option<f64>,
    /// Full training wall-clock: network plus shallow classifier.
    pub train_seconds: Option<f64>,
    /// Full test-split inference wall-clock.
    pub inference_seconds: Option<f64>,
    /// Directory holding this cell's bundle and metrics, relative to the bench directory.
    pub run_dir: Option<String>,
    pub error: Option<String>,
}

impl BenchCell {
    fn failed(row: &str, variant: &str, error: &CliError) -> Self {
        BenchCell {
            row: row.into(),
            variant: variant.into(),
            accuracy: None,
            train_seconds: None,
            inference_seconds: None,
            run_dir: None,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub version: u32,
    pub seed: u64,
    pub grid: Vec<BenchCell>,
    pub flag_rows: Vec<BenchCell>,
}

impl BenchReport {
    pub fn cell(&self, row: &str, variant: &str) -> Option<&BenchCell> {
        self.grid
            .iter()
            .chain(&self.flag_rows)
            .find(|c| c.row == row && c.variant == variant)
    }
}

pub fn row_name(configs: &[PatchConfig]) -> String {
    configs.iter().map(ToString::to_string).collect::<Vec<_>>().join("+")
}

fn shallow_for(cfg: &RunConfig, variant: &str) -> ShallowSpec {
    match variant {
        "forest" => cfg.shallow_spec_for(ShallowKind::Forest),
        "trivial" => cfg.shallow_spec_for(ShallowKind::Trivial),
        _ => cfg.shallow_spec_for(ShallowKind::Svm),
    }
}

fn save_cell(dir: &Path, variant: &str, model: &PatchX, accuracy: f64) -> Result<(), CliError> {
    write_file(
        dir.join(format!("{variant}.pchx")),
        bundle::to_bytes(model).stage("export")?,
    )?;
    let metrics = serde_json::json!({ "variant": variant, "test_accuracy": accuracy });
    write_file(
        dir.join(format!("{variant}.json")),
        serde_json::to_vec_pretty(&metrics)?,
    )
}

/// Trains one network for `configs` and evaluates every requested
/// sample-level classifier on it. Failures are recorded per cell.
#[allow(clippy::too_many_arguments)]
pub fn run_row(
    cfg: &RunConfig,
    row: &str,
    configs: Vec<PatchConfig>,
    variants: &[String],
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    bench_dir: &Path,
) -> Vec<BenchCell> {
    let variants: Vec<&String> = variants.iter().filter(|v| v.as_str() != "blackbox").collect();
    let dir_name = row.replace('+', "_");
    let started = Instant::now();
    let prepared = (|| -> Result<_, CliError> {
        let (stage, _) = PatchStage::fit(&cfg.stage_spec(configs), train, val).stage("network training")?;
        let network_seconds = started.elapsed().as_secs_f64();
        let preds_started = Instant::now();
        let train_preds = stage.predict_dataset(train).stage("patch prediction")?;
        create_dir(bench_dir.join(&dir_name))?;
        Ok((
            stage,
            train_preds,
            network_seconds + preds_started.elapsed().as_secs_f64(),
        ))
    })();
    let (stage, train_preds, shared_seconds) = match prepared {
        Ok(p) => p,
        Err(e) => return variants.iter().map(|v| BenchCell::failed(row, v, &e)).collect(),
    };
    variants
        .iter()
        .map(|variant| {
            let cell = (|| -> Result<BenchCell, CliError> {
                let started = Instant::now();
                let model = PatchX::assemble_from(
                    stage.clone(),
                    &train_preds,
                    cfg.metadata_options(),
                    &shallow_for(cfg, variant),
                )
                .stage("shallow training")?;
                let train_seconds = shared_seconds + started.elapsed().as_secs_f64();
                let started = Instant::now();
                let eval = model.evaluate(test).stage("evaluation")?;
                let inference_seconds = started.elapsed().as_secs_f64();
                save_cell(&bench_dir.join(&dir_name), variant, &model, eval.accuracy)?;
                Ok(BenchCell {
                    row: row.into(),
                    variant: variant.to_string(),
                    accuracy: Some(eval.accuracy),
                    train_seconds: Some(train_seconds),
                    inference_seconds: Some(inference_seconds),
                    run_dir: Some(dir_name.clone()),
                    error: None,
                })
            })();
            cell.unwrap_or_else(|e| BenchCell::failed(row, variant, &e))
        })
        .collect()
}

/// The identical network trained and evaluated on whole samples.
pub fn run_blackbox(cfg: &RunConfig, train: &Dataset, val: &Dataset, test: &Dataset, bench_dir: &Path) -> BenchCell {
    let cell = (|| -> Result<BenchCell, CliError> {
        let whole = blackbox_config(train.length()).stage("patching")?;
        let started = Instant::now();
        let (stage, _) = PatchStage::fit(&cfg.stage_spec(vec![whole]), train, val).stage("network training")?;
        let train_seconds = started.elapsed().as_secs_f64();
        let started = Instant::now();
        let eval = blackbox_evaluate(&stage, test).stage("evaluation")?;
        let inference_seconds = started.elapsed().as_secs_f64();
        // A single patch under occurrence voting reproduces the network argmax.
        let train_preds = stage.predict_dataset(train).stage("patch prediction")?;
        let model = PatchX::assemble_from(
            stage,
            &train_preds,
            MetadataOptions::default(),
            &ShallowSpec::trivial(TrivialMode::Occurrence),
        )
        .stage("export")?;
        create_dir(bench_dir.join(BLACKBOX_ROW))?;
        save_cell(&bench_dir.join(BLACKBOX_ROW), "blackbox", &model, eval.accuracy)?;
        Ok(BenchCell {
            row: BLACKBOX_ROW.into(),
            variant: "blackbox".into(),
            accuracy: Some(eval.accuracy),
            train_seconds: Some(train_seconds),
            inference_seconds: Some(inference_seconds),
            run_dir: Some(BLACKBOX_ROW.into()),
            error: None,
        })
    })();
    cell.unwrap_or_else(|e| BenchCell::failed(BLACKBOX_ROW, "blackbox", &e))
}

/// The four valid transformation rows; zero is always on.
pub const FLAG_ROWS: [(&str, bool, bool); 4] = [
    ("zero", false, false),
    ("zero+attach", true, false),
    ("zero+notemp", false, true),
    ("zero+attach+notemp", true, true),
];

pub fn run_bench_on(
    cfg: &RunConfig,
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    bench_dir: &Path,
) -> Result<BenchReport, CliError> {
    if cfg.bench.config_sets.is_empty() || cfg.bench.variants.is_empty() {
        return Err(CliError::Config("bench grid is empty".into()));
    }
    let mut grid = Vec::new();
    for set in &cfg.bench.config_sets {
        let configs = cfg.configs_from(set, cfg.patching.attach, cfg.patching.notemp)?;
        let row = row_name(&configs);
        grid.extend(run_row(
            cfg,
            &row,
            configs,
            &cfg.bench.variants,
            train,
            val,
            test,
            bench_dir,
        ));
    }
    if cfg.bench.variants.iter().any(|v| v == "blackbox") {
        grid.push(run_blackbox(cfg, train, val, test, bench_dir));
    }
    let mut flag_rows = Vec::new();
    if cfg.bench.flag_rows {
        let set = cfg.bench.config_sets.last().expect("non-empty");
        for (name, attach, notemp) in FLAG_ROWS {
            let configs = cfg.configs_from(set, attach, notemp)?;
            flag_rows.extend(run_row(
                cfg,
                name,
                configs,
                &["svm".to_string()],
                train,
                val,
                test,
                bench_dir,
            ));
        }
    }
    Ok(BenchReport {
        schema: "patchx/bench".into(),
        version: patchx::explain::EXPORT_VERSION,
        seed: cfg.master_seed(),
        grid,
        flag_rows,
    })
}

fn fmt_acc(c: Option<&BenchCell>) -> String {
    match c {
        Some(BenchCell { accuracy: Some(a), .. }) => format!("{:.2}", 100.0 * a),
        Some(BenchCell { error: Some(_), .. }) => "failed".into(),
        _ => "-".into(),
    }
}

fn fmt_secs(v: Option<f64>) -> String {
    v.map_or("-".into(), |s| format!("{s:.1}"))
}

/// Markdown tables: accuracy grid, timings, and flag rows.
pub fn render(report: &BenchReport) -> String {
    let mut rows: Vec<&str> = Vec::new();
    let mut variants: Vec<&str> = Vec::new();
    for c in &report.grid {
        if c.row != BLACKBOX_ROW && !rows.contains(&c.row.as_str()) {
            rows.push(&c.row);
        }
        if c.variant != "blackbox" && !variants.contains(&c.variant.as_str()) {
            variants.push(&c.variant);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "## Test accuracy (%)\n");
    let _ = writeln!(out, "| configs | {} |", variants.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(variants.len()));
    for r in &rows {
        let cells: Vec<String> = variants.iter().map(|v| fmt_acc(report.cell(r, v))).collect();
        let _ = writeln!(out, "| {r} | {} |", cells.join(" | "));
    }
    if let Some(b) = report.cell(BLACKBOX_ROW, "blackbox") {
        let _ = writeln!(out, "\nWhole-sample baseline: {}", fmt_acc(Some(b)));
    }

    let _ = writeln!(out, "\n## Wall-clock seconds (T = training, I = test inference)\n");
    let _ = writeln!(out, "| configs | variant | T | I |");
    let _ = writeln!(out, "|---|---|---|---|");
    for c in &report.grid {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            c.row,
            c.variant,
            fmt_secs(c.train_seconds),
            fmt_secs(c.inference_seconds)
        );
    }

    if !report.flag_rows.is_empty() {
        let _ = writeln!(out, "\n## Transformation flags (svm, %)\n");
        let _ = writeln!(out, "| flags | accuracy |");
        let _ = writeln!(out, "|---|---|");
        for c in &report.flag_rows {
            let _ = writeln!(out, "| {} | {} |", c.row, fmt_acc(Some(c)));
        }
    }
    let failures: Vec<&BenchCell> = report
        .grid
        .iter()
        .chain(&report.flag_rows)
        .filter(|c| c.error.is_some())
        .collect();
    if !failures.is_empty() {
        let _ = writeln!(out, "\n## Failed cells\n");
        for c in failures {
            let _ = writeln!(out, "- {} / {}: {}", c.row, c.variant, c.error.as_deref().unwrap_or(""));
        }
    }
    out
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<(std::path::PathBuf, BenchReport), CliError> {
    let (train, val, test) = cfg.datasets()?;
    let dir = timestamped_dir(&cfg.output_dir, "bench", cfg.master_seed())?;
    write_file(dir.join(crate::run::CONFIG_FILE), cfg.to_toml()?)?;
    let report = run_bench_on(cfg, &train, &val, &test, &dir)?;
    write_file(dir.join("bench.json"), serde_json::to_vec_pretty(&report)?)?;
    write_file(dir.join("bench.md"), render(&report))?;
    let mut files = vec![
        crate::run::CONFIG_FILE.to_string(),
        "bench.json".into(),
        "bench.md".into(),
    ];
    files.extend(
        report
            .grid
            .iter()
            .chain(&report.flag_rows)
            .filter_map(|c| c.run_dir.as_ref().map(|d| format!("{d}/{}.pchx", c.variant))),
    );
    write_manifest(&dir, "bench", cfg.master_seed(), files)?;
    Ok((dir, report))
}
