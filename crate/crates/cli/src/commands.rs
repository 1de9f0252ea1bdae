//! `generate`, `explain`, `probe`, `histogram` and `gradcheck`.

use std::path::{Path, PathBuf};

use patchx::bundle::load_bundle;
use patchx::data::{
    generate_anomaly_with_peaks, generate_pulse_pairs, load_dataset, save_dataset, AnomalyRule, Dataset,
};
use patchx::explain::{
    boundary_probe, confidence_histogram, explain_sample, mislabel_report, overlay, write_overlay, write_records,
    write_report, CategoryThresholds,
};
use patchx::neuralnet::gradcheck::{check_layer, check_network, GradCheckConfig, GradCheckReport};
use patchx::neuralnet::layers::Layer;
use patchx::neuralnet::{Activation, Network, NetworkSpec};
use patchx::pipeline::PatchX;

use crate::config::{DataSource, RunConfig};
use crate::{create_dir, write_file, CliError, StageExt};

/// Writes `train.csv`, `val.csv` and `test.csv` (plus peak positions for
/// the anomaly generator) into `out`.
pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    create_dir(out)?;
    let schema = cfg.schema();
    let names = ["train", "val", "test"];
    let mut written = Vec::new();
    match cfg.data.source {
        DataSource::Anomaly => {
            let splits = generate_anomaly_with_peaks(&cfg.data.anomaly).stage("generation")?;
            for (name, split) in names.iter().zip(splits) {
                let path = out.join(format!("{name}.csv"));
                save_dataset(&split.dataset, &path, &schema).stage("export")?;
                let peaks = out.join(format!("{name}_peaks.json"));
                write_file(&peaks, serde_json::to_vec(&split.peaks)?)?;
                written.extend([path, peaks]);
            }
        }
        DataSource::PulsePair => {
            let splits = generate_pulse_pairs(&cfg.data.pulse).stage("generation")?;
            for (name, (dataset, _)) in names.iter().zip(splits) {
                let path = out.join(format!("{name}.csv"));
                save_dataset(&dataset, &path, &schema).stage("export")?;
                written.push(path);
            }
        }
        DataSource::File => return Err(CliError::Config("generate needs a generator data source".into())),
    }
    Ok(written)
}

pub fn load_inputs(bundle: &Path, data: &Path, cfg: &RunConfig) -> Result<(PatchX, Dataset), CliError> {
    let model = load_bundle(bundle).stage("bundle loading")?;
    let dataset = load_dataset(data, &cfg.schema()).stage("data loading")?;
    Ok((model, dataset))
}

/// Per-patch records, overlays and the mislabel report for the selected
/// samples (all samples when `ids` is empty).
pub fn cmd_explain(
    model: &PatchX,
    dataset: &Dataset,
    ids: &[usize],
    thresholds: &CategoryThresholds,
    out: &Path,
) -> Result<(), CliError> {
    create_dir(out)?;
    let selected: Vec<_> = if ids.is_empty() {
        dataset.samples.iter().collect()
    } else {
        ids.iter()
            .map(|&id| {
                dataset
                    .samples
                    .iter()
                    .find(|s| s.id == id)
                    .ok_or(CliError::Core(patchx::Error::Index {
                        index: id,
                        limit: dataset.len(),
                    }))
            })
            .collect::<Result<_, _>>()?
    };
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for s in selected {
        let e = explain_sample(model, s, thresholds).stage("explanation")?;
        let mut buf = Vec::new();
        write_overlay(&overlay(&e, model.class_count()), &mut buf).stage("export")?;
        write_file(out.join(format!("overlay_{}.csv", s.id)), buf)?;
        summaries.push(serde_json::json!({
            "sample_id": e.sample_id,
            "label": e.label,
            "predicted": e.predicted,
            "scores": e.scores,
        }));
        records.extend(e.records);
    }
    let mut buf = Vec::new();
    write_records(&records, &mut buf).stage("export")?;
    write_file(out.join("records.jsonl"), buf)?;
    let mut buf = Vec::new();
    write_report("patchx/sample-predictions", &summaries, &mut buf).stage("export")?;
    write_file(out.join("samples.json"), buf)?;
    let mislabels = mislabel_report(model, dataset, thresholds).stage("explanation")?;
    let mut buf = Vec::new();
    write_report("patchx/mislabels", &mislabels, &mut buf).stage("export")?;
    write_file(out.join("mislabels.json"), buf)?;
    Ok(())
}

/// Factors `lo, ..., hi` in `steps` evenly spaced values.
pub fn factor_range(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps < 2 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(CliError::Config(
            "factor range needs lo < hi and at least 2 steps".into(),
        ));
    }
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_probe(
    model: &PatchX,
    dataset: &Dataset,
    sample_id: usize,
    channel: usize,
    position: usize,
    factors: &[f64],
    k: f64,
    out: &Path,
) -> Result<(), CliError> {
    let sample = dataset
        .samples
        .iter()
        .find(|s| s.id == sample_id)
        .ok_or(CliError::Core(patchx::Error::Index {
            index: sample_id,
            limit: dataset.len(),
        }))?;
    let result = boundary_probe(
        model,
        sample,
        channel,
        position,
        factors,
        &AnomalyRule { k },
        &CategoryThresholds::default(),
    )
    .stage("probe")?;
    let mut buf = Vec::new();
    write_report("patchx/boundary-probe", &result, &mut buf).stage("export")?;
    write_file(out, buf)
}

pub fn cmd_histogram(model: &PatchX, dataset: &Dataset, bin_width: f64, out: &Path) -> Result<(), CliError> {
    let report = confidence_histogram(model, dataset, bin_width).stage("histogram")?;
    let mut buf = Vec::new();
    write_report("patchx/confidence-histogram", &report, &mut buf).stage("export")?;
    write_file(out, buf)
}

/// Finite-difference check of every layer type and a small composite
/// network, for `seeds` seeds.
pub fn cmd_gradcheck(seeds: u64, cfg: &GradCheckConfig) -> Vec<(String, GradCheckReport)> {
    let mut reports = Vec::new();
    for seed in 0..seeds {
        for activation in [Activation::Relu, Activation::Tanh] {
            let mut spec = NetworkSpec::new(2, 9, 3, seed).with_filters(&[3, 4]);
            for b in &mut spec.blocks {
                b.activation = activation;
            }
            let net = Network::new(spec).expect("valid spec");
            let input_len = net.input_len();
            let batch: Vec<(Vec<f64>, usize)> = (0..3)
                .map(|i| {
                    let x = (0..input_len)
                        .map(|j| ((seed as f64 + 1.0) * 0.37 * (i * input_len + j) as f64).sin())
                        .collect();
                    (x, i % 3)
                })
                .collect();
            reports.push((
                format!("network/{activation:?}/seed{seed}").to_lowercase(),
                check_network(&net, &batch, cfg),
            ));
            let mut input: Vec<f64> = batch[0].0.clone();
            for layer in &net.layers {
                let name = format!("{}/seed{seed}", layer.name());
                reports.push((name, check_layer(layer, &input, seed, cfg)));
                let mut output = vec![0.0; layer.output_len()];
                layer.forward(&input, &mut output);
                input = output;
                if matches!(layer, Layer::Dense(_)) {
                    break;
                }
            }
        }
    }
    reports
}
