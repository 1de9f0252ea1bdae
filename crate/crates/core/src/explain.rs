//! Patch-level explanations: per-patch records and overlays, confidence
//! histograms, class-boundary probes and mislabel reports.
//!
//! Structured exports carry a `schema` name and a `version`; field names
//! within a version never change.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{AnomalyRule, Dataset, TimeSeriesSample};
use crate::metadata::SamplePredictions;
use crate::patching::enumerate_patches;
use crate::pipeline::PatchX;
use crate::util::argmax;
use crate::{Error, Result};

pub const EXPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchCategory {
    /// High confidence: a pattern seen in one class only.
    ClassSpecific,
    /// Medium confidence: a pattern seen in several classes.
    Shared,
    /// Confidence close to uniform.
    Unrelated,
}

/// Confidence tiers used to label patches. Reporting only; they never feed
/// back into a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CategoryThresholds {
    pub class_specific: f64,
    /// A patch is unrelated when its confidence is at most `1/C` plus this.
    pub unrelated_margin: f64,
}

impl Default for CategoryThresholds {
    fn default() -> Self {
        CategoryThresholds {
            class_specific: crate::metadata::CLASS_SPECIFIC_CONFIDENCE,
            unrelated_margin: 0.1,
        }
    }
}

impl CategoryThresholds {
    pub fn categorize(&self, confidence: f64, class_count: usize) -> PatchCategory {
        if confidence >= self.class_specific {
            PatchCategory::ClassSpecific
        } else if confidence <= 1.0 / class_count as f64 + self.unrelated_margin {
            PatchCategory::Unrelated
        } else {
            PatchCategory::Shared
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub sample_id: usize,
    pub config_index: usize,
    pub patch_index: usize,
    pub start: usize,
    pub end: usize,
    pub predicted_class: usize,
    pub confidence: f64,
    pub softmax: Vec<f64>,
    pub category: PatchCategory,
}

impl ExplanationRecord {
    pub fn covers(&self, t: usize) -> bool {
        (self.start..self.end).contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleExplanation {
    pub sample_id: usize,
    pub label: usize,
    pub predicted: usize,
    /// Shallow classifier decision values.
    pub scores: Vec<f64>,
    pub records: Vec<ExplanationRecord>,
}

/// Attaches spans and categories to stored patch predictions.
pub fn records_from_predictions(
    model: &PatchX,
    series_length: usize,
    predictions: &SamplePredictions,
    thresholds: &CategoryThresholds,
) -> Result<Vec<ExplanationRecord>> {
    let class_count = model.class_count();
    let spans: Vec<(usize, crate::patching::PatchSpan)> = model
        .stage
        .configs
        .iter()
        .enumerate()
        .flat_map(|(k, cfg)| enumerate_patches(series_length, cfg).into_iter().map(move |s| (k, s)))
        .collect();
    if spans.len() != predictions.predictions.len() {
        return Err(Error::dimension(spans.len(), predictions.predictions.len()));
    }
    spans
        .into_iter()
        .zip(&predictions.predictions)
        .map(|((k, span), (pk, probs))| {
            if k != *pk {
                return Err(Error::Validation("patch predictions are not in config order".into()));
            }
            let c = argmax(probs);
            Ok(ExplanationRecord {
                sample_id: predictions.sample_id,
                config_index: k,
                patch_index: span.index,
                start: span.start,
                end: span.end,
                predicted_class: c,
                confidence: probs[c],
                softmax: probs.clone(),
                category: thresholds.categorize(probs[c], class_count),
            })
        })
        .collect()
}

/// One record per (config, patch) plus the sample-level prediction.
pub fn explain_sample(
    model: &PatchX,
    sample: &TimeSeriesSample,
    thresholds: &CategoryThresholds,
) -> Result<SampleExplanation> {
    let outcome = model.predict_sample(sample)?;
    let records = records_from_predictions(model, sample.length, &outcome.patches, thresholds)?;
    Ok(SampleExplanation {
        sample_id: sample.id,
        label: sample.label,
        predicted: outcome.predicted,
        scores: outcome.scores,
        records,
    })
}

pub fn explain_dataset(
    model: &PatchX,
    dataset: &Dataset,
    thresholds: &CategoryThresholds,
) -> Result<Vec<SampleExplanation>> {
    dataset
        .samples
        .iter()
        .map(|s| explain_sample(model, s, thresholds))
        .collect()
}

/// Overlay plot data: one row per patch with its span, class and an opacity
/// in `[0, 1]` that rescales confidence from `[1/C, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub config_index: usize,
    pub patch_index: usize,
    pub start: usize,
    pub end: usize,
    pub class: usize,
    pub alpha: f64,
}

pub fn overlay(explanation: &SampleExplanation, class_count: usize) -> Vec<OverlayRow> {
    let floor = 1.0 / class_count as f64;
    explanation
        .records
        .iter()
        .map(|r| OverlayRow {
            config_index: r.config_index,
            patch_index: r.patch_index,
            start: r.start,
            end: r.end,
            class: r.predicted_class,
            alpha: ((r.confidence - floor) / (1.0 - floor)).clamp(0.0, 1.0),
        })
        .collect()
}

pub const OVERLAY_HEADER: &str = "config_index,patch_index,start,end,class,alpha";

pub fn write_overlay(rows: &[OverlayRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{OVERLAY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:?}",
            r.config_index, r.patch_index, r.start, r.end, r.class, r.alpha
        )?;
    }
    Ok(())
}

/// Writes one JSON object per record, fields in declaration order.
pub fn write_records(records: &[ExplanationRecord], mut out: impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        writeln!(out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Confidence histogram

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub class_count: usize,
    pub bin_width: f64,
    /// `bins + 1` edges from `1/C` up to 1; the last bin is closed.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `per_class[c][b]`: patches predicted as `c` in bin `b`.
    pub per_class: Vec<Vec<usize>>,
    pub total: usize,
}

impl HistogramReport {
    pub fn new(class_count: usize, bin_width: f64) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Config("histogram needs at least 2 classes".into()));
        }
        if !(bin_width > 0.0 && bin_width < 1.0) {
            return Err(Error::Config(format!("bin width must be in (0, 1), got {bin_width}")));
        }
        let lo = 1.0 / class_count as f64;
        let bins = (((1.0 - lo) / bin_width) - 1e-9).ceil().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * bin_width).collect();
        edges.push(1.0);
        Ok(HistogramReport {
            class_count,
            bin_width,
            edges,
            counts: vec![0; bins],
            per_class: vec![vec![0; bins]; class_count],
            total: 0,
        })
    }

    /// Bin of a confidence; values below `1/C` or above 1 (rounding only)
    /// are clamped into the outer bins.
    pub fn bin_of(&self, confidence: f64) -> usize {
        let bins = self.counts.len();
        let mut b = ((confidence - self.edges[0]) / self.bin_width).floor().max(0.0) as usize;
        b = b.min(bins - 1);
        while b + 1 < bins && confidence >= self.edges[b + 1] {
            b += 1;
        }
        while b > 0 && confidence < self.edges[b] {
            b -= 1;
        }
        b
    }

    pub fn add(&mut self, confidence: f64, class: usize) {
        let b = self.bin_of(confidence);
        self.counts[b] += 1;
        self.per_class[class][b] += 1;
        self.total += 1;
    }
}

pub fn histogram_from_predictions(
    predictions: &[SamplePredictions],
    class_count: usize,
    bin_width: f64,
) -> Result<HistogramReport> {
    let mut report = HistogramReport::new(class_count, bin_width)?;
    for sp in predictions {
        for (_, probs) in &sp.predictions {
            let c = argmax(probs);
            report.add(probs[c], c);
        }
    }
    Ok(report)
}

/// Histogram of the winning softmax value of every patch in the dataset.
pub fn confidence_histogram(model: &PatchX, dataset: &Dataset, bin_width: f64) -> Result<HistogramReport> {
    if dataset.is_empty() {
        return Err(Error::Validation("histogram needs a non-empty dataset".into()));
    }
    histogram_from_predictions(&model.stage.predict_dataset(dataset)?, model.class_count(), bin_width)
}

// ---------------------------------------------------------------------------
// Boundary probe

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStep {
    pub factor: f64,
    pub records: Vec<ExplanationRecord>,
    pub sample_prediction: usize,
    /// Label of the scaled series under the generator's rule.
    pub ground_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProbeResult {
    pub sample_id: usize,
    pub channel: usize,
    pub position: usize,
    pub steps: Vec<ProbeStep>,
    /// First factor whose ground truth differs from that of the first factor.
    pub flip_factor: Option<f64>,
    /// Number of ground-truth changes between consecutive factors.
    pub flips: usize,
    /// First factor whose sample prediction differs from that of the first factor.
    pub prediction_flip_factor: Option<f64>,
    /// Per patch covering the position: whether the confidence for
    /// `target_class` never decreases along the factors. Reported, not enforced.
    pub monotone: Vec<PatchMonotonicity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchMonotonicity {
    pub config_index: usize,
    pub patch_index: usize,
    pub target_class: usize,
    pub non_decreasing: bool,
}

/// Multiplies the raw value at `(channel, position)` by each factor, then
/// records ground truth and the pipeline's patch and sample predictions.
pub fn boundary_probe(
    model: &PatchX,
    sample: &TimeSeriesSample,
    channel: usize,
    position: usize,
    factors: &[f64],
    rule: &AnomalyRule,
    thresholds: &CategoryThresholds,
) -> Result<BoundaryProbeResult> {
    if channel >= sample.channels {
        return Err(Error::Index {
            index: channel,
            limit: sample.channels,
        });
    }
    if position >= sample.length {
        return Err(Error::Index {
            index: position,
            limit: sample.length,
        });
    }
    if factors.is_empty() || factors.iter().any(|f| !f.is_finite()) || factors.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation(
            "probe factors must be finite and strictly increasing".into(),
        ));
    }
    let base = sample.channel(channel)[position];
    let steps = factors
        .iter()
        .map(|&factor| {
            let mut probed = sample.clone();
            probed.channel_mut(channel)[position] = base * factor;
            let ground_truth = rule.label(&probed);
            probed.label = ground_truth;
            let e = explain_sample(model, &probed, thresholds)?;
            Ok(ProbeStep {
                factor,
                records: e.records,
                sample_prediction: e.predicted,
                ground_truth,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let first_change = |key: &dyn Fn(&ProbeStep) -> usize| {
        let k0 = key(&steps[0]);
        steps.iter().find(|s| key(s) != k0).map(|s| s.factor)
    };
    let flip_factor = first_change(&|s| s.ground_truth);
    let prediction_flip_factor = first_change(&|s| s.sample_prediction);
    let flips = steps
        .windows(2)
        .filter(|w| w[0].ground_truth != w[1].ground_truth)
        .count();

    let target_class = 1.min(model.class_count() - 1);
    let monotone = steps[0]
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.covers(position))
        .map(|(i, r)| PatchMonotonicity {
            config_index: r.config_index,
            patch_index: r.patch_index,
            target_class,
            non_decreasing: steps
                .windows(2)
                .all(|w| w[1].records[i].softmax[target_class] >= w[0].records[i].softmax[target_class]),
        })
        .collect();

    Ok(BoundaryProbeResult {
        sample_id: sample.id,
        channel,
        position,
        steps,
        flip_factor,
        flips,
        prediction_flip_factor,
        monotone,
    })
}

// ---------------------------------------------------------------------------
// Mislabel report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MislabelEntry {
    pub sample_id: usize,
    pub true_label: usize,
    pub predicted: usize,
    /// Winning decision value minus the runner-up.
    pub margin: f64,
    pub records: Vec<ExplanationRecord>,
}

/// Every misclassified sample with its patch records, most confidently wrong
/// first (margin descending, then sample id).
pub fn mislabel_report(
    model: &PatchX,
    dataset: &Dataset,
    thresholds: &CategoryThresholds,
) -> Result<Vec<MislabelEntry>> {
    let mut entries = Vec::new();
    for s in &dataset.samples {
        let e = explain_sample(model, s, thresholds)?;
        if e.predicted != s.label {
            entries.push(MislabelEntry {
                sample_id: s.id,
                true_label: s.label,
                predicted: e.predicted,
                margin: margin(&e.scores),
                records: e.records,
            });
        }
    }
    entries.sort_by(|a, b| b.margin.total_cmp(&a.margin).then(a.sample_id.cmp(&b.sample_id)));
    Ok(entries)
}

fn margin(scores: &[f64]) -> f64 {
    let best = argmax(scores);
    let other = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    scores[best] - other
}

/// Wraps a report as `{"schema": name, "version": EXPORT_VERSION, "data": ...}`.
pub fn write_report<T: Serialize>(schema: &str, data: &T, out: impl Write) -> Result<()> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        schema: &'a str,
        version: u32,
        data: &'a T,
    }
    serde_json::to_writer_pretty(
        out,
        &Envelope {
            schema,
            version: EXPORT_VERSION,
            data,
        },
    )
    .map_err(std::io::Error::from)?;
    Ok(())
}
