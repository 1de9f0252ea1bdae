//! Class-presence vectors: per config and class, the sum of the winning
//! softmax confidences of the patches predicted as that class.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::neuralnet::{Network, Workspace};
use crate::patching::{sample_patches, validate_configs, PatchConfig};
use crate::util::argmax;
use crate::{Error, Result};

/// Patches whose winning softmax value reaches this are counted as carrying
/// a class-specific pattern.
pub const CLASS_SPECIFIC_CONFIDENCE: f64 = 0.9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetadataOptions {
    /// Sum all config blocks into a single block.
    pub collapse: bool,
    /// Divide each block by its config's patch count.
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPresenceVector {
    pub sample_id: usize,
    pub label: usize,
    /// One `class_count`-long block per config (a single one when collapsed).
    pub blocks: Vec<Vec<f64>>,
    /// Argmax wins per block and class.
    pub counts: Vec<Vec<u32>>,
    /// Argmax wins per class over all configs, counting only patches whose
    /// confidence reaches [`CLASS_SPECIFIC_CONFIDENCE`].
    pub confident: Vec<u32>,
}

impl ClassPresenceVector {
    pub fn class_count(&self) -> usize {
        self.blocks.first().map_or(0, Vec::len)
    }

    /// Blocks concatenated in config order.
    pub fn features(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Confidence sums over all blocks, per class.
    pub fn class_totals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.class_count()];
        for b in &self.blocks {
            for (o, v) in out.iter_mut().zip(b) {
                *o += v;
            }
        }
        out
    }

    /// Argmax wins over all blocks, per class.
    pub fn win_counts(&self) -> Vec<u32> {
        let mut out = vec![0; self.class_count()];
        for b in &self.counts {
            for (o, v) in out.iter_mut().zip(b) {
                *o += v;
            }
        }
        out
    }
}

/// Builds the vector of one sample from `(config_index, softmax)` pairs.
///
/// Ties in the argmax go to the lowest class index. Contributions are summed
/// in sorted order so the result does not depend on patch order at all.
pub fn extract<S: AsRef<[f64]>>(
    sample_id: usize,
    label: usize,
    predictions: &[(usize, S)],
    config_count: usize,
    options: MetadataOptions,
) -> Result<ClassPresenceVector> {
    let Some((_, first)) = predictions.first() else {
        return Err(Error::Validation(format!(
            "sample {sample_id} has no patch predictions"
        )));
    };
    let class_count = first.as_ref().len();
    if class_count == 0 {
        return Err(Error::Validation("empty softmax vector".into()));
    }
    let mut contributions = vec![vec![Vec::new(); class_count]; config_count];
    let mut counts = vec![vec![0u32; class_count]; config_count];
    let mut confident = vec![0u32; class_count];
    for (k, probs) in predictions {
        let probs = probs.as_ref();
        if probs.len() != class_count {
            return Err(Error::dimension(class_count, probs.len()));
        }
        if *k >= config_count {
            return Err(Error::Index {
                index: *k,
                limit: config_count,
            });
        }
        let c = argmax(probs);
        contributions[*k][c].push(probs[c]);
        counts[*k][c] += 1;
        if probs[c] >= CLASS_SPECIFIC_CONFIDENCE {
            confident[c] += 1;
        }
    }
    let mut blocks: Vec<Vec<f64>> = contributions
        .into_iter()
        .map(|block| {
            block
                .into_iter()
                .map(|mut values| {
                    values.sort_by(f64::total_cmp);
                    values.into_iter().fold(0.0, |acc, v| acc + v)
                })
                .collect()
        })
        .collect();
    if options.normalize {
        for (b, n) in blocks.iter_mut().zip(&counts) {
            let total: u32 = n.iter().sum();
            if total > 0 {
                for v in b.iter_mut() {
                    *v /= total as f64;
                }
            }
        }
    }
    let (blocks, counts) = if options.collapse {
        let mut sum = vec![0.0; class_count];
        let mut cnt = vec![0u32; class_count];
        for (b, n) in blocks.iter().zip(&counts) {
            for c in 0..class_count {
                sum[c] += b[c];
                cnt[c] += n[c];
            }
        }
        (vec![sum], vec![cnt])
    } else {
        (blocks, counts)
    };
    Ok(ClassPresenceVector {
        sample_id,
        label,
        blocks,
        counts,
        confident,
    })
}

/// Patch predictions of one sample, in config then patch order.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePredictions {
    pub sample_id: usize,
    pub label: usize,
    pub predictions: Vec<(usize, Vec<f64>)>,
}

/// Runs the network over every patch of every sample.
pub fn predict_dataset(net: &Network, dataset: &Dataset, configs: &[PatchConfig]) -> Result<Vec<SamplePredictions>> {
    validate_configs(configs, dataset.length())?;
    let mut ws = Workspace::new(net);
    dataset
        .samples
        .iter()
        .map(|s| {
            let patches = sample_patches(s, configs)?;
            let predictions = patches
                .iter()
                .map(|p| {
                    net.check_input(p.channels, p.length)?;
                    net.forward_into(&p.values, &mut ws);
                    Ok((p.config_index, ws.probs().to_vec()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SamplePredictions {
                sample_id: s.id,
                label: s.label,
                predictions,
            })
        })
        .collect()
}

/// One class-presence vector per sample from stored predictions.
pub fn vectors_from_predictions(
    predictions: &[SamplePredictions],
    config_count: usize,
    options: MetadataOptions,
) -> Result<Vec<ClassPresenceVector>> {
    predictions
        .iter()
        .map(|sp| extract(sp.sample_id, sp.label, &sp.predictions, config_count, options))
        .collect()
}

/// Predicts all patches and distills one vector per sample.
pub fn extract_all(
    net: &Network,
    dataset: &Dataset,
    configs: &[PatchConfig],
    options: MetadataOptions,
) -> Result<Vec<ClassPresenceVector>> {
    let preds = predict_dataset(net, dataset, configs)?;
    vectors_from_predictions(&preds, configs.len(), options)
}

/// Writes `sample_id,label,features...` rows.
pub fn write_vectors(vectors: &[ClassPresenceVector], mut out: impl Write) -> Result<()> {
    for v in vectors {
        write!(out, "{},{}", v.sample_id, v.label)?;
        for f in v.features() {
            write!(out, ",{f:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
