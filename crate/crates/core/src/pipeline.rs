//! The full classifier: normalization, patching, the patch network, the
//! class-presence vector and the shallow sample classifier.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NormStats, TimeSeriesSample};
use crate::metadata::{self, ClassPresenceVector, MetadataOptions, SamplePredictions};
use crate::neuralnet::{self, ConvBlock, Network, NetworkSpec, TrainLog, TrainSpec, Workspace};
use crate::patching::{build_patch_dataset, sample_patches, validate_configs, PatchConfig};
use crate::shallow::{self, Evaluation, ShallowModel, ShallowSpec};
use crate::{Error, Result};

/// Everything needed to train the patch stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchStageSpec {
    pub configs: Vec<PatchConfig>,
    pub blocks: Vec<ConvBlock>,
    pub network_seed: u64,
    pub train: TrainSpec,
    /// Z-normalize channels with training statistics.
    pub normalize: bool,
}

impl PatchStageSpec {
    pub fn new(configs: Vec<PatchConfig>, train: TrainSpec) -> Self {
        PatchStageSpec {
            configs,
            blocks: NetworkSpec::default_blocks(),
            network_seed: train.seed,
            train,
            normalize: true,
        }
    }

    pub fn with_blocks(mut self, blocks: Vec<ConvBlock>) -> Self {
        self.blocks = blocks;
        self
    }

    /// The network shape implied by the configs and the data dimensions.
    pub fn network_spec(&self, channels: usize, length: usize, class_count: usize) -> Result<NetworkSpec> {
        let first = self
            .configs
            .first()
            .ok_or_else(|| Error::Config("at least one patch config is required".into()))?;
        let spec = NetworkSpec {
            input_channels: first.output_channels(channels),
            input_length: length,
            blocks: self.blocks.clone(),
            class_count,
            seed: self.network_seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Stages one and two: a trained patch network with its patch configs and
/// input normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchStage {
    pub configs: Vec<PatchConfig>,
    pub norm: NormStats,
    pub network: Network,
}

impl PatchStage {
    /// Trains the network on the pooled patches of all configs. Labels are
    /// inherited from the samples.
    pub fn fit(spec: &PatchStageSpec, train: &Dataset, val: &Dataset) -> Result<(PatchStage, TrainLog)> {
        check_compatible(train, val)?;
        validate_configs(&spec.configs, train.length())?;
        let norm = if spec.normalize {
            NormStats::fit(train)?
        } else {
            NormStats::identity(train.channels())
        };
        let net_spec = spec.network_spec(train.channels(), train.length(), train.class_count)?;
        let train_patches = build_patch_dataset(&norm.apply(train)?, &spec.configs)?;
        let val_patches = build_patch_dataset(&norm.apply(val)?, &spec.configs)?;
        let (network, log) = neuralnet::train(Network::new(net_spec)?, &train_patches, &val_patches, &spec.train)?;
        Ok((
            PatchStage {
                configs: spec.configs.clone(),
                norm,
                network,
            },
            log,
        ))
    }

    pub fn class_count(&self) -> usize {
        self.network.class_count()
    }

    pub fn check_sample(&self, sample: &TimeSeriesSample) -> Result<()> {
        if sample.channels != self.norm.channels() || sample.length != self.network.spec.input_length {
            return Err(Error::dimension(
                format!("{}x{}", self.norm.channels(), self.network.spec.input_length),
                format!("{}x{}", sample.channels, sample.length),
            ));
        }
        Ok(())
    }

    /// Softmax of every patch of one raw (unnormalized) sample, in config
    /// then patch order.
    pub fn predict_sample(&self, sample: &TimeSeriesSample) -> Result<SamplePredictions> {
        self.predict_with(sample, &mut Workspace::new(&self.network))
    }

    fn predict_with(&self, sample: &TimeSeriesSample, ws: &mut Workspace) -> Result<SamplePredictions> {
        self.check_sample(sample)?;
        let normalized = self.norm.apply_sample(sample)?;
        let patches = sample_patches(&normalized, &self.configs)?;
        let predictions = patches
            .iter()
            .map(|p| {
                self.network.check_input(p.channels, p.length)?;
                self.network.forward_into(&p.values, ws);
                Ok((p.config_index, ws.probs().to_vec()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SamplePredictions {
            sample_id: sample.id,
            label: sample.label,
            predictions,
        })
    }

    /// Patch softmaxes for every sample of a raw dataset.
    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<SamplePredictions>> {
        let mut ws = Workspace::new(&self.network);
        dataset.samples.iter().map(|s| self.predict_with(s, &mut ws)).collect()
    }

    /// Fraction of patches whose argmax equals the inherited sample label.
    pub fn patch_accuracy(predictions: &[SamplePredictions]) -> f64 {
        let (mut correct, mut total) = (0usize, 0usize);
        for sp in predictions {
            for (_, probs) in &sp.predictions {
                total += 1;
                correct += (crate::util::argmax(probs) == sp.label) as usize;
            }
        }
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }

    pub fn vectors(
        &self,
        predictions: &[SamplePredictions],
        options: MetadataOptions,
    ) -> Result<Vec<ClassPresenceVector>> {
        metadata::vectors_from_predictions(predictions, self.configs.len(), options)
    }
}

fn check_compatible(train: &Dataset, other: &Dataset) -> Result<()> {
    if train.channels() != other.channels() || train.length() != other.length() {
        return Err(Error::dimension(
            format!("{}x{}", train.channels(), train.length()),
            format!("{}x{}", other.channels(), other.length()),
        ));
    }
    if train.class_count != other.class_count {
        return Err(Error::Validation(format!(
            "class counts differ between splits: {} vs {}",
            train.class_count, other.class_count
        )));
    }
    Ok(())
}

/// Sample-level result of the full pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub predicted: usize,
    pub scores: Vec<f64>,
    pub vector: ClassPresenceVector,
    pub patches: SamplePredictions,
}

/// The complete classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchX {
    pub stage: PatchStage,
    pub metadata: MetadataOptions,
    pub shallow: ShallowModel,
}

impl PatchX {
    /// Fits the shallow classifier on the training split's vectors.
    pub fn assemble(
        stage: PatchStage,
        train: &Dataset,
        metadata: MetadataOptions,
        shallow_spec: &ShallowSpec,
    ) -> Result<PatchX> {
        let preds = stage.predict_dataset(train)?;
        Self::assemble_from(stage, &preds, metadata, shallow_spec)
    }

    /// Like [`PatchX::assemble`] with precomputed training predictions, so
    /// several shallow classifiers can share one network pass.
    pub fn assemble_from(
        stage: PatchStage,
        train_predictions: &[SamplePredictions],
        metadata: MetadataOptions,
        shallow_spec: &ShallowSpec,
    ) -> Result<PatchX> {
        let vectors = stage.vectors(train_predictions, metadata)?;
        let shallow = shallow::fit(shallow_spec, &vectors)?;
        Ok(PatchX {
            stage,
            metadata,
            shallow,
        })
    }

    /// Trains both stages.
    pub fn fit(
        spec: &PatchStageSpec,
        metadata: MetadataOptions,
        shallow_spec: &ShallowSpec,
        train: &Dataset,
        val: &Dataset,
    ) -> Result<(PatchX, TrainLog)> {
        let (stage, log) = PatchStage::fit(spec, train, val)?;
        Ok((Self::assemble(stage, train, metadata, shallow_spec)?, log))
    }

    pub fn class_count(&self) -> usize {
        self.stage.class_count()
    }

    pub fn outcome_from(&self, patches: SamplePredictions) -> Result<SampleOutcome> {
        let vector = metadata::extract(
            patches.sample_id,
            patches.label,
            &patches.predictions,
            self.stage.configs.len(),
            self.metadata,
        )?;
        let scores = self.shallow.scores(&vector)?;
        Ok(SampleOutcome {
            predicted: crate::util::argmax(&scores),
            scores,
            vector,
            patches,
        })
    }

    pub fn predict_sample(&self, sample: &TimeSeriesSample) -> Result<SampleOutcome> {
        self.outcome_from(self.stage.predict_sample(sample)?)
    }

    pub fn predict_from(&self, predictions: &[SamplePredictions]) -> Result<Vec<usize>> {
        let vectors = self.stage.vectors(predictions, self.metadata)?;
        vectors.iter().map(|v| self.shallow.predict(v)).collect()
    }

    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        self.predict_from(&self.stage.predict_dataset(dataset)?)
    }

    pub fn evaluate(&self, dataset: &Dataset) -> Result<Evaluation> {
        let predicted = self.predict(dataset)?;
        Evaluation::from_predictions(&dataset.labels(), &predicted, dataset.class_count)
    }

    pub fn evaluate_from(&self, predictions: &[SamplePredictions], class_count: usize) -> Result<Evaluation> {
        let predicted = self.predict_from(predictions)?;
        let truth: Vec<usize> = predictions.iter().map(|p| p.label).collect();
        Evaluation::from_predictions(&truth, &predicted, class_count)
    }
}

/// The whole-sample baseline: one patch covering the full series, so the
/// network sees unpatched samples. Its prediction is the network argmax.
pub fn blackbox_config(series_length: usize) -> Result<PatchConfig> {
    PatchConfig::plain(series_length, series_length)
}

/// Network argmax accuracy on whole samples.
pub fn blackbox_evaluate(stage: &PatchStage, dataset: &Dataset) -> Result<Evaluation> {
    let whole = blackbox_config(dataset.length())?;
    if stage.configs != [whole] {
        return Err(Error::Config(
            "blackbox evaluation needs a stage trained on whole samples".into(),
        ));
    }
    let preds = stage.predict_dataset(dataset)?;
    let predicted: Vec<usize> = preds
        .iter()
        .map(|sp| crate::util::argmax(&sp.predictions[0].1))
        .collect();
    Evaluation::from_predictions(&dataset.labels(), &predicted, dataset.class_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_anomaly, AnomalyGenSpec};
    use crate::neuralnet::Activation;

    fn tiny_spec() -> (PatchStageSpec, Dataset, Dataset, Dataset) {
        let gen = AnomalyGenSpec {
            train: 200,
            val: 80,
            test: 80,
            length: 20,
            channels: 2,
            ..Default::default()
        };
        let (train, val, test) = generate_anomaly(&gen).unwrap();
        let configs = vec![PatchConfig::plain(5, 10).unwrap()];
        let spec = PatchStageSpec::new(
            configs,
            TrainSpec {
                epochs: 3,
                early_stopping_patience: 2,
                batch_size: 32,
                learning_rate: 5e-3,
                ..Default::default()
            },
        )
        .with_blocks(vec![ConvBlock {
            filters: 4,
            kernel: 3,
            activation: Activation::Relu,
        }]);
        (spec, train, val, test)
    }

    #[test]
    fn dataset_prediction_matches_per_sample_prediction() {
        let (spec, train, val, test) = tiny_spec();
        let (model, log) = PatchX::fit(&spec, MetadataOptions::default(), &ShallowSpec::svm(), &train, &val).unwrap();
        assert!(!log.epochs.is_empty());
        let batch = model.predict(&test).unwrap();
        for (s, &p) in test.samples.iter().zip(&batch) {
            assert_eq!(model.predict_sample(s).unwrap().predicted, p);
        }
        let eval = model.evaluate(&test).unwrap();
        assert_eq!(eval.total, test.len());
    }

    #[test]
    fn mismatched_sample_is_rejected() {
        let (spec, train, val, _) = tiny_spec();
        let (stage, _) = PatchStage::fit(&spec, &train, &val).unwrap();
        let bad = TimeSeriesSample::new(0, 1, 20, vec![0.0; 20], 0).unwrap();
        assert!(matches!(stage.predict_sample(&bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn blackbox_needs_whole_sample_stage() {
        let (mut spec, train, val, test) = tiny_spec();
        let (stage, _) = PatchStage::fit(&spec, &train, &val).unwrap();
        assert!(blackbox_evaluate(&stage, &test).is_err());
        spec.configs = vec![blackbox_config(train.length()).unwrap()];
        let (stage, _) = PatchStage::fit(&spec, &train, &val).unwrap();
        let eval = blackbox_evaluate(&stage, &test).unwrap();
        assert_eq!(eval.total, test.len());
    }
}
