//! Sample-level classifiers over class-presence vectors.

pub mod forest;
pub mod svm;

use serde::{Deserialize, Serialize};

pub use forest::{FeatureSubsample, ForestParams, RandomForest};
pub use svm::{LinearSvm, SvmParams};

use crate::metadata::ClassPresenceVector;
use crate::util::argmax;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShallowKind {
    Svm,
    Forest,
    Trivial,
}

impl std::str::FromStr for ShallowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ShallowKind::Svm),
            "forest" | "rf" => Ok(ShallowKind::Forest),
            "trivial" => Ok(ShallowKind::Trivial),
            other => Err(Error::Config(format!("unknown shallow classifier {other:?}"))),
        }
    }
}

/// Voting rules that need no fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrivialMode {
    /// Most argmax wins; confidence sums break ties.
    Occurrence,
    /// Largest summed confidence.
    ConfidenceSum,
    /// Most wins among confident (class-specific) patches; plain occurrence
    /// decides when no patch is confident or the confident counts tie.
    ClassSpecific,
}

impl std::str::FromStr for TrivialMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occurrence" => Ok(TrivialMode::Occurrence),
            "confidence-sum" | "confidence_sum" => Ok(TrivialMode::ConfidenceSum),
            "class-specific" | "class_specific" => Ok(TrivialMode::ClassSpecific),
            other => Err(Error::Config(format!("unknown trivial mode {other:?}"))),
        }
    }
}

impl TrivialMode {
    pub fn scores(&self, v: &ClassPresenceVector) -> Vec<f64> {
        let totals = v.class_totals();
        // Each tie-breaking term is scaled below 1, so it only separates
        // classes that are level on the integer counts before it.
        let occurrence = || -> Vec<f64> {
            let max_total = totals.iter().copied().fold(0.0, f64::max) + 1.0;
            v.win_counts()
                .iter()
                .zip(&totals)
                .map(|(&w, &t)| w as f64 + t / max_total)
                .collect()
        };
        match self {
            TrivialMode::ConfidenceSum => totals.clone(),
            TrivialMode::Occurrence => occurrence(),
            TrivialMode::ClassSpecific => {
                let occ = occurrence();
                let max_occ = occ.iter().copied().fold(0.0, f64::max) + 1.0;
                v.confident
                    .iter()
                    .zip(&occ)
                    .map(|(&w, &o)| w as f64 + o / max_occ)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShallowSpec {
    pub kind: ShallowKind,
    pub svm: SvmParams,
    pub forest: ForestParams,
    pub trivial: TrivialMode,
    /// Standardize features with training statistics before SVM/forest.
    pub standardize: bool,
}

impl Default for ShallowSpec {
    fn default() -> Self {
        ShallowSpec {
            kind: ShallowKind::Svm,
            svm: SvmParams::default(),
            forest: ForestParams::default(),
            trivial: TrivialMode::Occurrence,
            standardize: false,
        }
    }
}

impl ShallowSpec {
    pub fn svm() -> Self {
        ShallowSpec::default()
    }

    pub fn forest() -> Self {
        ShallowSpec {
            kind: ShallowKind::Forest,
            ..Default::default()
        }
    }

    pub fn trivial(mode: TrivialMode) -> Self {
        ShallowSpec {
            kind: ShallowKind::Trivial,
            trivial: mode,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.svm.seed = seed;
        self.forest.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ShallowKind::Svm => {
                let p = &self.svm;
                if !(p.c_reg > 0.0 && p.learning_rate > 0.0) || p.epochs == 0 {
                    return Err(Error::Config(
                        "svm c_reg, learning_rate and epochs must be positive".into(),
                    ));
                }
            }
            ShallowKind::Forest => {
                let p = &self.forest;
                if p.trees == 0 || p.min_leaf == 0 || p.max_depth == Some(0) {
                    return Err(Error::Config(
                        "forest trees, min_leaf and max_depth must be positive".into(),
                    ));
                }
            }
            ShallowKind::Trivial => {}
        }
        Ok(())
    }
}

/// Per-feature affine rescaling fitted on training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    fn fit(features: &[Vec<f64>]) -> Self {
        let dim = features[0].len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for f in features {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; dim];
        for f in features {
            for ((s, v), m) in std.iter_mut().zip(f).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt().max(1e-8);
        }
        Standardizer { mean, std }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Svm(LinearSvm),
    Forest(RandomForest),
    Trivial(TrivialMode),
}

/// A fitted sample-level classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShallowModel {
    pub classifier: Classifier,
    pub class_count: usize,
    /// Feature dimension seen at fit time.
    pub dim: usize,
    pub standardizer: Option<Standardizer>,
}

fn check_vectors(vectors: &[ClassPresenceVector]) -> Result<(usize, usize)> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Validation("no class-presence vectors".into()))?;
    let (dim, classes) = (first.dim(), first.class_count());
    for v in vectors {
        if v.dim() != dim || v.class_count() != classes {
            return Err(Error::dimension(dim, v.dim()));
        }
    }
    Ok((dim, classes))
}

pub fn fit(spec: &ShallowSpec, train: &[ClassPresenceVector]) -> Result<ShallowModel> {
    spec.validate()?;
    let (dim, class_count) = check_vectors(train)?;
    if spec.kind == ShallowKind::Trivial {
        return Ok(ShallowModel {
            classifier: Classifier::Trivial(spec.trivial),
            class_count,
            dim,
            standardizer: None,
        });
    }
    let labels: Vec<usize> = train.iter().map(|v| v.label).collect();
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::Index {
            index: bad,
            limit: class_count,
        });
    }
    let mut present = labels.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Validation(
            "shallow classifier needs at least two classes in training data".into(),
        ));
    }
    let raw: Vec<Vec<f64>> = train.iter().map(|v| v.features()).collect();
    let standardizer = spec.standardize.then(|| Standardizer::fit(&raw));
    let features: Vec<Vec<f64>> = match &standardizer {
        Some(s) => raw.iter().map(|x| s.apply(x)).collect(),
        None => raw,
    };
    let classifier = match spec.kind {
        ShallowKind::Svm => Classifier::Svm(LinearSvm::fit(&features, &labels, class_count, &spec.svm)),
        ShallowKind::Forest => Classifier::Forest(RandomForest::fit(&features, &labels, class_count, &spec.forest)),
        ShallowKind::Trivial => unreachable!(),
    };
    Ok(ShallowModel {
        classifier,
        class_count,
        dim,
        standardizer,
    })
}

impl ShallowModel {
    /// Per-class decision values; the prediction is their argmax.
    pub fn scores(&self, v: &ClassPresenceVector) -> Result<Vec<f64>> {
        if v.dim() != self.dim || v.class_count() != self.class_count {
            return Err(Error::dimension(self.dim, v.dim()));
        }
        let x = v.features();
        let x = match &self.standardizer {
            Some(s) => s.apply(&x),
            None => x,
        };
        Ok(match &self.classifier {
            Classifier::Svm(m) => m.scores(&x),
            Classifier::Forest(m) => m.scores(&x),
            Classifier::Trivial(mode) => mode.scores(v),
        })
    }

    pub fn predict(&self, v: &ClassPresenceVector) -> Result<usize> {
        Ok(argmax(&self.scores(v)?))
    }

    /// Winning score minus the best other score.
    pub fn margin(&self, v: &ClassPresenceVector) -> Result<f64> {
        let s = self.scores(v)?;
        let best = argmax(&s);
        let other = s
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best)
            .map(|(_, &x)| x)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(s[best] - other)
    }

    pub fn kind(&self) -> ShallowKind {
        match self.classifier {
            Classifier::Svm(_) => ShallowKind::Svm,
            Classifier::Forest(_) => ShallowKind::Forest,
            Classifier::Trivial(_) => ShallowKind::Trivial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub total: usize,
    pub correct: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], class_count: usize) -> Result<Self> {
        if truth.is_empty() || truth.len() != predicted.len() {
            return Err(Error::Validation(
                "evaluation needs equally many, non-zero labels and predictions".into(),
            ));
        }
        let mut confusion = vec![vec![0; class_count]; class_count];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= class_count || p >= class_count {
                return Err(Error::Index {
                    index: t.max(p),
                    limit: class_count,
                });
            }
            confusion[t][p] += 1;
        }
        let correct = (0..class_count).map(|c| confusion[c][c]).sum();
        Ok(Evaluation {
            accuracy: correct as f64 / truth.len() as f64,
            total: truth.len(),
            correct,
            confusion,
        })
    }
}

pub fn evaluate(model: &ShallowModel, vectors: &[ClassPresenceVector]) -> Result<Evaluation> {
    let predicted = vectors.iter().map(|v| model.predict(v)).collect::<Result<Vec<_>>>()?;
    let truth: Vec<usize> = vectors.iter().map(|v| v.label).collect();
    Evaluation::from_predictions(&truth, &predicted, model.class_count)
}
