//! Labeled multichannel time-series datasets: ingestion, synthetic
//! generators, z-normalization and stratified splitting.
//!
//! Dataset files are delimited text. The first line is a header
//! `channels,length,class_count`; every following line holds one sample as
//! `channels * length` values in channel-major order, with the label either
//! trailing (default) or leading.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::util::{compensated_sum, derive_seed, rng};
use crate::{Error, Result};

/// Lower clamp for per-channel standard deviations during normalization.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// One multichannel series. `values` is channel-major: channel `c` occupies
/// `values[c * length..(c + 1) * length]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSample {
    pub id: usize,
    pub channels: usize,
    pub length: usize,
    pub values: Vec<f64>,
    pub label: usize,
}

impl TimeSeriesSample {
    pub fn new(id: usize, channels: usize, length: usize, values: Vec<f64>, label: usize) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::Validation(
                "sample must have at least one channel and one time-step".into(),
            ));
        }
        if values.len() != channels * length {
            return Err(Error::dimension(channels * length, values.len()));
        }
        Ok(TimeSeriesSample {
            id,
            channels,
            length,
            values,
            label,
        })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.length..(c + 1) * self.length]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let len = self.length;
        &mut self.values[c * len..(c + 1) * len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<TimeSeriesSample>,
    pub class_count: usize,
    pub split: Split,
    channels: usize,
    length: usize,
}

impl Dataset {
    /// Builds a dataset and checks its invariants: shared shape, labels below
    /// `class_count`, finite values and unique ids.
    pub fn new(
        samples: Vec<TimeSeriesSample>,
        class_count: usize,
        channels: usize,
        length: usize,
        split: Split,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Validation(format!(
                "class_count must be at least 2, got {class_count}"
            )));
        }
        if channels == 0 || length == 0 {
            return Err(Error::Validation("channels and length must be positive".into()));
        }
        let mut seen = std::collections::HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.channels != channels || s.length != length {
                return Err(Error::dimension(
                    format!("{channels}x{length}"),
                    format!("{}x{} (sample {})", s.channels, s.length, s.id),
                ));
            }
            if s.label >= class_count {
                return Err(Error::Validation(format!(
                    "sample {} has label {} but class_count is {class_count}",
                    s.id, s.label
                )));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("sample {} contains non-finite values", s.id)));
            }
            if !seen.insert(s.id) {
                return Err(Error::Validation(format!("duplicate sample id {}", s.id)));
            }
        }
        Ok(Dataset {
            samples,
            class_count,
            split,
            channels,
            length,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    fn with_samples(&self, samples: Vec<TimeSeriesSample>, split: Split) -> Dataset {
        Dataset {
            samples,
            class_count: self.class_count,
            split,
            channels: self.channels,
            length: self.length,
        }
    }
}

// ---------------------------------------------------------------------------
// Delimited-text ingestion

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    Comma,
    Tab,
    Semicolon,
    /// Any run of ASCII whitespace.
    Whitespace,
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            Delimiter::Semicolon => line.split(';').map(str::trim).collect(),
            Delimiter::Whitespace => line.split_ascii_whitespace().collect(),
        }
    }

    fn as_char(&self) -> char {
        match self {
            Delimiter::Comma => ',',
            Delimiter::Tab => '\t',
            Delimiter::Semicolon => ';',
            Delimiter::Whitespace => ' ',
        }
    }
}

impl std::str::FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "," | "comma" => Ok(Delimiter::Comma),
            "\t" | "\\t" | "tab" => Ok(Delimiter::Tab),
            ";" | "semicolon" => Ok(Delimiter::Semicolon),
            " " | "whitespace" | "space" => Ok(Delimiter::Whitespace),
            other => Err(Error::Config(format!("unknown delimiter {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelPosition {
    First,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub delimiter: Delimiter,
    pub label_position: LabelPosition,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            delimiter: Delimiter::Comma,
            label_position: LabelPosition::Last,
        }
    }
}

/// Reads a dataset file. Sample ids follow row order starting at 0.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    read_dataset(file, path, schema)
}

/// Parses a dataset from any reader; `origin` is only used in error messages.
pub fn read_dataset(reader: impl Read, origin: &Path, schema: &Schema) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut lines = BufReader::new(reader).lines().enumerate();
    let (channels, length, class_count) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(parse_err(1, "missing header `channels,length,class_count`".into()));
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = Delimiter::Comma.split(line.trim());
        let fields = if fields.len() == 3 {
            fields
        } else {
            schema.delimiter.split(line.trim())
        };
        if fields.len() != 3 {
            return Err(parse_err(
                i + 1,
                format!("header must be `channels,length,class_count`, got {line:?}"),
            ));
        }
        let mut dims = [0usize; 3];
        for (d, f) in dims.iter_mut().zip(&fields) {
            *d = f
                .parse()
                .map_err(|_| parse_err(i + 1, format!("header field {f:?} is not a non-negative integer")))?;
        }
        break (dims[0], dims[1], dims[2]);
    };
    if channels == 0 || length == 0 || class_count < 2 {
        return Err(Error::Validation(format!(
            "header declares channels={channels}, length={length}, class_count={class_count}"
        )));
    }

    let expected = channels * length;
    let mut samples = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields = schema.delimiter.split(trimmed);
        let found = fields.len().saturating_sub(1);
        if found != expected {
            return Err(Error::InconsistentLength {
                path: origin.to_path_buf(),
                line: line_no,
                expected,
                found,
            });
        }
        let (label_field, value_fields) = match schema.label_position {
            LabelPosition::Last => (fields[expected], &fields[..expected]),
            LabelPosition::First => (fields[0], &fields[1..]),
        };
        let label: usize = label_field
            .parse::<usize>()
            .or_else(|_| {
                // Accept "1.0"-style integral labels.
                label_field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && *v >= 0.0)
                    .map(|v| v as usize)
                    .ok_or(())
            })
            .map_err(|_| parse_err(line_no, format!("label {label_field:?} is not a class index")))?;
        if label >= class_count {
            return Err(parse_err(
                line_no,
                format!("label {label} out of range for class_count {class_count}"),
            ));
        }
        let mut values = Vec::with_capacity(expected);
        for (j, f) in value_fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line_no, format!("value field {} ({f:?}) is not numeric", j + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("value field {} is not finite", j + 1)));
            }
            values.push(v);
        }
        let id = samples.len();
        samples.push(TimeSeriesSample::new(id, channels, length, values, label)?);
    }
    Dataset::new(samples, class_count, channels, length, Split::Train)
}

/// Writes a dataset in the format read by [`load_dataset`].
pub fn write_dataset(dataset: &Dataset, mut out: impl Write, schema: &Schema) -> Result<()> {
    let d = schema.delimiter.as_char();
    writeln!(out, "{},{},{}", dataset.channels, dataset.length, dataset.class_count)?;
    let mut line = String::new();
    for s in &dataset.samples {
        line.clear();
        let values = s.values.iter().map(|v| format!("{v:?}"));
        let fields: Vec<String> = match schema.label_position {
            LabelPosition::Last => values.chain(std::iter::once(s.label.to_string())).collect(),
            LabelPosition::First => std::iter::once(s.label.to_string()).chain(values).collect(),
        };
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                line.push(d);
            }
            line.push_str(f);
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>, schema: &Schema) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_dataset(dataset, &mut w, schema)?;
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Point-anomaly generator

/// The anomaly labeling rule: a sample is anomalous iff some point of some
/// channel strictly exceeds that channel's mean plus `k` population standard
/// deviations, both computed over the sample itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRule {
    pub k: f64,
}

impl AnomalyRule {
    pub fn label(&self, sample: &TimeSeriesSample) -> usize {
        (0..sample.channels).any(|c| self.channel_exceeds(sample.channel(c))) as usize
    }

    pub fn channel_exceeds(&self, channel: &[f64]) -> bool {
        let n = channel.len() as f64;
        let mean = compensated_sum(channel.iter().copied()) / n;
        let var = compensated_sum(channel.iter().map(|v| (v - mean) * (v - mean))) / n;
        let threshold = mean + self.k * var.sqrt();
        channel.iter().any(|&v| v > threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyGenSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub length: usize,
    pub channels: usize,
    pub noise_sigma: f64,
    /// Peak amplitude is drawn uniformly from `[lo, hi]` and added to the noise.
    pub peak_amplitude_range: (f64, f64),
    /// Multiplier `k` of the labeling rule.
    pub sigma_multiplier: f64,
    pub seed: u64,
}

impl Default for AnomalyGenSpec {
    fn default() -> Self {
        AnomalyGenSpec {
            train: 3500,
            val: 1500,
            test: 1000,
            length: 50,
            channels: 3,
            noise_sigma: 1.0,
            peak_amplitude_range: (6.0, 12.0),
            sigma_multiplier: 4.0,
            seed: 7,
        }
    }
}

impl AnomalyGenSpec {
    pub fn rule(&self) -> AnomalyRule {
        AnomalyRule {
            k: self.sigma_multiplier,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.val == 0 || self.test == 0 {
            return Err(Error::Validation("generator split counts must be positive".into()));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma <= 0.0 {
            return Err(Error::Validation(format!(
                "noise_sigma must be > 0, got {}",
                self.noise_sigma
            )));
        }
        if self.sigma_multiplier.is_nan() || self.sigma_multiplier <= 0.0 {
            return Err(Error::Validation(format!(
                "sigma_multiplier must be > 0, got {}",
                self.sigma_multiplier
            )));
        }
        let (lo, hi) = self.peak_amplitude_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Validation(format!("invalid peak amplitude range [{lo}, {hi}]")));
        }
        if self.length < 5 || self.channels == 0 {
            return Err(Error::Validation(
                "anomaly samples need length >= 5 and >= 1 channel".into(),
            ));
        }
        Ok(())
    }
}

/// Location of the injected peak of a generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub channel: usize,
    pub position: usize,
    pub amplitude: f64,
}

/// A generated split together with the peak injected into each sample.
#[derive(Debug, Clone)]
pub struct GeneratedSplit {
    pub dataset: Dataset,
    pub peaks: Vec<Option<Peak>>,
}

pub fn generate_anomaly(spec: &AnomalyGenSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let [train, val, test] = generate_anomaly_with_peaks(spec)?;
    Ok((train.dataset, val.dataset, test.dataset))
}

/// Gaussian noise per channel; half of the samples get a single-point peak in
/// one channel at a position in `2..=length-3`. Labels come from
/// [`AnomalyRule`], not from whether a peak was injected.
pub fn generate_anomaly_with_peaks(spec: &AnomalyGenSpec) -> Result<[GeneratedSplit; 3]> {
    spec.validate()?;
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let rule = spec.rule();
    let (lo, hi) = spec.peak_amplitude_range;

    let make = |count: usize, split: Split, stream: u64| -> Result<GeneratedSplit> {
        let mut r = rng(derive_seed(spec.seed, stream));
        let mut samples = Vec::with_capacity(count);
        let mut peaks = Vec::with_capacity(count);
        for id in 0..count {
            let values: Vec<f64> = (0..spec.channels * spec.length).map(|_| noise.sample(&mut r)).collect();
            let mut sample = TimeSeriesSample::new(id, spec.channels, spec.length, values, 0)?;
            let peak = if r.random_bool(0.5) {
                let channel = r.random_range(0..spec.channels);
                let position = r.random_range(2..=spec.length - 3);
                let amplitude = if lo == hi { lo } else { r.random_range(lo..=hi) };
                sample.channel_mut(channel)[position] += amplitude;
                Some(Peak {
                    channel,
                    position,
                    amplitude,
                })
            } else {
                None
            };
            sample.label = rule.label(&sample);
            samples.push(sample);
            peaks.push(peak);
        }
        Ok(GeneratedSplit {
            dataset: Dataset::new(samples, 2, spec.channels, spec.length, split)?,
            peaks,
        })
    };

    Ok([
        make(spec.train, Split::Train, 0)?,
        make(spec.val, Split::Val, 1)?,
        make(spec.test, Split::Test, 2)?,
    ])
}

// ---------------------------------------------------------------------------
// Pulse-pair generator

/// Two-class task whose discriminative pattern spans more than ten steps.
///
/// Every sample carries two unit pulses on low-amplitude noise. In class 1
/// they sit exactly `near_gap` steps apart; in class 0 at least `far_gap`
/// steps apart. With `near_gap >= 10` no window of ten steps ever holds both
/// pulses, while with `far_gap >= 20` no window of twenty steps does for class 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulsePairSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub length: usize,
    pub noise_sigma: f64,
    pub amplitude: f64,
    pub near_gap: usize,
    pub far_gap: usize,
    /// Pulses are kept at least this far from both ends.
    pub margin: usize,
    pub seed: u64,
}

impl Default for PulsePairSpec {
    fn default() -> Self {
        PulsePairSpec {
            train: 1000,
            val: 400,
            test: 400,
            length: 50,
            noise_sigma: 0.1,
            amplitude: 2.0,
            near_gap: 10,
            far_gap: 21,
            margin: 2,
            seed: 11,
        }
    }
}

impl PulsePairSpec {
    /// All admissible `(first, second)` pulse positions for a class.
    pub fn pulse_pairs(&self, class: usize) -> Vec<(usize, usize)> {
        let lo = self.margin;
        let hi = self.length - 1 - self.margin;
        let mut pairs = Vec::new();
        for a in lo..=hi {
            for b in a + 1..=hi {
                let gap = b - a;
                let keep = if class == 1 {
                    gap == self.near_gap
                } else {
                    gap >= self.far_gap
                };
                if keep {
                    pairs.push((a, b));
                }
            }
        }
        pairs
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.val == 0 || self.test == 0 {
            return Err(Error::Validation("generator split counts must be positive".into()));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma <= 0.0 {
            return Err(Error::Validation("noise_sigma must be > 0".into()));
        }
        if self.near_gap >= self.far_gap {
            return Err(Error::Validation("near_gap must be smaller than far_gap".into()));
        }
        if self.pulse_pairs(0).is_empty() || self.pulse_pairs(1).is_empty() {
            return Err(Error::Validation(
                "length too short for the requested pulse gaps".into(),
            ));
        }
        Ok(())
    }
}

/// A generated pulse-pair split with the `(first, second)` pulse positions of each sample.
pub type PulseSplit = (Dataset, Vec<(usize, usize)>);

/// Train, val and test splits of the pulse-pair task.
pub fn generate_pulse_pairs(spec: &PulsePairSpec) -> Result<[PulseSplit; 3]> {
    spec.validate()?;
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let pairs = [spec.pulse_pairs(0), spec.pulse_pairs(1)];
    let make = |count: usize, split: Split, stream: u64| -> Result<(Dataset, Vec<(usize, usize)>)> {
        let mut r = rng(derive_seed(spec.seed, 100 + stream));
        let mut samples = Vec::with_capacity(count);
        let mut positions = Vec::with_capacity(count);
        for id in 0..count {
            let label = id % 2;
            let mut values: Vec<f64> = (0..spec.length).map(|_| noise.sample(&mut r)).collect();
            let &(a, b) = pairs[label].choose(&mut r).expect("validated non-empty");
            values[a] += spec.amplitude;
            values[b] += spec.amplitude;
            samples.push(TimeSeriesSample::new(id, 1, spec.length, values, label)?);
            positions.push((a, b));
        }
        Ok((Dataset::new(samples, 2, 1, spec.length, split)?, positions))
    };
    Ok([
        make(spec.train, Split::Train, 0)?,
        make(spec.val, Split::Val, 1)?,
        make(spec.test, Split::Test, 2)?,
    ])
}

// ---------------------------------------------------------------------------
// Normalization

/// Per-channel mean and (clamped) population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Validation(
                "cannot compute normalization statistics of an empty dataset".into(),
            ));
        }
        let n = (dataset.len() * dataset.length) as f64;
        let mut mean = Vec::with_capacity(dataset.channels);
        let mut std = Vec::with_capacity(dataset.channels);
        for c in 0..dataset.channels {
            let m = compensated_sum(dataset.samples.iter().flat_map(|s| s.channel(c).iter().copied())) / n;
            let var = compensated_sum(
                dataset
                    .samples
                    .iter()
                    .flat_map(|s| s.channel(c).iter().map(move |v| (v - m) * (v - m))),
            ) / n;
            mean.push(m);
            std.push(var.sqrt().max(STD_FLOOR));
        }
        Ok(NormStats { mean, std })
    }

    /// Statistics that leave data unchanged.
    pub fn identity(channels: usize) -> Self {
        NormStats {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_sample(&self, sample: &TimeSeriesSample) -> Result<TimeSeriesSample> {
        if sample.channels != self.channels() {
            return Err(Error::dimension(self.channels(), sample.channels));
        }
        let mut out = sample.clone();
        for c in 0..sample.channels {
            let (m, s) = (self.mean[c], self.std[c]);
            for v in out.channel_mut(c) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        let samples = dataset
            .samples
            .iter()
            .map(|s| self.apply_sample(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(dataset.with_samples(samples, dataset.split))
    }
}

/// Z-normalizes a dataset with its own statistics. Use [`NormStats::fit`] on
/// the training split and [`NormStats::apply`] to carry them to val/test.
pub fn znormalize(dataset: &Dataset) -> Result<Dataset> {
    NormStats::fit(dataset)?.apply(dataset)
}

// ---------------------------------------------------------------------------
// Splitting

/// Stratified train/val/test split. Per class, `round(n * train)` samples go
/// to train, `round(n * val)` to val, the rest to test. Ids are preserved and
/// each split is ordered by id.
pub fn split_holdout(dataset: &Dataset, fractions: (f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv) = fractions;
    if !(ft > 0.0 && fv > 0.0 && ft + fv < 1.0) {
        return Err(Error::Validation(format!(
            "split fractions must be positive with sum < 1, got ({ft}, {fv})"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_count];
    for (i, s) in dataset.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut r = rng(seed);
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 3 {
            return Err(Error::Stratification {
                class,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut r);
        let n = idx.len() as f64;
        let n_train = ((n * ft).round() as usize).clamp(1, idx.len() - 2);
        let n_val = ((n * fv).round() as usize).clamp(1, idx.len() - n_train - 1);
        tr.extend_from_slice(&idx[..n_train]);
        va.extend_from_slice(&idx[n_train..n_train + n_val]);
        te.extend_from_slice(&idx[n_train + n_val..]);
    }
    let take = |mut idx: Vec<usize>, split: Split| {
        idx.sort_by_key(|&i| dataset.samples[i].id);
        dataset.with_samples(idx.into_iter().map(|i| dataset.samples[i].clone()).collect(), split)
    };
    Ok((take(tr, Split::Train), take(va, Split::Val), take(te, Split::Test)))
}
