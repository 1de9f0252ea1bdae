//! Length-preserving patch transformation.
//!
//! A patch `p` of a config `(stride, length)` covers `[p * stride,
//! min(p * stride + length, T))` of a series of length `T`, for every `p >= 0`
//! with `p * stride < T`. The transformed patch has the same time dimension as
//! the source: values outside the patch are zero, an optional mask channel
//! marks the valid range, and with `notemp` the content is shifted to start at
//! time-step 0.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TimeSeriesSample};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchConfig {
    stride: usize,
    length: usize,
    zero: bool,
    attach: bool,
    notemp: bool,
}

impl PatchConfig {
    /// Validates the flag combination. `zero` is mandatory: without it the
    /// network sees the whole sample and stops classifying patches.
    pub fn new(stride: usize, length: usize, zero: bool, attach: bool, notemp: bool) -> Result<Self> {
        if stride == 0 || length == 0 {
            return Err(Error::Config(format!(
                "patch stride and length must be positive, got stride={stride} length={length}"
            )));
        }
        if !zero {
            return Err(Error::Config(
                "zero=false is not supported: data outside the patch must be zeroed".into(),
            ));
        }
        if notemp && !zero {
            return Err(Error::Config("notemp requires zero".into()));
        }
        Ok(PatchConfig {
            stride,
            length,
            zero,
            attach,
            notemp,
        })
    }

    /// `zero` only.
    pub fn plain(stride: usize, length: usize) -> Result<Self> {
        Self::new(stride, length, true, false, false)
    }

    pub fn with_flags(self, attach: bool, notemp: bool) -> Self {
        PatchConfig { attach, notemp, ..self }
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn zero(&self) -> bool {
        self.zero
    }

    pub fn attach(&self) -> bool {
        self.attach
    }

    pub fn notemp(&self) -> bool {
        self.notemp
    }

    /// Rejects patch lengths longer than the series.
    pub fn check_series_length(&self, series_length: usize) -> Result<()> {
        if self.length > series_length {
            return Err(Error::Config(format!(
                "patch length {} exceeds series length {series_length}",
                self.length
            )));
        }
        Ok(())
    }

    /// Number of patches of a series of `series_length` steps.
    pub fn patch_count(&self, series_length: usize) -> usize {
        series_length.div_ceil(self.stride)
    }

    /// Channel count of a transformed patch.
    pub fn output_channels(&self, input_channels: usize) -> usize {
        input_channels + self.attach as usize
    }
}

impl fmt::Display for PatchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}L{}", self.stride, self.length)
    }
}

/// Parses a `stride:length` token.
pub fn parse_config_token(token: &str, attach: bool, notemp: bool) -> Result<PatchConfig> {
    let (s, l) = token
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("patch config {token:?} is not `stride:length`")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("patch config {token:?}: {v:?} is not a positive integer")))
    };
    PatchConfig::new(parse(s)?, parse(l)?, true, attach, notemp)
}

/// One patch location: index and the half-open span it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpan {
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

impl PatchSpan {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t < self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// All patches of a series, ordered by index; the last ones are truncated at
/// the series end.
pub fn enumerate_patches(series_length: usize, config: &PatchConfig) -> Vec<PatchSpan> {
    (0..config.patch_count(series_length))
        .map(|index| span_of(series_length, config, index))
        .collect()
}

fn span_of(series_length: usize, config: &PatchConfig, index: usize) -> PatchSpan {
    let start = index * config.stride;
    PatchSpan {
        index,
        start,
        end: (start + config.length).min(series_length),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchInstance {
    pub sample_id: usize,
    pub config_index: usize,
    pub patch_index: usize,
    /// Span in the source series.
    pub span: PatchSpan,
    /// Where the patch content sits inside `values` (shifted to 0 under notemp).
    pub valid_range: Range<usize>,
    pub channels: usize,
    pub length: usize,
    /// Channel-major `[channels x length]`; the mask channel, if any, is last.
    pub values: Vec<f64>,
    pub label: usize,
}

impl PatchInstance {
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.length..(c + 1) * self.length]
    }
}

/// Transforms patch `index` of `sample`. `config_index` is recorded as provenance.
pub fn transform(
    sample: &TimeSeriesSample,
    index: usize,
    config: &PatchConfig,
    config_index: usize,
) -> Result<PatchInstance> {
    let count = config.patch_count(sample.length);
    if index >= count {
        return Err(Error::Index { index, limit: count });
    }
    let span = span_of(sample.length, config, index);
    let length = sample.length;
    let offset = if config.notemp { 0 } else { span.start };
    let valid_range = offset..offset + span.len();
    let channels = config.output_channels(sample.channels);

    let mut values = vec![0.0; channels * length];
    for c in 0..sample.channels {
        let src = &sample.channel(c)[span.range()];
        values[c * length + valid_range.start..c * length + valid_range.end].copy_from_slice(src);
    }
    if config.attach {
        let mask = &mut values[sample.channels * length..];
        mask[valid_range.clone()].fill(1.0);
    }
    Ok(PatchInstance {
        sample_id: sample.id,
        config_index,
        patch_index: index,
        span,
        valid_range,
        channels,
        length,
        values,
        label: sample.label,
    })
}

/// Checks that all configs can be pooled into one network input.
pub fn validate_configs(configs: &[PatchConfig], series_length: usize) -> Result<()> {
    let Some(first) = configs.first() else {
        return Err(Error::Config("at least one patch config is required".into()));
    };
    for c in configs {
        c.check_series_length(series_length)?;
        if c.attach != first.attach {
            return Err(Error::Config("all patch configs must agree on the attach flag".into()));
        }
    }
    Ok(())
}

/// Every patch of one sample, configs in order, then patch index.
pub fn sample_patches(sample: &TimeSeriesSample, configs: &[PatchConfig]) -> Result<Vec<PatchInstance>> {
    let mut out = Vec::new();
    for (k, config) in configs.iter().enumerate() {
        for index in 0..config.patch_count(sample.length) {
            out.push(transform(sample, index, config, k)?);
        }
    }
    Ok(out)
}

/// Patches of a whole dataset, ordered by sample, then config, then index.
pub fn build_patch_dataset(dataset: &Dataset, configs: &[PatchConfig]) -> Result<Vec<PatchInstance>> {
    validate_configs(configs, dataset.length())?;
    let mut out =
        Vec::with_capacity(dataset.len() * configs.iter().map(|c| c.patch_count(dataset.length())).sum::<usize>());
    for sample in &dataset.samples {
        out.extend(sample_patches(sample, configs)?);
    }
    Ok(out)
}
