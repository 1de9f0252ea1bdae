//! Run configuration: a TOML file with `[data]`, `[patching]`, `[network]`,
//! `[train]`, `[shallow]` and `[bench]` sections. Any key can be overridden
//! with `section.key=value`; the master seed comes from the flag, the file,
//! then `PATCHX_SEED`, then the default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use patchx::data::{
    generate_anomaly, generate_pulse_pairs, load_dataset, split_holdout, AnomalyGenSpec, Dataset, Delimiter,
    LabelPosition, PulsePairSpec, Schema, Split,
};
use patchx::metadata::MetadataOptions;
use patchx::neuralnet::{Activation, ConvBlock, TrainSpec};
use patchx::patching::{parse_config_token, PatchConfig};
use patchx::pipeline::PatchStageSpec;
use patchx::shallow::{ForestParams, ShallowKind, ShallowSpec, SvmParams, TrivialMode};

use crate::CliError;

pub const SEED_ENV: &str = "PATCHX_SEED";
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Anomaly,
    PulsePair,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    /// Z-normalize channels with training statistics.
    pub normalize: bool,
    pub train_path: Option<PathBuf>,
    pub val_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    /// Train and val fractions when only `train_path` is given.
    pub holdout: (f64, f64),
    pub delimiter: Delimiter,
    pub label_position: LabelPosition,
    pub anomaly: AnomalyGenSpec,
    pub pulse: PulsePairSpec,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: DataSource::Anomaly,
            normalize: true,
            train_path: None,
            val_path: None,
            test_path: None,
            holdout: (0.6, 0.2),
            delimiter: Delimiter::Comma,
            label_position: LabelPosition::Last,
            anomaly: AnomalyGenSpec::default(),
            pulse: PulsePairSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchingSection {
    /// `stride:length` tokens.
    pub configs: Vec<String>,
    /// Must stay true; kept so the flag is explicit in resolved configs.
    pub zero: bool,
    pub attach: bool,
    pub notemp: bool,
}

impl Default for PatchingSection {
    fn default() -> Self {
        PatchingSection {
            configs: vec!["5:10".into(), "10:20".into()],
            zero: true,
            attach: false,
            notemp: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub filters: Vec<usize>,
    pub kernel: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            filters: vec![32, 64, 64],
            kernel: 3,
            activation: Activation::Relu,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShallowSection {
    pub kind: ShallowKind,
    pub trivial: TrivialMode,
    pub standardize: bool,
    /// Sum config blocks into one.
    pub collapse: bool,
    /// Divide each block by its config's patch count.
    pub normalize_blocks: bool,
    pub svm: SvmParams,
    pub forest: ForestParams,
}

impl Default for ShallowSection {
    fn default() -> Self {
        ShallowSection {
            kind: ShallowKind::Svm,
            trivial: TrivialMode::ClassSpecific,
            standardize: false,
            collapse: false,
            normalize_blocks: false,
            svm: SvmParams::default(),
            forest: ForestParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// Each entry is one list of `stride:length` tokens.
    pub config_sets: Vec<Vec<String>>,
    /// Any of `svm`, `forest`, `trivial`, `blackbox`.
    pub variants: Vec<String>,
    /// Also run the four valid transformation-flag rows on the last config set.
    pub flag_rows: bool,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            config_sets: vec![
                vec!["5:10".into()],
                vec!["10:20".into()],
                vec!["5:10".into(), "10:20".into()],
            ],
            variants: ["svm", "forest", "trivial", "blackbox"].map(String::from).to_vec(),
            flag_rows: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub data: DataSection,
    pub patching: PatchingSection,
    pub network: NetworkSection,
    pub train: TrainSpec,
    pub shallow: ShallowSection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            output_dir: PathBuf::from("runs"),
            data: DataSection::default(),
            patching: PatchingSection::default(),
            network: NetworkSection::default(),
            train: TrainSpec::default(),
            shallow: ShallowSection::default(),
            bench: BenchSection::default(),
        }
    }
}

/// Parses a `section.key=value` override. The value is read as a TOML value
/// and falls back to a plain string.
pub fn parse_override(text: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {text:?} is not `key=value`")))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("override {text:?} has an empty key segment")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("non-empty override path");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override path {} crosses a non-table value", path.join("."))))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Reads an optional TOML file, applies overrides in order, then resolves seeds.
    pub fn load(path: Option<&Path>, overrides: &[String], seed_flag: Option<u64>) -> Result<RunConfig, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                toml::from_str::<toml::Table>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
            ),
            Err(_) => None,
        };
        let seed = seed_flag.or(cfg.seed).or(env_seed).unwrap_or(DEFAULT_SEED);
        cfg.resolve(seed)
    }

    /// Materializes the master seed into every component and validates.
    pub fn resolve(mut self, seed: u64) -> Result<RunConfig, CliError> {
        self.seed = Some(seed);
        self.data.anomaly.seed = seed;
        self.data.pulse.seed = seed;
        self.network.seed = seed;
        self.train.seed = seed;
        self.shallow.svm.seed = seed;
        self.shallow.forest.seed = seed;
        self.validate()?;
        Ok(self)
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.patch_configs()?;
        self.train.validate()?;
        self.shallow_spec().validate()?;
        if self.network.filters.is_empty() || self.network.filters.contains(&0) || self.network.kernel == 0 {
            return Err(CliError::Config("network filters and kernel must be positive".into()));
        }
        match self.data.source {
            DataSource::Anomaly => self.data.anomaly.validate()?,
            DataSource::PulsePair => self.data.pulse.validate()?,
            DataSource::File => {
                if self.data.train_path.is_none() {
                    return Err(CliError::Config("data.source = \"file\" needs data.train_path".into()));
                }
            }
        }
        for set in &self.bench.config_sets {
            self.configs_from(set, self.patching.attach, self.patching.notemp)?;
        }
        for v in &self.bench.variants {
            if !["svm", "forest", "trivial", "blackbox"].contains(&v.as_str()) {
                return Err(CliError::Config(format!("unknown bench variant {v:?}")));
            }
        }
        Ok(())
    }

    pub fn configs_from(&self, tokens: &[String], attach: bool, notemp: bool) -> Result<Vec<PatchConfig>, CliError> {
        if tokens.is_empty() {
            return Err(CliError::Config("at least one patch config is required".into()));
        }
        if !self.patching.zero {
            // Rejected by PatchConfig::new as well; checked here for a clearer message.
            return Err(CliError::Config(
                "patching.zero = false is not supported: data outside a patch must be zeroed".into(),
            ));
        }
        tokens
            .iter()
            .map(|t| parse_config_token(t, attach, notemp).map_err(CliError::from))
            .collect()
    }

    pub fn patch_configs(&self) -> Result<Vec<PatchConfig>, CliError> {
        self.configs_from(&self.patching.configs, self.patching.attach, self.patching.notemp)
    }

    pub fn blocks(&self) -> Vec<ConvBlock> {
        self.network
            .filters
            .iter()
            .map(|&filters| ConvBlock {
                filters,
                kernel: self.network.kernel,
                activation: self.network.activation,
            })
            .collect()
    }

    pub fn stage_spec(&self, configs: Vec<PatchConfig>) -> PatchStageSpec {
        PatchStageSpec {
            configs,
            blocks: self.blocks(),
            network_seed: self.network.seed,
            train: self.train.clone(),
            normalize: self.data.normalize,
        }
    }

    pub fn shallow_spec(&self) -> ShallowSpec {
        self.shallow_spec_for(self.shallow.kind)
    }

    pub fn shallow_spec_for(&self, kind: ShallowKind) -> ShallowSpec {
        ShallowSpec {
            kind,
            svm: self.shallow.svm.clone(),
            forest: self.shallow.forest.clone(),
            trivial: self.shallow.trivial,
            standardize: self.shallow.standardize,
        }
    }

    pub fn metadata_options(&self) -> MetadataOptions {
        MetadataOptions {
            collapse: self.shallow.collapse,
            normalize: self.shallow.normalize_blocks,
        }
    }

    pub fn schema(&self) -> Schema {
        Schema {
            delimiter: self.data.delimiter,
            label_position: self.data.label_position,
        }
    }

    /// Train, val and test splits from the configured source.
    pub fn datasets(&self) -> Result<(Dataset, Dataset, Dataset), CliError> {
        Ok(match self.data.source {
            DataSource::Anomaly => generate_anomaly(&self.data.anomaly)?,
            DataSource::PulsePair => {
                let [(a, _), (b, _), (c, _)] = generate_pulse_pairs(&self.data.pulse)?;
                (a, b, c)
            }
            DataSource::File => {
                let schema = self.schema();
                let train_path = self.data.train_path.as_ref().expect("validated");
                let train = load_dataset(train_path, &schema)?;
                match (&self.data.val_path, &self.data.test_path) {
                    (Some(v), Some(t)) => (
                        train.with_split(Split::Train),
                        load_dataset(v, &schema)?.with_split(Split::Val),
                        load_dataset(t, &schema)?.with_split(Split::Test),
                    ),
                    (None, None) => split_holdout(&train, self.data.holdout, self.master_seed())?,
                    _ => {
                        return Err(CliError::Config(
                            "give both data.val_path and data.test_path, or neither".into(),
                        ))
                    }
                }
            }
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }
}
