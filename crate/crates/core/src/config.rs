//! JSON run configuration shared by every command.
//!
//! Unknown keys are rejected and `seed` is mandatory. Relative paths resolve
//! against the directory holding the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augment::{AugmentationSpec, ExplicitMode};
use crate::encoder::{EncoderConfig, ProjectorActivation};
use crate::pretrain::ContrastiveConfig;
use crate::smiles::Special;
use crate::transfer::HeadConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: {key}: {message}", path.display())]
    Schema { path: PathBuf, key: String, message: String },
    #[error("{key}: path does not exist: {}", path.display())]
    MissingPath { key: String, path: PathBuf },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

/// Encoder shape without the vocabulary size, which comes from the vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_feedforward: usize,
    pub max_len: usize,
    pub dropout_ratio: f64,
    pub projector_out: usize,
    pub projector_activation: ProjectorActivation,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let d = EncoderConfig::desk(0);
        EncoderSection {
            d_model: d.d_model,
            n_layers: d.n_layers,
            n_heads: d.n_heads,
            d_feedforward: d.d_feedforward,
            max_len: d.max_len,
            dropout_ratio: d.dropout_ratio,
            projector_out: d.projector_out,
            projector_activation: d.projector_activation,
        }
    }
}

impl EncoderSection {
    pub fn to_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_feedforward: self.d_feedforward,
            max_len: self.max_len,
            dropout_ratio: self.dropout_ratio,
            projector_out: self.projector_out,
            projector_activation: self.projector_activation,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    /// Held-out polymers for alignment/uniformity snapshots.
    pub eval_corpus: Option<PathBuf>,
    pub datasets: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Token table; the built-in one when absent.
    pub vocab: Option<PathBuf>,
}

/// A named preset or an explicit list of specs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Preset(String),
    Specs(Vec<AugmentationSpec>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub grid: Grid,
    /// Cells trained concurrently.
    pub workers: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { grid: Grid::Preset("explicit".into()), workers: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    /// Positive pairs dumped per polymer by the `augment` command.
    pub views: usize,
}

impl Default for AugmentSection {
    fn default() -> Self {
        AugmentSection { views: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub contrastive: ContrastiveConfig,
    #[serde(default)]
    pub augmentation: AugmentationSpec,
    #[serde(default)]
    pub transfer: HeadConfig,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub augment: AugmentSection,
}

/// The ten unordered pairs of explicit modes, dropout off.
pub fn explicit_grid() -> Vec<AugmentationSpec> {
    let mut out = Vec::new();
    for (a, &i) in ExplicitMode::ALL.iter().enumerate() {
        for &j in &ExplicitMode::ALL[a..] {
            out.push(AugmentationSpec::new(i, j, false));
        }
    }
    out
}

/// Explicit pairs, dropout alone, and four explicit pairs with dropout.
pub fn full_grid() -> Vec<AugmentationSpec> {
    use ExplicitMode::*;
    let mut out = explicit_grid();
    out.push(AugmentationSpec::new(Original, Original, true));
    for (i, j) in [(Original, Enumeration), (Enumeration, Masking), (Original, Drop), (Enumeration, Drop)] {
        out.push(AugmentationSpec::new(i, j, true));
    }
    out
}

impl Grid {
    /// Concrete specs with the baseline first, duplicates removed.
    pub fn resolve(&self) -> Result<Vec<AugmentationSpec>, ConfigError> {
        let specs = match self {
            Grid::Preset(name) => match name.as_str() {
                "explicit" => explicit_grid(),
                "full" => full_grid(),
                other => {
                    return Err(ConfigError::Invalid {
                        key: "sweep.grid".into(),
                        message: format!("unknown preset \"{other}\" (expected \"explicit\" or \"full\")"),
                    })
                }
            },
            Grid::Specs(list) => list.clone(),
        };
        if specs.is_empty() {
            return Err(ConfigError::Invalid { key: "sweep.grid".into(), message: "empty grid".into() });
        }
        let mut out = vec![AugmentationSpec::baseline()];
        for s in specs {
            s.validate().map_err(|e| ConfigError::Invalid { key: "sweep.grid".into(), message: e.to_string() })?;
            if !out.contains(&s) {
                out.push(s);
            }
        }
        Ok(out)
    }
}

impl RunConfig {
    /// Parses JSON text; errors name the offending key path.
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::Schema { path: path.to_path_buf(), key, message: e.into_inner().to_string() }
        })
    }

    /// Reads, resolves relative paths, and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_json(&text, path)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        paths.corpus.iter_mut().for_each(fix);
        paths.eval_corpus.iter_mut().for_each(fix);
        paths.datasets.iter_mut().for_each(fix);
        paths.out_dir.iter_mut().for_each(fix);
        paths.vocab.iter_mut().for_each(fix);
    }

    /// Every referenced input path must exist; section values must be valid.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.paths;
        let mut inputs: Vec<(String, &PathBuf)> = Vec::new();
        inputs.extend(p.corpus.iter().map(|x| ("paths.corpus".to_string(), x)));
        inputs.extend(p.eval_corpus.iter().map(|x| ("paths.eval_corpus".to_string(), x)));
        inputs.extend(p.vocab.iter().map(|x| ("paths.vocab".to_string(), x)));
        inputs.extend(p.datasets.iter().enumerate().map(|(i, x)| (format!("paths.datasets[{i}]"), x)));
        for (key, path) in inputs {
            if !path.exists() {
                return Err(ConfigError::MissingPath { key, path: path.clone() });
            }
        }
        let invalid = |key: &str, e: &dyn std::fmt::Display| ConfigError::Invalid { key: key.into(), message: e.to_string() };
        self.encoder.to_config(Special::ALL.len() + 1).validate().map_err(|e| invalid("encoder", &e))?;
        self.contrastive.validate().map_err(|e| invalid("contrastive", &e))?;
        self.augmentation.validate().map_err(|e| invalid("augmentation", &e))?;
        self.transfer.validate().map_err(|e| invalid("transfer", &e))?;
        if self.sweep.workers == 0 {
            return Err(ConfigError::Invalid { key: "sweep.workers".into(), message: "must be at least 1".into() });
        }
        if self.augment.views == 0 {
            return Err(ConfigError::Invalid { key: "augment.views".into(), message: "must be at least 1".into() });
        }
        Ok(())
    }

    /// The contrastive section with the run seed filled in.
    pub fn contrastive_config(&self) -> ContrastiveConfig {
        ContrastiveConfig { seed: self.seed, ..self.contrastive.clone() }
    }

    /// Pretty JSON of the fully resolved configuration.
    pub fn resolved_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable config");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of [`RunConfig::resolved_json`].
    pub fn fingerprint(&self) -> String {
        Sha256::digest(self.resolved_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
