//! Experiment configuration documents.
//!
//! A config is a JSON object; every section is optional and unknown keys are
//! rejected. Relative paths inside it resolve against the directory holding
//! the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use relgeo::alignment::MapKind;
use relgeo::experiments::{AeArchitecture, RelRepSettings};
use relgeo::geometry::{MetricSpec, OracleConfig};
use relgeo::relrep::{AnchorScheme, RelRepMode};
use relgeo::synthbench::DatasetSpec;
use relgeo::training::{LossKind, TrainConfig};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetSpec,
    /// Leading rows of the dataset used for training; the rest is the test split.
    pub train_size: usize,
    pub autoencoder: AutoencoderSection,
    pub diet: DietSection,
    pub anchors: AnchorSection,
    pub relrep: RelRepSection,
    /// Methods compared by `anchor-sweep`; empty means cosine against `relrep`.
    pub methods: Vec<RelRepSettings>,
    pub geodesic_compare: CompareSection,
    pub alignment: AlignmentSection,
    pub retrieve: RetrieveSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            output_dir: PathBuf::from("relgeo-out"),
            dataset: DatasetSpec {
                n: 1500,
                noise: 0.05,
                ..DatasetSpec::default()
            },
            train_size: 1000,
            autoencoder: AutoencoderSection::default(),
            diet: DietSection::default(),
            anchors: AnchorSection::default(),
            relrep: RelRepSection::default(),
            methods: Vec::new(),
            geodesic_compare: CompareSection::default(),
            alignment: AlignmentSection::default(),
            retrieve: RetrieveSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optimisation {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Optimisation {
    pub fn train_config(&self, loss: LossKind, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            ..TrainConfig::new(loss, seed)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoencoderSection {
    pub architecture: AeArchitecture,
    /// Number of independently seeded models.
    pub models: usize,
    pub training: Optimisation,
}

impl Default for AutoencoderSection {
    fn default() -> Self {
        Self {
            architecture: AeArchitecture {
                hidden: vec![64, 32],
                latent_dim: 2,
            },
            models: 2,
            training: Optimisation {
                epochs: 100,
                batch_size: 32,
                learning_rate: 1e-3,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DietSection {
    pub hidden: Vec<usize>,
    pub training: Optimisation,
}

impl Default for DietSection {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            training: Optimisation {
                epochs: 50,
                batch_size: 32,
                learning_rate: 1e-2,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnchorSection {
    pub k: usize,
    pub scheme: AnchorScheme,
    pub repeats: usize,
    /// Anchor counts visited by `anchor-sweep`.
    pub sweep: Vec<usize>,
}

impl Default for AnchorSection {
    fn default() -> Self {
        Self {
            k: 50,
            scheme: AnchorScheme::Uniform,
            repeats: 5,
            sweep: vec![2, 5, 8, 10, 15, 20, 50],
        }
    }
}

/// Which decoder the geodesic relative representation is measured through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    /// The autoencoder's decoder.
    Ae,
    /// The penultimate layer of the instance-discrimination head.
    Diet,
}

impl std::str::FromStr for SpaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ae" => Ok(SpaceKind::Ae),
            "diet" => Ok(SpaceKind::Diet),
            other => Err(format!("unknown space '{other}' (expected ae or diet)")),
        }
    }
}

impl std::fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpaceKind::Ae => "ae",
            SpaceKind::Diet => "diet",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelRepSection {
    pub mode: RelRepMode,
    pub metric: MetricSpec,
    pub steps: usize,
    pub space: SpaceKind,
}

impl Default for RelRepSection {
    fn default() -> Self {
        Self {
            mode: RelRepMode::GeoLength,
            metric: MetricSpec::Euclidean,
            steps: 8,
            space: SpaceKind::Ae,
        }
    }
}

impl RelRepSection {
    pub fn settings(&self) -> RelRepSettings {
        RelRepSettings {
            mode: self.mode,
            metric: self.metric,
            steps: self.steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Test points taken per mixture component.
    pub per_label: usize,
    /// Index of the autoencoder whose decoder is probed.
    pub model: usize,
    pub oracle: OracleConfig,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            per_label: 10,
            model: 0,
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignmentSection {
    pub kind: MapKind,
    /// Centre both sides before fitting; otherwise a bias column is fitted.
    pub center: bool,
    /// Drop correspondences whose similarity falls below this value.
    pub min_score: Option<f64>,
    /// Source and target model indices.
    pub source: usize,
    pub target: usize,
}

impl Default for AlignmentSection {
    fn default() -> Self {
        Self {
            kind: MapKind::Linear,
            center: false,
            min_score: None,
            source: 0,
            target: 1,
        }
    }
}

/// Explicit relative-representation files for `retrieve`; by default the
/// files written by `relrep` for the first two models are used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrieveSection {
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses a config document, resolving its relative paths against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, serde_json::Error> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.is_file() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::from_json(&text, base).map_err(|e| CliError::InvalidFile {
            path: path.to_path_buf(),
            source: relgeo::Error::Format(e.to_string()),
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.output_dir);
        self.retrieve.source.iter_mut().for_each(resolve);
        self.retrieve.target.iter_mut().for_each(resolve);
    }

    /// Methods for the anchor sweep.
    pub fn sweep_methods(&self) -> Vec<RelRepSettings> {
        if self.methods.is_empty() {
            vec![RelRepSettings::cosine(), self.relrep.settings()]
        } else {
            self.methods.clone()
        }
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> CliResult<()> {
        self.dataset.validate()?;
        if self.train_size == 0 || self.train_size >= self.dataset.n {
            return Err(CliError::Usage(format!(
                "train_size must lie in 1..{} (dataset.n), got {}",
                self.dataset.n, self.train_size
            )));
        }
        if self.autoencoder.models == 0 {
            return Err(CliError::Usage("autoencoder.models must be at least 1".into()));
        }
        let a = &self.alignment;
        if a.source == a.target || a.source.max(a.target) >= self.autoencoder.models {
            return Err(CliError::Usage(format!(
                "alignment needs two distinct models below {}, got {} and {}",
                self.autoencoder.models, a.source, a.target
            )));
        }
        if self.geodesic_compare.model >= self.autoencoder.models {
            return Err(CliError::Usage("geodesic_compare.model is out of range".into()));
        }
        if self.relrep.mode != RelRepMode::Cosine && self.relrep.steps == 0 {
            return Err(CliError::Usage("relrep.steps must be at least 1".into()));
        }
        Ok(())
    }
}
