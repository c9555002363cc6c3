use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augmenter::AugmentationConfig;
use crate::data::synthetic::SyntheticConfig;
use crate::data::{Schema, SplitRatios};
use crate::error::{Error, Result};
use crate::grad::SvdGradient;
use crate::models::{ModelConfig, ModelKind};
use crate::policies::{ItemPolicy, PolicyConfig, UserPolicy};

/// Where the interactions and attributes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetConfig {
    Synthetic(SyntheticConfig),
    File {
        interactions: PathBuf,
        attributes: PathBuf,
        #[serde(default)]
        schema: Schema,
        #[serde(default = "tab")]
        attribute_delimiter: String,
        /// Minimum interactions per user; 0 disables filtering.
        #[serde(default)]
        k_core: usize,
    },
}

fn tab() -> String {
    "\t".into()
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic(SyntheticConfig::default())
    }
}

impl DatasetConfig {
    pub fn name(&self) -> String {
        match self {
            DatasetConfig::Synthetic(_) => "synthetic".into(),
            DatasetConfig::File { interactions, .. } => interactions
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
        }
    }
}

/// The user and item policies crossed by the grid. Each list is also run alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub user_policies: Vec<UserPolicy>,
    pub item_policies: Vec<ItemPolicy>,
    pub psi_u: f64,
    pub psi_i: f64,
    pub pagerank_damping: f64,
    pub unreachable_distance_cap: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let p = PolicyConfig::default();
        Self {
            user_policies: UserPolicy::ALL.to_vec(),
            item_policies: ItemPolicy::ALL.to_vec(),
            psi_u: p.psi_u,
            psi_i: p.psi_i,
            pagerank_damping: p.pagerank_damping,
            unreachable_distance_cap: p.unreachable_distance_cap,
        }
    }
}

impl GridConfig {
    pub fn policy(&self, user: Option<UserPolicy>, item: Option<ItemPolicy>) -> PolicyConfig {
        PolicyConfig {
            user_policy: user,
            item_policy: item,
            psi_u: self.psi_u,
            psi_i: self.psi_i,
            pagerank_damping: self.pagerank_damping,
            unreachable_distance_cap: self.unreachable_distance_cap,
        }
    }

    /// Row labels: `none` then each user policy.
    pub fn rows(&self) -> Vec<Option<UserPolicy>> {
        std::iter::once(None).chain(self.user_policies.iter().copied().map(Some)).collect()
    }

    pub fn cols(&self) -> Vec<Option<ItemPolicy>> {
        std::iter::once(None).chain(self.item_policies.iter().copied().map(Some)).collect()
    }

    /// Every row x column combination except the empty one, row-major.
    pub fn cells(&self) -> Vec<PolicyConfig> {
        let mut out = Vec::new();
        for u in self.rows() {
            for i in self.cols() {
                if u.is_some() || i.is_some() {
                    out.push(self.policy(u, i));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub user_policy: UserPolicy,
    pub item_policy: ItemPolicy,
    pub psi_u_values: Vec<f64>,
    pub psi_i_values: Vec<f64>,
    /// Held fixed while `psi_i_values` vary.
    pub fixed_psi_u: f64,
    /// Held fixed while `psi_u_values` vary.
    pub fixed_psi_i: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            user_policy: UserPolicy::FR,
            item_policy: ItemPolicy::PR,
            psi_u_values: vec![0.25, 0.30, 0.35, 0.40, 0.45],
            psi_i_values: vec![0.10, 0.15, 0.20, 0.25, 0.30],
            fixed_psi_u: 0.35,
            fixed_psi_i: 0.20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    /// `gender` or `age`.
    pub attribute: String,
    /// Users at or below this age form the younger group.
    pub age_threshold: f64,
    pub split: SplitRatios,
    /// Augmentable models benchmarked, gridded and swept.
    pub models: Vec<ModelConfig>,
    /// Re-training settings for transfer targets; missing kinds use defaults.
    pub transfer_models: Vec<ModelConfig>,
    pub grid: GridConfig,
    pub sweep: SweepConfig,
    pub augmentation: AugmentationConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            dataset: DatasetConfig::default(),
            attribute: "gender".into(),
            age_threshold: 33.0,
            split: SplitRatios::default(),
            models: vec![ModelConfig::default()],
            transfer_models: vec![
                ModelConfig {
                    kind: ModelKind::SvdGcnS,
                    ..ModelConfig::default()
                },
                ModelConfig {
                    kind: ModelKind::MfBpr,
                    ..ModelConfig::default()
                },
            ],
            grid: GridConfig::default(),
            sweep: SweepConfig::default(),
            // finite differences cost one SVD per candidate, too slow for grid-sized sets
            augmentation: AugmentationConfig {
                svd_gradient: SvdGradient::Analytic,
                ..AugmentationConfig::default()
            },
            seeds: vec![0],
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a TOML file. Relative dataset paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetConfig::File {
            interactions,
            attributes,
            ..
        } = &mut config.dataset
        {
            for p in [interactions, attributes] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        for m in &self.models {
            m.validate()?;
            if !m.kind.augmentable() {
                return Err(Error::Config(format!(
                    "{} cannot be augmented; list it under transfer_models",
                    m.kind
                )));
            }
        }
        for m in &self.transfer_models {
            m.validate()?;
        }
        if self.grid.cells().is_empty() {
            return Err(Error::Config("the policy grid has no cells".into()));
        }
        for cell in self.grid.cells() {
            cell.validate()?;
        }
        let psis = self.sweep.psi_u_values.iter().chain(&self.sweep.psi_i_values);
        for &psi in psis.chain([&self.sweep.fixed_psi_u, &self.sweep.fixed_psi_i]) {
            if !(psi > 0.0 && psi <= 1.0) {
                return Err(Error::Config(format!("sweep value {psi} outside (0, 1]")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !matches!(self.attribute.as_str(), "gender" | "age") {
            return Err(Error::Config(format!("unknown attribute `{}`", self.attribute)));
        }
        self.augmentation.validate()
    }

    /// Settings for re-training `kind`, falling back to defaults of that kind.
    pub fn transfer_model(&self, kind: ModelKind) -> ModelConfig {
        self.transfer_models
            .iter()
            .find(|m| m.kind == kind)
            .cloned()
            .unwrap_or(ModelConfig {
                kind,
                ..ModelConfig::default()
            })
    }

    /// Hex SHA-256 of the canonical JSON form; any field change alters it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
