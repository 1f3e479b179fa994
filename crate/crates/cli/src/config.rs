//! Run configuration: defaults, overlaid by a TOML file, overlaid by flags.

use std::path::{Path, PathBuf};

use graphaudit::audit::{AuditConfig, ContextConfig};
use graphaudit::mgnan::{AdamConfig, FeatureGrouping, Link, ModelConfig};
use graphaudit::retrieval::{RetrievalConfig, RetrievalMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Sidecar index; when set, `embeddings` is read as a binary blob.
    pub embeddings_index: Option<PathBuf>,
    /// A bundle directory written by `build`.
    pub graph: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub subgraphs: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub attributions: Option<PathBuf>,
    pub audits: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildSection {
    /// Hash-embed nodes at this width instead of reading an embedding file.
    pub hash_dim: Option<usize>,
    /// Generate a synthetic graph of this many nodes instead of reading files.
    pub synthetic_nodes: Option<usize>,
    pub synthetic_queries: usize,
}

impl Default for BuildSection {
    fn default() -> Self {
        Self {
            hash_dim: None,
            synthetic_nodes: None,
            synthetic_queries: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Number of contiguous feature groups.
    pub groups: usize,
    pub hidden: Vec<usize>,
    pub channels: usize,
    pub link: Link,
    pub knots: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            groups: 1,
            hidden: m.hidden,
            channels: m.channels,
            link: m.link,
            knots: m.knots,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.hidden.clone(),
            channels: self.channels,
            link: self.link,
            knots: self.knots,
        }
    }

    pub fn grouping(&self, dim: usize) -> Result<FeatureGrouping> {
        FeatureGrouping::contiguous(dim, self.groups).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds model initialisation, batch shuffling and synthetic data.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub mode: RetrievalMode,
    pub paths: Paths,
    pub build: BuildSection,
    pub retrieval: RetrievalConfig,
    pub model: ModelSection,
    pub train: AdamConfig,
    pub context: ContextConfig,
    pub audit: AuditConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            mode: RetrievalMode::MultiHop,
            paths: Paths::default(),
            build: BuildSection::default(),
            retrieval: RetrievalConfig::default(),
            model: ModelSection::default(),
            train: AdamConfig::default(),
            context: ContextConfig::default(),
            audit: AuditConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Range checks shared by every subcommand.
    pub fn validate(&self) -> Result<()> {
        let usage = |m: &str| Err(CliError::Usage(m.to_string()));
        self.retrieval
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.model.groups == 0 || self.model.channels == 0 || self.model.knots == 0 {
            return usage("model groups, channels and knots must be at least 1");
        }
        if self.model.hidden.contains(&0) {
            return usage("model hidden widths must be positive");
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return usage("train epochs and batch_size must be at least 1");
        }
        if !(self.train.lr >= 0.0 && self.train.lr.is_finite()) {
            return usage("train lr must be a finite non-negative number");
        }
        if self.audit.k == 0 || self.audit.bridges == 0 || self.context.k == 0 {
            return usage("audit k, audit bridges and context k must be at least 1");
        }
        if self.build.hash_dim == Some(0) || self.build.synthetic_nodes == Some(0) {
            return usage("build hash_dim and synthetic_nodes must be at least 1");
        }
        Ok(())
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| CliError::Usage(format!("missing {what} path (flag or [paths] {what})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_defaults() {
        let cfg: RunConfig = toml::from_str(
            "seed = 9\n[retrieval]\nhops = 2\n[audit]\nk = 4\n[paths]\nout = \"o\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.retrieval.hops, 2);
        assert_eq!(cfg.retrieval.k_seeds, RetrievalConfig::default().k_seeds);
        assert_eq!(cfg.audit.k, 4);
        assert_eq!(cfg.paths.out.as_deref(), Some(Path::new("o")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 1\n").is_err());
        assert!(toml::from_str::<RunConfig>("[paths]\ngrpah = \"x\"\n").is_err());
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn validation_catches_zero_widths() {
        let mut cfg = RunConfig::default();
        cfg.model.hidden = vec![4, 0];
        assert!(matches!(cfg.validate(), Err(CliError::Usage(_))));
    }
}
