use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::workspace::sha256_hex;
use super::{PipelineError, Result};
use crate::eda::{DEFAULT_BINS, DEFAULT_THRESHOLD};
use crate::flowdata::{FlowSchema, Target};
use crate::learners::{Hyperparameters, ModelKind};
use crate::sampling::{DEFAULT_SMOTE_K, DEFAULT_TEST_FRACTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub test_fraction: f64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteSettings {
    pub enabled: bool,
    pub k: usize,
}

impl Default for SmoteSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            k: DEFAULT_SMOTE_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSettings {
    pub drop_correlated: bool,
    pub threshold: f64,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            drop_correlated: false,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdaSettings {
    pub enabled: bool,
    pub bins: usize,
}

impl Default for EdaSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            bins: DEFAULT_BINS,
        }
    }
}

fn default_workspace() -> PathBuf {
    PathBuf::from("workspace")
}

fn default_seed() -> u64 {
    7
}

fn default_models() -> Vec<String> {
    ModelKind::COMPARED.iter().map(|k| k.short_name().to_string()).collect()
}

/// One pipeline run, read from TOML or JSON. Relative paths resolve against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// Schema JSON; the built-in NetFlow schema when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default = "default_workspace")]
    pub workspace: PathBuf,
    #[serde(default)]
    pub target: Target,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Overrides the schema's feature list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    /// Skip unparsable rows instead of failing.
    #[serde(default)]
    pub lenient: bool,
    #[serde(default)]
    pub scale: bool,
    #[serde(default)]
    pub split: SplitSettings,
    #[serde(default)]
    pub smote: SmoteSettings,
    #[serde(default)]
    pub selection: SelectionSettings,
    #[serde(default)]
    pub eda: EdaSettings,
    /// Enabled model families by short name (`nb`, `knn`, `tree`, `rf`, `ada`).
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
}

/// The parameters that identify a run's outputs; paths are left out so a
/// moved workspace keeps its hashes.
#[derive(Serialize)]
struct Fingerprint<'a> {
    schema: &'a FlowSchema,
    target: Target,
    seed: u64,
    lenient: bool,
    scale: bool,
    split: &'a SplitSettings,
    smote: &'a SmoteSettings,
    selection: &'a SelectionSettings,
    eda: &'a EdaSettings,
    models: Vec<&'static str>,
    hyperparameters: &'a Hyperparameters,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>, workspace: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            schema: None,
            workspace: workspace.into(),
            target: Target::default(),
            seed: default_seed(),
            features: None,
            lenient: false,
            scale: false,
            split: SplitSettings::default(),
            smote: SmoteSettings::default(),
            selection: SelectionSettings::default(),
            eda: EdaSettings::default(),
            models: default_models(),
            hyperparameters: Hyperparameters::default(),
        }
    }

    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn from_str_with_format(text: &str, json: bool) -> Result<Self> {
        let cfg: RunConfig = if json {
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = Self::from_str_with_format(&text, json)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.schema = cfg.schema.map(|s| base.join(s));
        cfg.workspace = base.join(&cfg.workspace);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(0.0..1.0).contains(&self.split.test_fraction) {
            return bad(format!("split.test_fraction must be in [0, 1), got {}", self.split.test_fraction));
        }
        if self.smote.k == 0 {
            return bad("smote.k must be at least 1".into());
        }
        if self.eda.bins == 0 {
            return bad("eda.bins must be at least 1".into());
        }
        let t = self.selection.threshold;
        if !(t > 0.0 && t <= 1.0) {
            return bad(format!("selection.threshold must be in (0, 1], got {t}"));
        }
        self.model_kinds()?;
        Ok(())
    }

    /// Enabled families in configuration order, without duplicates.
    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        let mut out = Vec::new();
        for name in &self.models {
            let kind = ModelKind::from_short_name(name)
                .ok_or_else(|| PipelineError::Config(format!("unknown model `{name}`")))?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        Ok(out)
    }

    /// Schema from file or the built-in default, with the feature override
    /// applied.
    pub fn resolve_schema(&self) -> Result<FlowSchema> {
        let schema = match &self.schema {
            Some(p) => FlowSchema::from_json_file(p)?,
            None => FlowSchema::netflow_default(),
        };
        Ok(match &self.features {
            Some(f) => schema.with_features(f.clone())?,
            None => schema,
        })
    }

    /// SHA-256 over the canonical JSON of every run parameter except paths.
    pub fn config_hash(&self, schema: &FlowSchema) -> Result<String> {
        let fp = Fingerprint {
            schema,
            target: self.target,
            seed: self.seed,
            lenient: self.lenient,
            scale: self.scale,
            split: &self.split,
            smote: &self.smote,
            selection: &self.selection,
            eda: &self.eda,
            models: self.model_kinds()?.iter().map(|k| k.short_name()).collect(),
            hyperparameters: &self.hyperparameters,
        };
        Ok(sha256_hex(serde_json::to_string(&fp).expect("fingerprint serializes").as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "dataset = \"flows.csv\"\n[smote]\nk = 3\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.dataset, dir.path().join("flows.csv"));
        assert_eq!(cfg.workspace, dir.path().join("workspace"));
        assert_eq!(cfg.smote, SmoteSettings { enabled: true, k: 3 });
        assert_eq!(cfg.split.test_fraction, 0.2);
        assert_eq!(cfg.model_kinds().unwrap(), ModelKind::COMPARED.to_vec());
    }

    #[test]
    fn json_matches_toml() {
        let a = RunConfig::from_str_with_format("dataset = \"d.csv\"\nseed = 3\nscale = true\n", false).unwrap();
        let b = RunConfig::from_str_with_format(r#"{"dataset": "d.csv", "seed": 3, "scale": true}"#, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hash_ignores_paths_but_not_parameters() {
        let schema = FlowSchema::netflow_default();
        let a = RunConfig::new("a.csv", "ws1");
        let b = RunConfig::new("elsewhere/b.csv", "ws2");
        assert_eq!(a.config_hash(&schema).unwrap(), b.config_hash(&schema).unwrap());
        let mut c = a.clone();
        c.seed = 8;
        assert_ne!(a.config_hash(&schema).unwrap(), c.config_hash(&schema).unwrap());
        let mut d = a.clone();
        d.hyperparameters.knn.k = 3;
        assert_ne!(a.config_hash(&schema).unwrap(), d.config_hash(&schema).unwrap());
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "dataset = \"d\"\n[split]\ntest_fraction = 1.0\n",
            "dataset = \"d\"\nmodels = [\"svm\"]\n",
            "dataset = \"d\"\n[smote]\nk = 0\n",
            "dataset = \"d\"\nunknown_key = 1\n",
            "seed = 1\n",
        ] {
            assert!(matches!(
                RunConfig::from_str_with_format(text, false),
                Err(PipelineError::Config(_))
            ), "{text}");
        }
    }

    #[test]
    fn hyperparameters_from_toml() {
        let cfg = RunConfig::from_str_with_format(
            "dataset = \"d\"\n[hyperparameters.forest]\nn_trees = 10\n[hyperparameters.knn]\nk = 3\n",
            false,
        )
        .unwrap();
        assert_eq!(cfg.hyperparameters.forest.n_trees, 10);
        assert!(cfg.hyperparameters.forest.bootstrap);
        assert_eq!(cfg.hyperparameters.knn.k, 3);
    }
}
