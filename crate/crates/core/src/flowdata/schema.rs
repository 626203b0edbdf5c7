use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ColumnKind, FlowDataError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Which columns to read, which of them are model inputs, and which carry
/// the targets.
///
/// On disk this is a JSON object with `columns`, `features`, `label`,
/// `attack` and an optional `encode` list naming the numeric features that
/// are label-encoded anyway. Text features are always encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct FlowSchema {
    columns: Vec<ColumnSpec>,
    features: Vec<String>,
    label: String,
    attack: Option<String>,
    encode: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    columns: Vec<ColumnSpec>,
    features: Vec<String>,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attack: Option<String>,
    #[serde(default)]
    encode: Vec<String>,
}

impl TryFrom<SchemaFile> for FlowSchema {
    type Error = FlowDataError;

    fn try_from(f: SchemaFile) -> Result<Self> {
        FlowSchema::new(f.columns, f.features, f.label, f.attack, f.encode)
    }
}

impl From<FlowSchema> for SchemaFile {
    fn from(s: FlowSchema) -> Self {
        SchemaFile {
            columns: s.columns,
            features: s.features,
            label: s.label,
            attack: s.attack,
            encode: s.encode,
        }
    }
}

fn looks_like_address(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower.contains("ipv4")
        || lower.contains("ipv6")
        || lower.ends_with("_addr")
        || matches!(lower.as_str(), "srcip" | "dstip" | "src_ip" | "dst_ip" | "saddr" | "daddr")
}

impl FlowSchema {
    pub fn new(
        columns: Vec<ColumnSpec>,
        features: Vec<String>,
        label: String,
        attack: Option<String>,
        encode: Vec<String>,
    ) -> Result<Self> {
        let schema = Self {
            columns,
            features,
            label,
            attack,
            encode,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// NetFlow UNSW-NB15 columns with the three selected features, all
    /// label-encoded.
    pub fn netflow_default() -> Self {
        let columns = vec![
            ColumnSpec::new("L4_DST_PORT", ColumnKind::Integer),
            ColumnSpec::new("L7_PROTO", ColumnKind::Real),
            ColumnSpec::new("TCP_FLAGS", ColumnKind::Integer),
            ColumnSpec::new("Label", ColumnKind::Integer),
            ColumnSpec::new("Attack", ColumnKind::Text),
        ];
        let features: Vec<String> = ["L4_DST_PORT", "L7_PROTO", "TCP_FLAGS"]
            .into_iter()
            .map(String::from)
            .collect();
        Self::new(
            columns,
            features.clone(),
            "Label".into(),
            Some("Attack".into()),
            features,
        )
        .expect("built-in schema is valid")
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(FlowDataError::InvalidSchema(format!(
                    "duplicate column `{}`",
                    c.name
                )));
            }
        }
        let known = |name: &str, role: &str| {
            if seen.contains(name) {
                Ok(())
            } else {
                Err(FlowDataError::InvalidSchema(format!(
                    "{role} `{name}` is not a declared column"
                )))
            }
        };
        for f in &self.features {
            known(f, "feature")?;
            if looks_like_address(f) {
                return Err(FlowDataError::InvalidSchema(format!(
                    "address column `{f}` cannot be used as a feature"
                )));
            }
        }
        let mut feature_set = HashSet::new();
        for f in &self.features {
            if !feature_set.insert(f.as_str()) {
                return Err(FlowDataError::InvalidSchema(format!(
                    "feature `{f}` listed twice"
                )));
            }
        }
        known(&self.label, "label")?;
        if let Some(a) = &self.attack {
            known(a, "attack column")?;
        }
        for e in &self.encode {
            if !feature_set.contains(e.as_str()) {
                return Err(FlowDataError::InvalidSchema(format!(
                    "encoded column `{e}` is not a feature"
                )));
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn attack(&self) -> Option<&str> {
        self.attack.as_deref()
    }

    pub fn encoded(&self) -> &[String] {
        &self.encode
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Whether `name` must go through a label encoder before it can enter
    /// the feature matrix.
    pub fn needs_encoding(&self, name: &str) -> bool {
        self.encode.iter().any(|e| e == name)
            || self.column(name).is_some_and(|c| c.kind == ColumnKind::Text)
    }

    /// Same schema with a different feature list (used after correlation
    /// dropping).
    pub fn with_features(&self, features: Vec<String>) -> Result<Self> {
        let encode = self
            .encode
            .iter()
            .filter(|e| features.contains(e))
            .cloned()
            .collect();
        Self::new(
            self.columns.clone(),
            features,
            self.label.clone(),
            self.attack.clone(),
            encode,
        )
    }
}
