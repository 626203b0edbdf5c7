//! Loading, validating and encoding flow-record CSVs.
//!
//! The default schema is the NetFlow flavour of UNSW-NB15 restricted to the
//! three selected features (`L4_DST_PORT`, `L7_PROTO`, `TCP_FLAGS`) plus the
//! binary `Label` and the textual `Attack` category. Address columns never
//! appear as features; [`FlowSchema::validate`] rejects them outright.

mod encoder;
mod matrix;
mod schema;
mod table;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encoder::{fit_encoder, fit_encoders, EncoderMap};
pub use matrix::{assemble, FeatureMatrix, LabelVector, Target};
pub use schema::{ColumnSpec, FlowSchema};
pub use table::{load_flow_csv, RecordTable};

#[derive(Debug, Error)]
pub enum FlowDataError {
    #[error("{path}: file is empty, expected a header line")]
    MissingHeader { path: String },
    #[error("column `{0}` is missing from the CSV header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{raw}`")]
    ParseError {
        row: usize,
        column: String,
        raw: String,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("value `{0}` was not seen when the encoder was fitted")]
    UnseenValue(String),
    #[error("no encoder fitted for column `{0}`")]
    EncoderMissing(String),
    #[error("row {row}: label `{value}` is not a binary 0/1 label")]
    InvalidLabel { row: usize, value: String },
    #[error("row {row}, column `{column}`: non-finite value")]
    NonFinite { row: usize, column: String },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("schema file: {0}")]
    SchemaJson(#[from] serde_json::Error),
}

pub type Result<T, E = FlowDataError> = std::result::Result<T, E>;

/// Declared type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Integer,
    Real,
    Text,
}

impl ColumnKind {
    pub fn parse(self, raw: &str) -> Option<Value> {
        match self {
            ColumnKind::Integer => raw.trim().parse().ok().map(Value::Integer),
            ColumnKind::Real => raw.trim().parse().ok().map(Value::Real),
            ColumnKind::Text => Some(Value::Text(raw.to_string())),
        }
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, ColumnKind::Text)
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Integer => "integer",
            ColumnKind::Real => "real",
            ColumnKind::Text => "text",
        })
    }
}

/// Strict rejects malformed rows and unseen categories; lenient skips the
/// rows and sends unseen categories to a shared "unknown" code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[default]
    Strict,
    Lenient,
}

/// One typed cell.
///
/// Ordering is total: integers, then reals (by `total_cmp`), then text, so
/// encoders can sort any column deterministically.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Integer(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Value::Integer(_) => ColumnKind::Integer,
            Value::Real(_) => ColumnKind::Real,
            Value::Text(_) => ColumnKind::Text,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Integer(v) => Some(v as f64),
            Value::Real(v) => Some(v),
            Value::Text(_) => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Integer(_) => 0,
            Value::Real(_) => 1,
            Value::Text(_) => 2,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Integer(a), Value::Integer(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Integer(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Text(v) => f.write_str(v),
        }
    }
}
