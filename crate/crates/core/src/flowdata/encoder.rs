use serde::{Deserialize, Serialize};

use super::{FlowDataError, FlowSchema, Policy, RecordTable, Result, Target, Value};

/// Label encoder for one column: the distinct observed values, sorted
/// ascending, with code = position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EncoderFile")]
pub struct EncoderMap {
    column: String,
    policy: Policy,
    values: Vec<Value>,
}

#[derive(Deserialize)]
struct EncoderFile {
    column: String,
    policy: Policy,
    values: Vec<Value>,
}

impl TryFrom<EncoderFile> for EncoderMap {
    type Error = FlowDataError;

    fn try_from(f: EncoderFile) -> Result<Self> {
        if f.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FlowDataError::InvalidSchema(format!(
                "encoder for `{}` is not strictly ascending",
                f.column
            )));
        }
        Ok(EncoderMap {
            column: f.column,
            policy: f.policy,
            values: f.values,
        })
    }
}

pub fn fit_encoder(table: &RecordTable, column: &str, policy: Policy) -> Result<EncoderMap> {
    let mut values = table.column_values(column).map_err(|_| {
        FlowDataError::UnknownColumn(column.to_string())
    })?;
    values.sort();
    values.dedup();
    Ok(EncoderMap {
        column: column.to_string(),
        policy,
        values,
    })
}

/// Fit every encoder `assemble` needs for `target`: encode-flagged and text
/// features, plus the target column when it is textual.
pub fn fit_encoders(
    table: &RecordTable,
    schema: &FlowSchema,
    target: Target,
    policy: Policy,
) -> Result<Vec<EncoderMap>> {
    let mut out = Vec::new();
    for f in schema.features() {
        if schema.needs_encoding(f) {
            out.push(fit_encoder(table, f, policy)?);
        }
    }
    let target_col = target.column(schema)?;
    if schema.needs_encoding(target_col) && !schema.features().iter().any(|f| f == target_col) {
        out.push(fit_encoder(table, target_col, policy)?);
    }
    Ok(out)
}

impl EncoderMap {
    pub fn column(&self) -> &str {
        &self.column
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    /// Number of fitted codes; also the lenient "unknown" code.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(raw value, code)` pairs in code order.
    pub fn mapping(&self) -> impl Iterator<Item = (&Value, u32)> {
        self.values.iter().zip(0u32..)
    }

    pub fn code(&self, value: &Value) -> Result<u32> {
        match self.values.binary_search(value) {
            Ok(i) => Ok(i as u32),
            Err(_) if self.policy == Policy::Lenient => Ok(self.values.len() as u32),
            Err(_) => Err(FlowDataError::UnseenValue(value.to_string())),
        }
    }

    pub fn encode(&self, values: &[Value]) -> Result<Vec<u32>> {
        values.iter().map(|v| self.code(v)).collect()
    }

    pub fn decode(&self, code: u32) -> Option<&Value> {
        self.values.get(code as usize)
    }
}
