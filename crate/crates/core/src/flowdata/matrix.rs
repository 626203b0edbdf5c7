use serde::{Deserialize, Serialize};

use super::{ColumnKind, EncoderMap, FlowDataError, FlowSchema, RecordTable, Result, Value};

/// Which column supplies the class labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// The 0/1 `Label` column: 0 = normal, 1 = attack.
    #[default]
    BinaryLabel,
    /// The attack category column, label-encoded.
    AttackCategory,
}

impl Target {
    pub fn column(self, schema: &FlowSchema) -> Result<&str> {
        match self {
            Target::BinaryLabel => Ok(schema.label()),
            Target::AttackCategory => schema.attack().ok_or_else(|| {
                FlowDataError::InvalidSchema("schema declares no attack column".into())
            }),
        }
    }
}

/// Dense row-major design matrix. Every entry is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, n_rows: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * names.len() {
            return Err(FlowDataError::InvalidMatrix(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                n_rows,
                names.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let d = names.len();
            return Err(FlowDataError::NonFinite {
                row: pos / d + 1,
                column: names[pos % d].clone(),
            });
        }
        Ok(Self {
            names,
            n_rows,
            values,
        })
    }

    /// Build from row vectors; all rows must have `names.len()` entries.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(FlowDataError::InvalidMatrix(format!(
                "row {} has {} values, expected {d}",
                bad + 1,
                rows[bad].len()
            )));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(names, rows.len(), values)
    }

    /// Matrix with generated names `x0, x1, ...`.
    pub fn unnamed(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        Self::from_rows((0..d).map(|j| format!("x{j}")).collect(), rows)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            names: self.names.clone(),
            n_rows: indices.len(),
            values,
        }
    }

    pub fn select_columns(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| FlowDataError::UnknownColumn(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = self
            .rows()
            .flat_map(|r| idx.iter().map(move |&j| r[j]))
            .collect();
        Ok(Self {
            names: names.to_vec(),
            n_rows: self.n_rows,
            values,
        })
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn append_rows(&self, rows: &[Vec<f64>]) -> Result<Self> {
        let mut values = self.values.clone();
        for r in rows {
            if r.len() != self.n_cols() {
                return Err(FlowDataError::InvalidMatrix("row width mismatch".into()));
            }
            values.extend_from_slice(r);
        }
        Self::new(self.names.clone(), self.n_rows + rows.len(), values)
    }

    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let d = self.n_cols();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(k % d, v))
            .collect();
        Self::new(self.names.clone(), self.n_rows, values)
    }
}

/// Class codes aligned row-for-row with a [`FeatureMatrix`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    values: Vec<u32>,
    classes: Vec<u32>,
    semantics: Target,
}

impl LabelVector {
    pub fn new(values: Vec<u32>, semantics: Target) -> Result<Self> {
        let mut classes = values.clone();
        classes.sort_unstable();
        classes.dedup();
        if semantics == Target::BinaryLabel && classes.iter().any(|&c| c > 1) {
            return Err(FlowDataError::InvalidLabel {
                row: values.iter().position(|&v| v > 1).unwrap_or(0) + 1,
                value: classes.last().unwrap().to_string(),
            });
        }
        Ok(Self {
            values,
            classes,
            semantics,
        })
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn semantics(&self) -> Target {
        self.semantics
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let values: Vec<u32> = indices.iter().map(|&i| self.values[i]).collect();
        Self::new(values, self.semantics).expect("subset of valid labels")
    }

    pub fn extended(&self, extra: &[u32]) -> Self {
        let mut values = self.values.clone();
        values.extend_from_slice(extra);
        Self::new(values, self.semantics).expect("labels drawn from existing classes")
    }
}

fn encoder_for<'a>(encoders: &'a [EncoderMap], column: &str) -> Option<&'a EncoderMap> {
    encoders.iter().find(|e| e.column() == column)
}

/// Turn a record table into a feature matrix and aligned labels.
///
/// Feature columns come out in `schema.features()` order; encode-flagged and
/// textual columns go through their encoder, other numeric columns are used
/// as-is. Row `i` of the output is row `i` of the table.
pub fn assemble(
    table: &RecordTable,
    schema: &FlowSchema,
    encoders: &[EncoderMap],
    target: Target,
) -> Result<(FeatureMatrix, LabelVector)> {
    let n = table.row_count();
    let d = schema.features().len();
    let mut values = vec![0.0; n * d];
    for (j, name) in schema.features().iter().enumerate() {
        let col = table
            .column_index(name)
            .ok_or_else(|| FlowDataError::UnknownColumn(name.clone()))?;
        let encoder = encoder_for(encoders, name);
        if encoder.is_none() && schema.needs_encoding(name) {
            return Err(FlowDataError::EncoderMissing(name.clone()));
        }
        for (i, row) in table.rows().iter().enumerate() {
            let v = match encoder {
                Some(e) => f64::from(e.code(&row[col])?),
                None => row[col].as_f64().ok_or_else(|| FlowDataError::EncoderMissing(name.clone()))?,
            };
            values[i * d + j] = v;
        }
    }
    let matrix = FeatureMatrix::new(schema.features().to_vec(), n, values)?;

    let target_name = target.column(schema)?;
    let tcol = table
        .column_index(target_name)
        .ok_or_else(|| FlowDataError::UnknownColumn(target_name.to_string()))?;
    let encoder = encoder_for(encoders, target_name);
    let kind = table.columns()[tcol].kind;
    if encoder.is_none() && kind == ColumnKind::Text {
        return Err(FlowDataError::EncoderMissing(target_name.to_string()));
    }
    let labels = table
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| match encoder {
            Some(e) => e.code(&row[tcol]),
            None => label_code(&row[tcol], target, i + 1),
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok((matrix, LabelVector::new(labels, target)?))
}

fn label_code(v: &Value, target: Target, row: usize) -> Result<u32> {
    let invalid = || FlowDataError::InvalidLabel {
        row,
        value: v.to_string(),
    };
    let code = match *v {
        Value::Integer(x) if x >= 0 => u32::try_from(x).map_err(|_| invalid())?,
        Value::Real(x) if x >= 0.0 && x.fract() == 0.0 && x <= f64::from(u32::MAX) => x as u32,
        _ => return Err(invalid()),
    };
    if target == Target::BinaryLabel && code > 1 {
        return Err(invalid());
    }
    Ok(code)
}
