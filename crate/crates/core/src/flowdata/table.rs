use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{ColumnKind, ColumnSpec, FlowDataError, FlowSchema, Policy, Result, Value};

/// Parsed flow records. Rows are stored in file order and every cell has the
/// kind declared by its column.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordTable {
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<Value>>,
    skipped_rows: usize,
}

/// Read `path`, resolving every schema column by header name.
///
/// Extra columns in the file are ignored. In lenient mode rows that fail to
/// parse are dropped and counted in [`RecordTable::skipped_rows`].
pub fn load_flow_csv(path: &Path, schema: &FlowSchema, policy: Policy) -> Result<RecordTable> {
    let file = File::open(path)?;
    read_flow_csv(BufReader::new(file), schema.columns(), policy, &path.display().to_string())
}

fn open_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader)
}

fn read_flow_csv<R: Read>(
    reader: R,
    columns: &[ColumnSpec],
    policy: Policy,
    origin: &str,
) -> Result<RecordTable> {
    let mut rdr = open_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(FlowDataError::MissingHeader {
            path: origin.to_string(),
        });
    }
    let positions = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h.trim() == c.name)
                .ok_or_else(|| FlowDataError::MissingColumn(c.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut skipped = 0;
    let mut record = csv::StringRecord::new();
    let mut row_no = 0;
    while rdr.read_record(&mut record)? {
        row_no += 1;
        match parse_row(&record, columns, &positions, row_no) {
            Ok(row) => rows.push(row),
            Err(_) if policy == Policy::Lenient => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(RecordTable {
        columns: columns.to_vec(),
        rows,
        skipped_rows: skipped,
    })
}

fn parse_row(
    record: &csv::StringRecord,
    columns: &[ColumnSpec],
    positions: &[usize],
    row_no: usize,
) -> Result<Vec<Value>> {
    columns
        .iter()
        .zip(positions)
        .map(|(col, &pos)| {
            let raw = record.get(pos).unwrap_or("");
            col.kind.parse(raw).ok_or_else(|| FlowDataError::ParseError {
                row: row_no,
                column: col.name.clone(),
                raw: raw.to_string(),
            })
        })
        .collect()
}

fn infer_kind(values: &[&str]) -> ColumnKind {
    if values.iter().all(|v| v.trim().parse::<i64>().is_ok()) {
        ColumnKind::Integer
    } else if values.iter().all(|v| v.trim().parse::<f64>().is_ok()) {
        ColumnKind::Real
    } else {
        ColumnKind::Text
    }
}

impl RecordTable {
    /// Build a table from already-typed rows, checking arity and kinds.
    pub fn new(columns: Vec<ColumnSpec>, rows: Vec<Vec<Value>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(FlowDataError::InvalidSchema(format!(
                    "row {} has {} values, expected {}",
                    i + 1,
                    row.len(),
                    columns.len()
                )));
            }
            for (col, v) in columns.iter().zip(row) {
                if col.kind != v.kind() {
                    return Err(FlowDataError::ParseError {
                        row: i + 1,
                        column: col.name.clone(),
                        raw: v.to_string(),
                    });
                }
            }
        }
        Ok(Self {
            columns,
            rows,
            skipped_rows: 0,
        })
    }

    /// Load every column of a CSV, inferring each column's kind from its
    /// values: integer if all parse as `i64`, real if all parse as `f64`,
    /// text otherwise.
    pub fn infer_csv(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        let mut rdr = open_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.is_empty() {
            return Err(FlowDataError::MissingHeader {
                path: path.display().to_string(),
            });
        }
        let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        let columns = header
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let vals: Vec<&str> = records.iter().map(|r| r.get(j).unwrap_or("")).collect();
                ColumnSpec::new(name.trim(), infer_kind(&vals))
            })
            .collect::<Vec<_>>();
        let positions: Vec<usize> = (0..columns.len()).collect();
        let rows = records
            .iter()
            .enumerate()
            .map(|(i, r)| parse_row(r, &columns, &positions, i + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            columns,
            rows,
            skipped_rows: 0,
        })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn skipped_rows(&self) -> usize {
        self.skipped_rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_values(&self, name: &str) -> Result<Vec<Value>> {
        let j = self
            .column_index(name)
            .ok_or_else(|| FlowDataError::UnknownColumn(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[j].clone()).collect())
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            skipped_rows: 0,
        }
    }

    /// Keep only `names`, in that order. An empty list keeps every column.
    pub fn project(&self, names: &[String]) -> Result<Self> {
        if names.is_empty() {
            return Ok(self.clone());
        }
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| FlowDataError::UnknownColumn(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&j| r[j].clone()).collect())
                .collect(),
            skipped_rows: 0,
        })
    }

    /// Append a column; `values` must have one entry per row.
    pub fn push_column(&mut self, spec: ColumnSpec, values: Vec<Value>) -> Result<()> {
        if values.len() != self.rows.len() {
            return Err(FlowDataError::InvalidSchema(format!(
                "column `{}` has {} values for {} rows",
                spec.name,
                values.len(),
                self.rows.len()
            )));
        }
        if self.column_index(&spec.name).is_some() {
            return Err(FlowDataError::InvalidSchema(format!(
                "duplicate column `{}`",
                spec.name
            )));
        }
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.push(v);
        }
        self.columns.push(spec);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_ROWS: &str = "L4_DST_PORT,L7_PROTO,TCP_FLAGS,Label,Attack\n80,7,25,0,Benign\n53,5,0,1,Exploits\n";

    fn read(text: &str, schema: &FlowSchema, policy: Policy) -> Result<RecordTable> {
        read_flow_csv(text.as_bytes(), schema.columns(), policy, "test.csv")
    }

    fn int_proto_schema() -> FlowSchema {
        let mut cols = FlowSchema::netflow_default().columns().to_vec();
        cols[1].kind = ColumnKind::Integer;
        FlowSchema::new(cols, vec![], "Label".into(), Some("Attack".into()), vec![]).unwrap()
    }

    #[test]
    fn loads_two_row_fixture() {
        let t = read(TWO_ROWS, &FlowSchema::netflow_default(), Policy::Strict).unwrap();
        assert_eq!(t.row_count(), 2);
        assert_eq!(t.rows()[0][0], Value::Integer(80));
        assert_eq!(t.rows()[0][1], Value::Real(7.0));
        assert_eq!(t.rows()[1][4], Value::Text("Exploits".into()));
    }

    #[test]
    fn empty_file_is_missing_header() {
        let err = read("", &FlowSchema::netflow_default(), Policy::Strict).unwrap_err();
        assert!(matches!(err, FlowDataError::MissingHeader { .. }));
    }

    #[test]
    fn missing_column_named() {
        let err = read("L4_DST_PORT,Label\n1,0\n", &FlowSchema::netflow_default(), Policy::Strict)
            .unwrap_err();
        assert!(matches!(err, FlowDataError::MissingColumn(c) if c == "L7_PROTO"));
    }

    #[test]
    fn strict_parse_error_points_at_cell() {
        let text = "L4_DST_PORT,L7_PROTO,TCP_FLAGS,Label,Attack\n80,abc,25,0,Benign\n";
        let err = read(text, &int_proto_schema(), Policy::Strict).unwrap_err();
        match err {
            FlowDataError::ParseError { row, column, raw } => {
                assert_eq!(row, 1);
                assert_eq!(column, "L7_PROTO");
                assert_eq!(raw, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_skips_and_counts() {
        let text = format!("{TWO_ROWS}80,abc,25,0,Benign\n443,7\n");
        let t = read(&text, &int_proto_schema(), Policy::Lenient).unwrap();
        assert_eq!(t.row_count(), 2);
        assert_eq!(t.skipped_rows(), 2);
    }

    #[test]
    fn extra_columns_ignored_and_reordered() {
        let text = "IPV4_SRC_ADDR,Attack,Label,TCP_FLAGS,L7_PROTO,L4_DST_PORT\n10.0.0.1,Benign,0,25,7.5,80\n";
        let t = read(text, &FlowSchema::netflow_default(), Policy::Strict).unwrap();
        assert_eq!(t.columns().len(), 5);
        assert_eq!(t.rows()[0][0], Value::Integer(80));
        assert_eq!(t.rows()[0][1], Value::Real(7.5));
    }

    #[test]
    fn projection_and_selection() {
        let t = read(TWO_ROWS, &FlowSchema::netflow_default(), Policy::Strict).unwrap();
        let p = t.project(&["Attack".into()]).unwrap();
        assert_eq!(p.columns().len(), 1);
        assert!(t.project(&["nope".into()]).is_err());
        let s = t.select_rows(&[1]);
        assert_eq!(s.rows()[0][0], Value::Integer(53));
    }

    #[test]
    fn write_then_reload_is_identical() {
        let schema = FlowSchema::netflow_default();
        let text = "L4_DST_PORT,L7_PROTO,TCP_FLAGS,Label,Attack\n80,7.25,25,0,\"a,b\"\n53,5,0,1,Exploits\n";
        let t = read(text, &schema, Policy::Strict).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = read(std::str::from_utf8(&buf).unwrap(), &schema, Policy::Strict).unwrap();
        assert_eq!(t, back);
    }
}
