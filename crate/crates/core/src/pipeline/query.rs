//! Filter expressions over stage tables.
//!
//! ```text
//! expr    := or
//! or      := and ("OR" and)*
//! and     := unary ("AND" unary)*
//! unary   := "NOT" unary | primary
//! primary := "(" expr ")" | column op literal
//! op      := "==" | "!=" | "<" | "<=" | ">" | ">="
//! literal := number | 'single-quoted string'      ('' escapes a quote)
//! column  := identifier | "double-quoted identifier"
//! ```
//!
//! Keywords are case-insensitive. `AND`/`OR` associate to the left.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::workspace::{Stage, Workspace};
use super::{PipelineError, Result};
use crate::flowdata::{RecordTable, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Literal {
    Int(i64),
    Real(f64),
    Str(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Real(v) => write!(f, "{v:?}"),
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum QueryExpr {
    Cmp { column: String, op: CmpOp, value: Literal },
    And(Box<QueryExpr>, Box<QueryExpr>),
    Or(Box<QueryExpr>, Box<QueryExpr>),
    Not(Box<QueryExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at position {position}: expected {}", expected.join(" or "))]
pub struct SyntaxError {
    /// Byte offset into the query text.
    pub position: usize,
    pub expected: Vec<String>,
}

impl SyntaxError {
    /// The query with a caret under the error position.
    pub fn caret(&self, text: &str) -> String {
        let col = text[..self.position.min(text.len())].chars().count();
        format!("{text}\n{}^", " ".repeat(col))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    Op(CmpOp),
    LParen,
    RParen,
    And,
    Or,
    Not,
    End,
}

fn is_keyword(word: &str) -> Option<Tok> {
    match word.to_ascii_uppercase().as_str() {
        "AND" => Some(Tok::And),
        "OR" => Some(Tok::Or),
        "NOT" => Some(Tok::Not),
        _ => None,
    }
}

fn err(position: usize, expected: &[&str]) -> SyntaxError {
    SyntaxError {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            b'=' | b'!' | b'<' | b'>' => {
                let next = bytes.get(i + 1).copied();
                let (op, len) = match (c, next) {
                    (b'=', Some(b'=')) => (CmpOp::Eq, 2),
                    (b'!', Some(b'=')) => (CmpOp::Ne, 2),
                    (b'<', Some(b'=')) => (CmpOp::Le, 2),
                    (b'>', Some(b'=')) => (CmpOp::Ge, 2),
                    (b'<', _) => (CmpOp::Lt, 1),
                    (b'>', _) => (CmpOp::Gt, 1),
                    _ => return Err(err(start, &["comparison operator"])),
                };
                out.push((start, Tok::Op(op)));
                i += len;
            }
            b'\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match text[i..].find('\'') {
                        None => return Err(err(text.len(), &["closing '"])),
                        Some(off) => {
                            s.push_str(&text[i..i + off]);
                            i += off + 1;
                            if bytes.get(i) == Some(&b'\'') {
                                s.push('\'');
                                i += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                out.push((start, Tok::Str(s)));
            }
            b'"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match text[i..].find('"') {
                        None => return Err(err(text.len(), &["closing \""])),
                        Some(off) => {
                            s.push_str(&text[i..i + off]);
                            i += off + 1;
                            if bytes.get(i) == Some(&b'"') {
                                s.push('"');
                                i += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                out.push((start, Tok::Ident(s)));
            }
            b'-' | b'0'..=b'9' | b'.' => {
                i += 1;
                let mut real = c == b'.';
                while i < bytes.len() {
                    match bytes[i] {
                        b'0'..=b'9' => i += 1,
                        b'.' => {
                            real = true;
                            i += 1;
                        }
                        b'e' | b'E' => {
                            real = true;
                            i += 1;
                            if matches!(bytes.get(i), Some(b'+' | b'-')) {
                                i += 1;
                            }
                        }
                        _ => break,
                    }
                }
                let s = &text[start..i];
                let tok = if real {
                    s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Tok::Real)
                } else {
                    s.parse::<i64>().ok().map(Tok::Int)
                };
                out.push((start, tok.ok_or_else(|| err(start, &["number"]))?));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                out.push((start, is_keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string()))));
            }
            _ => return Err(err(start, &["column", "literal", "operator", "("])),
        }
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn or(&mut self) -> Result<QueryExpr, SyntaxError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            lhs = QueryExpr::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<QueryExpr, SyntaxError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = QueryExpr::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<QueryExpr, SyntaxError> {
        if *self.peek() == Tok::Not {
            self.bump();
            return Ok(QueryExpr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<QueryExpr, SyntaxError> {
        let at = self.offset();
        match self.bump() {
            Tok::LParen => {
                let e = self.or()?;
                let at = self.offset();
                match self.bump() {
                    Tok::RParen => Ok(e),
                    _ => Err(err(at, &[")", "AND", "OR"])),
                }
            }
            Tok::Ident(column) => {
                let at = self.offset();
                let op = match self.bump() {
                    Tok::Op(op) => op,
                    _ => return Err(err(at, &["comparison operator"])),
                };
                let at = self.offset();
                let value = match self.bump() {
                    Tok::Int(v) => Literal::Int(v),
                    Tok::Real(v) => Literal::Real(v),
                    Tok::Str(s) => Literal::Str(s),
                    _ => return Err(err(at, &["number", "string"])),
                };
                Ok(QueryExpr::Cmp { column, op, value })
            }
            _ => Err(err(at, &["column", "NOT", "("])),
        }
    }
}

pub fn parse_query(text: &str) -> Result<QueryExpr, SyntaxError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let e = p.or()?;
    if *p.peek() != Tok::End {
        return Err(err(p.offset(), &["AND", "OR", "end of input"]));
    }
    Ok(e)
}

fn render_ident(name: &str) -> String {
    let plain = name
        .bytes()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == b'_')
        && name.bytes().all(|c| c.is_ascii_alphanumeric() || c == b'_')
        && is_keyword(name).is_none();
    if plain {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

impl QueryExpr {
    fn precedence(&self) -> u8 {
        match self {
            QueryExpr::Or(..) => 1,
            QueryExpr::And(..) => 2,
            QueryExpr::Not(_) => 3,
            QueryExpr::Cmp { .. } => 4,
        }
    }

    fn render_at(&self, min: u8, out: &mut String) {
        let paren = self.precedence() < min;
        if paren {
            out.push('(');
        }
        match self {
            QueryExpr::Cmp { column, op, value } => {
                out.push_str(&format!("{} {} {}", render_ident(column), op.symbol(), value));
            }
            QueryExpr::And(l, r) => {
                l.render_at(2, out);
                out.push_str(" AND ");
                r.render_at(3, out);
            }
            QueryExpr::Or(l, r) => {
                l.render_at(1, out);
                out.push_str(" OR ");
                r.render_at(2, out);
            }
            QueryExpr::Not(e) => {
                out.push_str("NOT ");
                e.render_at(3, out);
            }
        }
        if paren {
            out.push(')');
        }
    }

    /// Canonical text with the fewest parentheses that parse back to `self`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_at(0, &mut s);
        s
    }

    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            QueryExpr::Cmp { column, .. } => out.push(column),
            QueryExpr::And(l, r) | QueryExpr::Or(l, r) => {
                l.collect_columns(out);
                r.collect_columns(out);
            }
            QueryExpr::Not(e) => e.collect_columns(out),
        }
    }
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

enum Bound {
    Cmp { col: usize, op: CmpOp, value: Literal },
    And(Box<Bound>, Box<Bound>),
    Or(Box<Bound>, Box<Bound>),
    Not(Box<Bound>),
}

fn bind(expr: &QueryExpr, table: &RecordTable) -> Result<Bound> {
    Ok(match expr {
        QueryExpr::Cmp { column, op, value } => {
            let col = table
                .column_index(column)
                .ok_or_else(|| PipelineError::UnknownColumn(column.clone()))?;
            let numeric = table.columns()[col].kind.is_numeric();
            if numeric == matches!(value, Literal::Str(_)) {
                return Err(PipelineError::TypeMismatch {
                    column: column.clone(),
                    literal: value.to_string(),
                });
            }
            Bound::Cmp {
                col,
                op: *op,
                value: value.clone(),
            }
        }
        QueryExpr::And(l, r) => Bound::And(Box::new(bind(l, table)?), Box::new(bind(r, table)?)),
        QueryExpr::Or(l, r) => Bound::Or(Box::new(bind(l, table)?), Box::new(bind(r, table)?)),
        QueryExpr::Not(e) => Bound::Not(Box::new(bind(e, table)?)),
    })
}

fn compare(cell: &Value, lit: &Literal) -> Ordering {
    match (cell, lit) {
        (Value::Integer(a), Literal::Int(b)) => a.cmp(b),
        (Value::Text(a), Literal::Str(b)) => a.as_str().cmp(b.as_str()),
        (Value::Integer(a), Literal::Real(b)) => (*a as f64).total_cmp(b),
        (Value::Real(a), Literal::Int(b)) => a.total_cmp(&(*b as f64)),
        (Value::Real(a), Literal::Real(b)) => a.total_cmp(b),
        _ => unreachable!("bound comparisons are type-checked"),
    }
}

impl Bound {
    fn eval(&self, row: &[Value]) -> bool {
        match self {
            Bound::Cmp { col, op, value } => op.holds(compare(&row[*col], value)),
            Bound::And(l, r) => l.eval(row) && r.eval(row),
            Bound::Or(l, r) => l.eval(row) || r.eval(row),
            Bound::Not(e) => !e.eval(row),
        }
    }
}

/// Indices of rows satisfying `expr`, in table order.
pub fn filter_rows(table: &RecordTable, expr: &QueryExpr) -> Result<Vec<usize>> {
    let bound = bind(expr, table)?;
    Ok(table
        .rows()
        .iter()
        .enumerate()
        .filter(|(_, r)| bound.eval(r))
        .map(|(i, _)| i)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub table: RecordTable,
    pub count: usize,
}

/// Run `expr` against a manifest-listed CSV in `stage`, keeping the
/// `projection` columns (all when empty). Column kinds are inferred from
/// the file.
pub fn eval_query(
    ws: &Workspace,
    stage: Stage,
    file: &str,
    expr: &QueryExpr,
    projection: &[String],
) -> Result<QueryResult> {
    if ws.manifest(stage)?.get(file).is_none() {
        return Err(PipelineError::NotInManifest {
            stage,
            file: file.to_string(),
        });
    }
    let table = RecordTable::infer_csv(&ws.path(stage, file))?;
    for name in projection {
        if table.column_index(name).is_none() {
            return Err(PipelineError::UnknownColumn(name.clone()));
        }
    }
    let rows = filter_rows(&table, expr)?;
    let selected = table.select_rows(&rows).project(projection)?;
    Ok(QueryResult {
        count: rows.len(),
        table: selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowdata::{ColumnKind, ColumnSpec};
    use proptest::prelude::*;

    fn cmp(column: &str, op: CmpOp, value: Literal) -> QueryExpr {
        QueryExpr::Cmp {
            column: column.into(),
            op,
            value,
        }
    }

    fn and(l: QueryExpr, r: QueryExpr) -> QueryExpr {
        QueryExpr::And(Box::new(l), Box::new(r))
    }

    fn or(l: QueryExpr, r: QueryExpr) -> QueryExpr {
        QueryExpr::Or(Box::new(l), Box::new(r))
    }

    fn fixture() -> RecordTable {
        RecordTable::new(
            vec![
                ColumnSpec::new("L4_DST_PORT", ColumnKind::Integer),
                ColumnSpec::new("L7_PROTO", ColumnKind::Real),
                ColumnSpec::new("Label", ColumnKind::Integer),
                ColumnSpec::new("Attack", ColumnKind::Text),
            ],
            vec![
                vec![Value::Integer(80), Value::Real(7.0), Value::Integer(0), Value::Text("Benign".into())],
                vec![Value::Integer(445), Value::Real(0.0), Value::Integer(1), Value::Text("Exploits".into())],
            ],
        )
        .unwrap()
    }

    #[test]
    fn and_of_comparisons() {
        let e = parse_query("Label == 1 AND L7_PROTO == 6").unwrap();
        assert_eq!(
            e,
            and(cmp("Label", CmpOp::Eq, Literal::Int(1)), cmp("L7_PROTO", CmpOp::Eq, Literal::Int(6)))
        );
    }

    #[test]
    fn precedence() {
        let e = parse_query("a == 1 OR b == 2 AND c == 3").unwrap();
        assert_eq!(
            e,
            or(
                cmp("a", CmpOp::Eq, Literal::Int(1)),
                and(cmp("b", CmpOp::Eq, Literal::Int(2)), cmp("c", CmpOp::Eq, Literal::Int(3)))
            )
        );
        let n = parse_query("not a < 1 and b >= 2").unwrap();
        assert_eq!(
            n,
            and(
                QueryExpr::Not(Box::new(cmp("a", CmpOp::Lt, Literal::Int(1)))),
                cmp("b", CmpOp::Ge, Literal::Int(2))
            )
        );
        assert_eq!(parse_query("(a == 1 OR b == 2) AND c == 3").unwrap().render(), "(a == 1 OR b == 2) AND c == 3");
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(parse_query("").unwrap_err().position, 0);
        let e = parse_query("Label ==").unwrap_err();
        assert_eq!(e.position, 8);
        assert_eq!(e.caret("Label =="), "Label ==\n        ^");
        assert_eq!(parse_query("a = 1").unwrap_err().position, 2);
        assert_eq!(parse_query("a == 1 b").unwrap_err().position, 7);
        assert_eq!(parse_query("(a == 1").unwrap_err().position, 7);
        assert!(parse_query("a == 'open").is_err());
    }

    #[test]
    fn literals() {
        let e = parse_query("Attack == 'it''s' OR x > -2.5e1 OR \"odd col\" != 3").unwrap();
        assert_eq!(e.render(), "Attack == 'it''s' OR x > -25.0 OR \"odd col\" != 3");
    }

    #[test]
    fn filter_fixture() {
        let t = fixture();
        assert_eq!(filter_rows(&t, &parse_query("Label == 1").unwrap()).unwrap(), vec![1]);
        assert_eq!(filter_rows(&t, &parse_query("L4_DST_PORT >= 0").unwrap()).unwrap(), vec![0, 1]);
        assert_eq!(filter_rows(&t, &parse_query("Attack == 'Exploits'").unwrap()).unwrap(), vec![1]);
        assert_eq!(filter_rows(&t, &parse_query("L7_PROTO > 6.5").unwrap()).unwrap(), vec![0]);
    }

    #[test]
    fn bind_errors() {
        let t = fixture();
        assert!(matches!(
            filter_rows(&t, &parse_query("Nope == 1").unwrap()),
            Err(PipelineError::UnknownColumn(c)) if c == "Nope"
        ));
        assert!(matches!(
            filter_rows(&t, &parse_query("Attack == 3").unwrap()),
            Err(PipelineError::TypeMismatch { .. })
        ));
        assert!(matches!(
            filter_rows(&t, &parse_query("Label == 'x'").unwrap()),
            Err(PipelineError::TypeMismatch { .. })
        ));
    }

    fn arb_expr() -> impl Strategy<Value = QueryExpr> {
        let lit = prop_oneof![
            (-1000i64..1000).prop_map(Literal::Int),
            (-1000.0f64..1000.0).prop_map(Literal::Real),
            "[a-z' ]{0,6}".prop_map(Literal::Str),
        ];
        let leaf = (
            prop_oneof![Just("a".to_string()), Just("b_2".to_string()), Just("and".to_string()), Just("x y".to_string())],
            prop::sample::select(CmpOp::ALL.to_vec()),
            lit,
        )
            .prop_map(|(column, op, value)| QueryExpr::Cmp { column, op, value });
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(l, r)| and(l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| or(l, r)),
                inner.prop_map(|e| QueryExpr::Not(Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(e in arb_expr()) {
            prop_assert_eq!(parse_query(&e.render()).unwrap(), e);
        }

        #[test]
        fn negation_partitions(port in 0i64..500, label in 0i64..2) {
            let t = fixture();
            let e = parse_query(&format!("L4_DST_PORT < {port} OR Label == {label}")).unwrap();
            let yes = filter_rows(&t, &e).unwrap();
            let no = filter_rows(&t, &QueryExpr::Not(Box::new(e))).unwrap();
            let mut all: Vec<usize> = yes.iter().chain(&no).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, vec![0, 1]);
            prop_assert!(yes.iter().all(|i| !no.contains(i)));
        }
    }
}
