use std::collections::{BTreeMap, HashSet};
use std::fmt;

use super::KarbError;
use crate::term::{Number, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Num(Number),
    Text(String),
}

impl Value {
    /// Numeric when the whole cell parses as a number.
    pub fn parse(cell: &str) -> Value {
        let cell = cell.trim();
        match Number::parse(cell) {
            Some(n) => Value::Num(n),
            None => Value::Text(cell.to_string()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub features: BTreeMap<String, Value>,
    pub label: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub label_column: String,
    /// Used for record ids when the header has it; otherwise ids are
    /// 1-based row numbers.
    pub id_column: Option<String>,
    pub require_label: bool,
}

impl Default for Schema {
    fn default() -> Self {
        Schema { label_column: "label".into(), id_column: Some("id".into()), require_label: true }
    }
}

pub fn ingest_csv(text: &str, schema: &Schema) -> Result<Vec<Record>, KarbError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> =
        rdr.headers().map_err(|e| KarbError::Csv(e.to_string()))?.iter().map(str::to_string).collect();
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(KarbError::DuplicateHeader(h.clone()));
        }
    }
    let label_at = headers.iter().position(|h| *h == schema.label_column);
    if label_at.is_none() && schema.require_label {
        return Err(KarbError::MissingLabelColumn(schema.label_column.clone()));
    }
    let id_at = schema.id_column.as_ref().and_then(|c| headers.iter().position(|h| h == c));
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| KarbError::Csv(e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(row as u64 + 2);
        if rec.len() != headers.len() {
            return Err(KarbError::Ragged { line, expected: headers.len(), found: rec.len() });
        }
        let mut features = BTreeMap::new();
        let mut label = None;
        for (i, cell) in rec.iter().enumerate() {
            if Some(i) == label_at {
                if cell.is_empty() && !schema.require_label {
                    continue;
                }
                label = Some(cell.parse::<i64>().map_err(|_| KarbError::BadLabel { line, value: cell.to_string() })?);
            } else if Some(i) != id_at {
                features.insert(headers[i].clone(), Value::parse(cell));
            }
        }
        let id = match id_at {
            Some(i) => rec[i].to_string(),
            None => (row + 1).to_string(),
        };
        out.push(Record { id, features, label });
    }
    Ok(out)
}

/// Injective map from arbitrary text to atom names the term parser reads
/// back as constants.
pub fn sanitize(s: &str) -> String {
    if s.is_empty() {
        return "_".into();
    }
    if s == "AND" || s == "OR" {
        return format!("_k{s}");
    }
    let mut out = String::new();
    if s.starts_with(|c: char| c.is_ascii_digit()) {
        out.push_str("_x");
    }
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if c == '_' {
            out.push_str("__");
        } else {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                out.push_str(&format!("_{b:02X}"));
            }
        }
    }
    if crate::term::is_var_name(&out) || out == "O" || out == "P" {
        out.push('_');
    }
    out
}

/// One `Has(feature, value)` fact per feature, in canonical order.
pub fn encode_record(r: &Record) -> Result<Vec<Term>, KarbError> {
    let mut facts = Vec::with_capacity(r.features.len());
    for (name, v) in &r.features {
        if name.is_empty() {
            return Err(KarbError::EmptyFeatureName);
        }
        let value = match v {
            Value::Num(n) => Term::Num(n.clone()),
            Value::Text(s) => Term::atom(&sanitize(s)),
        };
        facts.push(Term::call("Has", vec![Term::atom(&sanitize(name)), value]));
    }
    facts.sort();
    Ok(facts)
}
