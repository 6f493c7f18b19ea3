//! Typed loading of the churn CSV and descriptive statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome class. `Left` is the positive class throughout the toolkit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Stayed,
    Left,
}

impl Label {
    pub fn from_code(code: f64) -> Option<Label> {
        if code == 0.0 {
            Some(Label::Stayed)
        } else if code == 1.0 {
            Some(Label::Left)
        } else {
            None
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Label::Stayed => 0,
            Label::Left => 1,
        }
    }

    pub fn is_left(self) -> bool {
        self == Label::Left
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Stayed => "Stayed",
            Label::Left => "Left",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Stayed" => Ok(Label::Stayed),
            "Left" => Ok(Label::Left),
            other => Err(Error::InvalidInput(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Numeric,
    Categorical,
    Binary,
    Outcome,
    Ignored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_levels: Option<Vec<String>>,
}

impl ColumnSchema {
    pub fn new(name: &str, role: Role) -> Self {
        ColumnSchema {
            name: name.to_string(),
            role,
            allowed_levels: None,
        }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        ColumnSchema {
            name: name.to_string(),
            role: Role::Categorical,
            allowed_levels: Some(levels.iter().map(|s| s.to_string()).collect()),
        }
    }
}

/// Name of the optional leading row counter in the public file.
pub const ROW_NUMBER: &str = "RowNumber";

/// Schema of the public bank-churn file.
pub fn churn_schema() -> Vec<ColumnSchema> {
    use Role::*;
    vec![
        ColumnSchema::new("CustomerId", Ignored),
        ColumnSchema::new("Surname", Ignored),
        ColumnSchema::new("CreditScore", Numeric),
        ColumnSchema::categorical("Geography", &["France", "Germany", "Spain"]),
        ColumnSchema::categorical("Gender", &["Female", "Male"]),
        ColumnSchema::new("Age", Numeric),
        ColumnSchema::new("Tenure", Numeric),
        ColumnSchema::new("Balance", Numeric),
        ColumnSchema::new("NumOfProducts", Numeric),
        ColumnSchema::new("HasCrCard", Binary),
        ColumnSchema::new("IsActiveMember", Binary),
        ColumnSchema::new("EstimatedSalary", Numeric),
        ColumnSchema::new("Exited", Outcome),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Text(Vec<String>),
    Labels(Vec<Label>),
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Text(v) => v.len(),
            ColumnData::Labels(v) => v.len(),
        }
    }

    fn subset(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Text(v) => ColumnData::Text(rows.iter().map(|&i| v[i].clone()).collect()),
            ColumnData::Labels(v) => ColumnData::Labels(rows.iter().map(|&i| v[i]).collect()),
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            ColumnData::Numeric(v) => format!("{}", v[row]),
            ColumnData::Text(v) => v[row].clone(),
            ColumnData::Labels(v) => v[row].code().to_string(),
        }
    }
}

/// The churn records: one column vector per schema entry.
///
/// Ignored columns are retained verbatim so the file can be written back
/// unchanged, but they are never exposed through the modeling accessors.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Vec<ColumnSchema>,
    columns: Vec<ColumnData>,
    n: usize,
}

impl Dataset {
    /// Build a dataset from already-typed columns.
    pub fn from_columns(schema: Vec<ColumnSchema>, columns: Vec<ColumnData>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} schema entries for {} columns",
                schema.len(),
                columns.len()
            )));
        }
        validate_schema(&schema)?;
        let n = columns.first().map(ColumnData::len).unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        for (s, c) in schema.iter().zip(&columns) {
            if c.len() != n {
                return Err(Error::InvalidInput(format!(
                    "column {} has {} rows, expected {n}",
                    s.name,
                    c.len()
                )));
            }
            let ok = match (s.role, c) {
                (Role::Numeric | Role::Binary, ColumnData::Numeric(_)) => true,
                (Role::Categorical | Role::Ignored, ColumnData::Text(_)) => true,
                (Role::Outcome, ColumnData::Numeric(_) | ColumnData::Labels(_)) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "column {} storage does not match role {:?}",
                    s.name, s.role
                )));
            }
        }
        Ok(Dataset { schema, columns, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|c| c.name == name && c.role != Role::Ignored)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column_schema(&self, name: &str) -> Result<&ColumnSchema> {
        Ok(&self.schema[self.index_of(name)?])
    }

    pub fn column(&self, name: &str) -> Result<&ColumnData> {
        Ok(&self.columns[self.index_of(name)?])
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            ColumnData::Numeric(v) => Ok(v),
            _ => Err(Error::InvalidInput(format!("column {name} is not numeric"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<&[String]> {
        match self.column(name)? {
            ColumnData::Text(v) => Ok(v),
            _ => Err(Error::InvalidInput(format!("column {name} is not categorical"))),
        }
    }

    pub fn outcome_name(&self) -> &str {
        // validate_schema guarantees exactly one outcome column
        &self
            .schema
            .iter()
            .find(|c| c.role == Role::Outcome)
            .expect("schema has an outcome column")
            .name
    }

    /// Outcome labels; fails until [`map_outcome_labels`] has been applied.
    pub fn labels(&self) -> Result<&[Label]> {
        match self.column(self.outcome_name())? {
            ColumnData::Labels(v) => Ok(v),
            _ => Err(Error::InvalidInput(
                "outcome has not been mapped to Stayed/Left labels".into(),
            )),
        }
    }

    /// Outcome as 0/1 codes, whether or not labels have been mapped.
    pub fn outcome_codes(&self) -> Vec<f64> {
        match self.column(self.outcome_name()) {
            Ok(ColumnData::Numeric(v)) => v.clone(),
            Ok(ColumnData::Labels(v)) => v.iter().map(|l| l.code() as f64).collect(),
            _ => unreachable!("outcome storage is validated"),
        }
    }

    /// Predictor columns in schema order.
    pub fn predictors(&self) -> impl Iterator<Item = &ColumnSchema> {
        self.schema
            .iter()
            .filter(|c| !matches!(c.role, Role::Ignored | Role::Outcome))
    }

    /// (Stayed, Left) counts.
    pub fn class_counts(&self) -> Result<(usize, usize)> {
        let labels = self.labels()?;
        let left = labels.iter().filter(|l| l.is_left()).count();
        Ok((labels.len() - left, left))
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::InvalidInput(format!(
                "row index {bad} out of range for {} rows",
                self.n
            )));
        }
        Dataset::from_columns(
            self.schema.clone(),
            self.columns.iter().map(|c| c.subset(indices)).collect(),
        )
    }

    /// Write as CSV with the dataset's own column order.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.iter().map(|c| c.name.as_str()))?;
        for row in 0..self.n {
            w.write_record(self.columns.iter().map(|c| c.cell(row)))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(io::BufWriter::new(file))
    }
}

fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    let outcomes = schema.iter().filter(|c| c.role == Role::Outcome).count();
    if outcomes != 1 {
        return Err(Error::InvalidInput(format!(
            "schema must have exactly one outcome column, found {outcomes}"
        )));
    }
    for (i, c) in schema.iter().enumerate() {
        if schema[..i].iter().any(|o| o.name == c.name) {
            return Err(Error::InvalidInput(format!("duplicate column {}", c.name)));
        }
    }
    Ok(())
}

/// Load a CSV file against an explicit schema.
pub fn load_dataset(path: &Path, schema: &[ColumnSchema]) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(io::BufReader::new(file), schema)
}

/// Parse CSV text from any reader against an explicit schema.
///
/// Columns are matched by name; the resulting dataset uses schema order,
/// preceded by `RowNumber` when the file carries one that the schema lacks.
pub fn read_dataset<R: io::Read>(reader: R, schema: &[ColumnSchema]) -> Result<Dataset> {
    validate_schema(schema)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();

    let mut schema = schema.to_vec();
    let has_row_number = header.first().map(String::as_str) == Some(ROW_NUMBER)
        && !schema.iter().any(|c| c.name == ROW_NUMBER);
    if has_row_number {
        schema.insert(0, ColumnSchema::new(ROW_NUMBER, Role::Ignored));
    }
    if header.len() != schema.len() {
        return Err(Error::Header(format!(
            "file has {} columns, schema expects {}",
            header.len(),
            schema.len()
        )));
    }
    let mut positions = Vec::with_capacity(schema.len());
    for c in &schema {
        let pos = header
            .iter()
            .position(|h| *h == c.name)
            .ok_or_else(|| Error::Header(format!("column {} not found in header", c.name)))?;
        positions.push(pos);
    }

    enum Builder {
        Numeric(Vec<f64>),
        Text(Vec<String>),
    }
    let mut builders: Vec<Builder> = schema
        .iter()
        .map(|c| match c.role {
            Role::Numeric | Role::Binary | Role::Outcome => Builder::Numeric(Vec::new()),
            Role::Categorical | Role::Ignored => Builder::Text(Vec::new()),
        })
        .collect();

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for ((c, &pos), b) in schema.iter().zip(&positions).zip(builders.iter_mut()) {
            let cell = record.get(pos).unwrap_or("");
            if c.role != Role::Ignored && (cell.is_empty() || cell == "NA") {
                return Err(Error::Missing {
                    row,
                    column: c.name.clone(),
                });
            }
            match b {
                Builder::Numeric(v) => {
                    let x: f64 = cell.parse().map_err(|_| Error::Parse {
                        row,
                        column: c.name.clone(),
                        value: cell.to_string(),
                    })?;
                    if !x.is_finite() || (c.role == Role::Binary && x != 0.0 && x != 1.0) {
                        return Err(Error::Parse {
                            row,
                            column: c.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    v.push(x);
                }
                Builder::Text(v) => {
                    if let Some(levels) = &c.allowed_levels {
                        if !levels.iter().any(|l| l == cell) {
                            return Err(Error::InvalidValue {
                                row,
                                message: format!("{}: level {cell:?} not allowed", c.name),
                            });
                        }
                    }
                    v.push(cell.to_string());
                }
            }
        }
    }

    let columns = builders
        .into_iter()
        .map(|b| match b {
            Builder::Numeric(v) => ColumnData::Numeric(v),
            Builder::Text(v) => ColumnData::Text(v),
        })
        .collect();
    Dataset::from_columns(schema, columns)
}

/// Replace the 0/1 outcome with Stayed/Left labels (1 → Left).
pub fn map_outcome_labels(ds: &Dataset) -> Result<Dataset> {
    let idx = ds.index_of(ds.outcome_name())?;
    let mapped = match &ds.columns[idx] {
        ColumnData::Labels(_) => return Ok(ds.clone()),
        ColumnData::Numeric(v) => v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                Label::from_code(x).ok_or_else(|| Error::InvalidValue {
                    row: i + 1,
                    message: format!("outcome value {x} is not 0 or 1"),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        ColumnData::Text(_) => unreachable!("outcome storage is validated"),
    };
    let mut out = ds.clone();
    out.columns[idx] = ColumnData::Labels(mapped);
    Ok(out)
}

/// Descriptive statistics for one column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnSummary {
    Numeric {
        n: usize,
        min: f64,
        max: f64,
        mean: f64,
        /// Sample standard deviation (n - 1 denominator).
        std_dev: f64,
    },
    Levels {
        level_counts: BTreeMap<String, usize>,
    },
}

/// Summarize a numeric (min/max/mean/sd) or categorical (level counts) column.
pub fn describe_column(ds: &Dataset, name: &str) -> Result<ColumnSummary> {
    match ds.column(name)? {
        ColumnData::Numeric(v) => Ok(numeric_summary(v)),
        ColumnData::Text(v) => {
            let mut level_counts = BTreeMap::new();
            for s in v {
                *level_counts.entry(s.clone()).or_insert(0) += 1;
            }
            Ok(ColumnSummary::Levels { level_counts })
        }
        ColumnData::Labels(v) => {
            let mut level_counts = BTreeMap::new();
            for l in v {
                *level_counts.entry(l.to_string()).or_insert(0) += 1;
            }
            Ok(ColumnSummary::Levels { level_counts })
        }
    }
}

// Welford's single-pass update.
fn numeric_summary(v: &[f64]) -> ColumnSummary {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (i, &x) in v.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
        min = min.min(x);
        max = max.max(x);
    }
    let std_dev = if v.len() > 1 {
        (m2 / (v.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    ColumnSummary::Numeric {
        n: v.len(),
        // rounding in the running mean can nudge it past the extremes
        min,
        max,
        mean: mean.clamp(min, max),
        std_dev,
    }
}
