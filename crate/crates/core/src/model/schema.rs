use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub domain_size: u32,
}

impl Column {
    pub fn numeric(name: impl Into<String>, domain_size: u32) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Numeric,
            domain_size,
        }
    }

    pub fn categorical(name: impl Into<String>, domain_size: u32) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical,
            domain_size,
        }
    }
}

/// Ordered columns of a dictionary-encoded integer table. Values of column
/// `i` lie in `[0, domain_size_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct Schema {
    columns: Vec<Column>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    columns: Vec<Column>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = Error;
    fn try_from(raw: RawSchema) -> Result<Self> {
        Schema::new(raw.columns)
    }
}

impl From<Schema> for RawSchema {
    fn from(s: Schema) -> Self {
        RawSchema { columns: s.columns }
    }
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidSchema("no columns".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate column name {:?}", c.name)));
            }
            if c.domain_size == 0 {
                return Err(Error::InvalidSchema(format!("column {:?} has empty domain", c.name)));
            }
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

/// Row-major integer table conforming to a [`Schema`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Schema,
    values: Vec<u32>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Vec<u32>>) -> Result<Self> {
        let ncols = schema.len();
        let mut values = Vec::with_capacity(rows.len() * ncols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::InvalidRow {
                    row: r,
                    reason: format!("expected {ncols} values, got {}", row.len()),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(schema, values)
    }

    /// Builds a dataset from row-major values (`len = rows * columns`).
    pub fn from_flat(schema: Schema, values: Vec<u32>) -> Result<Self> {
        let ncols = schema.len();
        if !values.len().is_multiple_of(ncols) {
            return Err(Error::InvalidRow {
                row: values.len() / ncols,
                reason: "truncated row".into(),
            });
        }
        for (k, &v) in values.iter().enumerate() {
            let c = schema.column(k % ncols);
            if v >= c.domain_size {
                return Err(Error::InvalidRow {
                    row: k / ncols,
                    reason: format!("value {v} outside domain [0, {}) of {:?}", c.domain_size, c.name),
                });
            }
        }
        Ok(Dataset { schema, values })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        let n = self.schema.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.values.chunks_exact(self.schema.len())
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.schema.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            schema: self.schema.clone(),
            values,
        }
    }
}
