//! Binary tabular data: schema roles, CSV ingestion, stratification into
//! E-groups and contingency counts extraction.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("schema column `{0}` is missing from the CSV header")]
    MissingColumn(String),
    #[error("CSV column `{0}` is not assigned a role in the schema")]
    UnassignedColumn(String),
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{0}` appears in more than one schema role")]
    RoleOverlap(String),
    #[error("schema must list at least one protected column")]
    EmptyProtected,
    #[error("non-binary cell `{value}` at data row {row}, column `{column}`")]
    NonBinaryCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("data row {row} has {found} cells, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("CSV input has no header row")]
    EmptyInput,
    #[error("column `{0}` already exists")]
    NameCollision(String),
    #[error("combine subset is empty")]
    EmptySubset,
    #[error("column `{0}` is not a protected column")]
    NotProtected(String),
    #[error("unknown column `{0}`")]
    NoSuchColumn(String),
    #[error("row index {0} out of range")]
    RowOutOfRange(usize),
    #[error("invalid schema JSON: {0}")]
    SchemaJson(#[from] serde_json::Error),
}

/// Column role assignment: one outcome column, ordered protected columns,
/// explanatory columns and the remaining (other) columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub outcome: String,
    pub protected: Vec<String>,
    pub explanatory: Vec<String>,
    pub other: Vec<String>,
}

impl Schema {
    pub fn new(
        outcome: impl Into<String>,
        protected: &[&str],
        explanatory: &[&str],
        other: &[&str],
    ) -> Self {
        Schema {
            outcome: outcome.into(),
            protected: protected.iter().map(|s| s.to_string()).collect(),
            explanatory: explanatory.iter().map(|s| s.to_string()).collect(),
            other: other.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Role sets must be pairwise disjoint and the protected list non-empty.
    pub fn validate(&self) -> Result<(), TabularError> {
        if self.protected.is_empty() {
            return Err(TabularError::EmptyProtected);
        }
        let mut seen = HashSet::new();
        for col in self.all_columns() {
            if !seen.insert(col.clone()) {
                return Err(TabularError::RoleOverlap(col));
            }
        }
        Ok(())
    }

    /// All columns in role order: outcome, protected, explanatory, other.
    pub fn all_columns(&self) -> impl Iterator<Item = String> + '_ {
        std::iter::once(self.outcome.clone())
            .chain(self.protected.iter().cloned())
            .chain(self.explanatory.iter().cloned())
            .chain(self.other.iter().cloned())
    }

    pub fn from_json(text: &str) -> Result<Schema, TabularError> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Stable hex digest over the roles that drive adjustment decisions
    /// (outcome, protected order, explanatory order).
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"outcome\x1f");
        hasher.update(self.outcome.as_bytes());
        hasher.update(b"\x1eprotected\x1f");
        for col in &self.protected {
            hasher.update(col.as_bytes());
            hasher.update(b"\x1f");
        }
        hasher.update(b"\x1eexplanatory\x1f");
        for col in &self.explanatory {
            hasher.update(col.as_bytes());
            hasher.update(b"\x1f");
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Immutable table of {0,1} cells with named columns and a role schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    columns: Vec<String>,
    cells: Vec<u8>, // row-major, n_rows * columns.len()
    n_rows: usize,
    schema: Schema,
    index: HashMap<String, usize>,
}

impl BinaryDataset {
    /// Build from in-memory rows. Columns must exactly cover the schema roles.
    pub fn new(
        columns: Vec<String>,
        rows: Vec<Vec<u8>>,
        schema: Schema,
    ) -> Result<Self, TabularError> {
        schema.validate()?;
        check_header(&columns, &schema)?;
        let width = columns.len();
        let mut cells = Vec::with_capacity(rows.len() * width);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(TabularError::RowLength {
                    row: r + 1,
                    expected: width,
                    found: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(TabularError::NonBinaryCell {
                        row: r + 1,
                        column: columns[c].clone(),
                        value: v.to_string(),
                    });
                }
                cells.push(v);
            }
        }
        let index = columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Ok(BinaryDataset {
            n_rows: rows.len(),
            columns,
            cells,
            schema,
            index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.columns.len() + col]
    }

    /// Full column as a bit vector.
    pub fn column(&self, name: &str) -> Result<Vec<u8>, TabularError> {
        let col = self
            .column_index(name)
            .ok_or_else(|| TabularError::NoSuchColumn(name.to_string()))?;
        Ok((0..self.n_rows).map(|r| self.value(r, col)).collect())
    }

    /// Bits of the named columns for one row, in the order given.
    pub fn row_bits(&self, row: usize, names: &[String]) -> Result<Vec<u8>, TabularError> {
        if row >= self.n_rows {
            return Err(TabularError::RowOutOfRange(row));
        }
        names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .map(|c| self.value(row, c))
                    .ok_or_else(|| TabularError::NoSuchColumn(n.clone()))
            })
            .collect()
    }

    /// Serialize back to the CSV wire format (header + 0/1 cells, LF).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in 0..self.n_rows {
            for c in 0..self.columns.len() {
                if c > 0 {
                    out.push(',');
                }
                out.push(if self.value(r, c) == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

fn check_header(columns: &[String], schema: &Schema) -> Result<(), TabularError> {
    let mut seen = HashSet::new();
    for col in columns {
        if !seen.insert(col.as_str()) {
            return Err(TabularError::DuplicateColumn(col.clone()));
        }
    }
    for col in schema.all_columns() {
        if !seen.contains(col.as_str()) {
            return Err(TabularError::MissingColumn(col));
        }
    }
    let roles: HashSet<String> = schema.all_columns().collect();
    for col in columns {
        if !roles.contains(col) {
            return Err(TabularError::UnassignedColumn(col.clone()));
        }
    }
    Ok(())
}

/// One stratum of the explanatory attributes: the rows sharing a full
/// assignment of E-column values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EGroup {
    pub signature: Vec<(String, u8)>,
    pub row_indices: Vec<usize>,
}

impl EGroup {
    pub fn len(&self) -> usize {
        self.row_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_indices.is_empty()
    }

    /// Signature bits in explanatory-column order.
    pub fn signature_bits(&self) -> Vec<u8> {
        self.signature.iter().map(|(_, b)| *b).collect()
    }
}

/// The four outcome x protected contingency counts of one population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountsTable {
    pub f11: u64,
    pub f10: u64,
    pub f01: u64,
    pub f00: u64,
}

impl CountsTable {
    pub fn total(&self) -> u64 {
        self.f11 + self.f10 + self.f01 + self.f00
    }
}

/// Parse CSV text against a schema. Header row first; all cells must be the
/// literal characters 0 or 1; LF or CRLF line endings.
pub fn load_dataset(csv_text: &str, schema: Schema) -> Result<BinaryDataset, TabularError> {
    schema.validate()?;
    let mut lines = csv_text.lines();
    let header = lines.next().ok_or(TabularError::EmptyInput)?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    check_header(&columns, &schema)?;
    let width = columns.len();

    let mut cells = Vec::new();
    let mut n_rows = 0usize;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = lineno + 1; // 1-based data row
        let mut count = 0usize;
        for (c, cell) in line.split(',').enumerate() {
            count += 1;
            if count > width {
                break;
            }
            match cell.trim() {
                "0" => cells.push(0),
                "1" => cells.push(1),
                other => {
                    return Err(TabularError::NonBinaryCell {
                        row,
                        column: columns[c].clone(),
                        value: other.to_string(),
                    })
                }
            }
        }
        if count != width {
            return Err(TabularError::RowLength {
                row,
                expected: width,
                found: count,
            });
        }
        n_rows += 1;
    }

    let index = columns
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    Ok(BinaryDataset {
        columns,
        cells,
        n_rows,
        schema,
        index,
    })
}

/// Partition the dataset into E-groups, ordered by signature descending
/// (all-ones first). An empty explanatory list yields one group holding every
/// row; an empty dataset yields no groups.
pub fn stratify(dataset: &BinaryDataset) -> Vec<EGroup> {
    let e_cols: Vec<usize> = dataset
        .schema
        .explanatory
        .iter()
        .map(|n| dataset.column_index(n).expect("schema validated"))
        .collect();

    let mut buckets: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
    for row in 0..dataset.n_rows {
        let sig: Vec<u8> = e_cols.iter().map(|&c| dataset.value(row, c)).collect();
        buckets.entry(sig).or_default().push(row);
    }

    let mut groups: Vec<(Vec<u8>, Vec<usize>)> = buckets.into_iter().collect();
    groups.sort_by(|a, b| b.0.cmp(&a.0));

    groups
        .into_iter()
        .map(|(bits, rows)| EGroup {
            signature: dataset
                .schema
                .explanatory
                .iter()
                .cloned()
                .zip(bits)
                .collect(),
            row_indices: rows,
        })
        .collect()
}

/// DP-division counts over the given rows: `f_ij` counts rows with
/// outcome `i` and protected value `j`.
pub fn counts_table(
    dataset: &BinaryDataset,
    row_indices: &[usize],
    protected_col: &str,
    outcome_col: &str,
) -> Result<CountsTable, TabularError> {
    let p = dataset
        .column_index(protected_col)
        .ok_or_else(|| TabularError::NoSuchColumn(protected_col.to_string()))?;
    let d = dataset
        .column_index(outcome_col)
        .ok_or_else(|| TabularError::NoSuchColumn(outcome_col.to_string()))?;
    let mut t = CountsTable::default();
    for &row in row_indices {
        if row >= dataset.n_rows {
            return Err(TabularError::RowOutOfRange(row));
        }
        match (dataset.value(row, d), dataset.value(row, p)) {
            (1, 1) => t.f11 += 1,
            (1, 0) => t.f10 += 1,
            (0, 1) => t.f01 += 1,
            _ => t.f00 += 1,
        }
    }
    Ok(t)
}

/// Counts where the outcome comes from an external bit vector (predictions)
/// instead of a dataset column.
pub fn counts_from_bits(outcome: &[u8], protected: &[u8], row_indices: &[usize]) -> CountsTable {
    let mut t = CountsTable::default();
    for &row in row_indices {
        match (outcome[row], protected[row]) {
            (1, 1) => t.f11 += 1,
            (1, 0) => t.f10 += 1,
            (0, 1) => t.f01 += 1,
            _ => t.f00 += 1,
        }
    }
    t
}

/// Append a combined protected column: 1 iff every column in `subset` is 1.
/// The new column replaces the subset in the returned schema's protected
/// list, at the position of the first replaced entry. The input dataset is
/// unchanged.
pub fn combine_protected(
    dataset: &BinaryDataset,
    subset: &[String],
    new_name: &str,
) -> Result<BinaryDataset, TabularError> {
    if subset.is_empty() {
        return Err(TabularError::EmptySubset);
    }
    for col in subset {
        if !dataset.schema.protected.contains(col) {
            return Err(TabularError::NotProtected(col.clone()));
        }
    }
    if dataset.column_index(new_name).is_some() {
        return Err(TabularError::NameCollision(new_name.to_string()));
    }

    let subset_idx: Vec<usize> = subset
        .iter()
        .map(|n| dataset.column_index(n).expect("checked above"))
        .collect();

    let width = dataset.columns.len();
    let mut cells = Vec::with_capacity(dataset.n_rows * (width + 1));
    for row in 0..dataset.n_rows {
        cells.extend_from_slice(&dataset.cells[row * width..(row + 1) * width]);
        let combined = subset_idx.iter().all(|&c| dataset.value(row, c) == 1);
        cells.push(combined as u8);
    }

    let mut columns = dataset.columns.clone();
    columns.push(new_name.to_string());

    let mut protected = Vec::with_capacity(dataset.schema.protected.len());
    let mut inserted = false;
    for col in &dataset.schema.protected {
        if subset.contains(col) {
            if !inserted {
                protected.push(new_name.to_string());
                inserted = true;
            }
        } else {
            protected.push(col.clone());
        }
    }

    let schema = Schema {
        outcome: dataset.schema.outcome.clone(),
        protected,
        explanatory: dataset.schema.explanatory.clone(),
        other: dataset.schema.other.clone(),
    };
    let index = columns
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    Ok(BinaryDataset {
        columns,
        cells,
        n_rows: dataset.n_rows,
        schema,
        index,
    })
}
