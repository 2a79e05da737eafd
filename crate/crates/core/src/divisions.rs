//! The (predicted outcome, protected attributes, actual outcome) division
//! table of one E-group: 2^(m+2) strata sorted descending, with counterpart
//! indexing for prediction flips.

use thiserror::Error;

use crate::tabular::{BinaryDataset, EGroup, TabularError};

/// Hard cap on the number of protected attributes; the table grows as
/// 2^(m+2).
pub const MAX_PROTECTED: usize = 10;

#[derive(Debug, Error)]
pub enum DivisionError {
    #[error("{0} protected attributes exceed the supported maximum of {MAX_PROTECTED}")]
    TooManyProtected(usize),
    #[error("prediction vector has {found} entries, dataset has {expected} rows")]
    PredictionLength { expected: usize, found: usize },
    #[error("count vector has {found} entries, expected {expected} for m={m}")]
    CountLength {
        m: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

/// Decoded bits of one division: predicted outcome, protected values in
/// schema order, actual outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivisionSignature {
    pub dhat: u8,
    pub p: Vec<u8>,
    pub d: u8,
}

/// Counts of all 2^(m+2) divisions of one E-group, index 0 = all-ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivisionTable {
    m: usize,
    g: Vec<u64>,
}

impl DivisionTable {
    /// Build directly from a count vector of length 2^(m+2).
    pub fn from_counts(m: usize, g: Vec<u64>) -> Result<Self, DivisionError> {
        if m == 0 || m > MAX_PROTECTED {
            return Err(DivisionError::TooManyProtected(m));
        }
        let expected = 1usize << (m + 2);
        if g.len() != expected {
            return Err(DivisionError::CountLength {
                m,
                expected,
                found: g.len(),
            });
        }
        Ok(DivisionTable { m, g })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// 2^(m+2)
    pub fn row_count(&self) -> usize {
        1 << (self.m + 2)
    }

    /// 2^(m+1): size of the predicted-positive block, also the number of
    /// counterpart pairs.
    pub fn pair_count(&self) -> usize {
        1 << (self.m + 1)
    }

    pub fn counts(&self) -> &[u64] {
        &self.g
    }

    pub fn count(&self, i: usize) -> u64 {
        self.g[i]
    }

    pub fn total(&self) -> u64 {
        self.g.iter().sum()
    }

    /// Every signature bit is the complement of the corresponding index bit:
    /// row 0 is all-ones, the last row all-zeros.
    pub fn signature(&self, i: usize) -> DivisionSignature {
        assert!(i < self.row_count(), "division index {i} out of range");
        let m = self.m;
        let dhat = 1 - ((i >> (m + 1)) & 1) as u8;
        let p = (1..=m).map(|p| 1 - ((i >> (m + 1 - p)) & 1) as u8).collect();
        let d = 1 - (i & 1) as u8;
        DivisionSignature { dhat, p, d }
    }

    /// Debug dump: CSV with columns i, dhat, p1..pm, d, g in index order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,dhat");
        for p in 1..=self.m {
            out.push_str(&format!(",p{p}"));
        }
        out.push_str(",d,g\n");
        for i in 0..self.row_count() {
            let sig = self.signature(i);
            out.push_str(&format!("{i},{}", sig.dhat));
            for bit in &sig.p {
                out.push_str(&format!(",{bit}"));
            }
            out.push_str(&format!(",{},{}\n", sig.d, self.g[i]));
        }
        out
    }
}

/// Index of the division identical except for the predicted-outcome bit.
/// Flipping one prediction moves a count between counterparts.
pub fn counterpart(i: usize, m: usize) -> usize {
    let rows = 1usize << (m + 2);
    assert!(i < rows, "division index {i} out of range for m={m}");
    (i + (1 << (m + 1))) % rows
}

/// Number of consecutive divisions sharing the same value of the p-th
/// protected attribute: 2^(m+1-p).
pub fn run_length(p: usize, m: usize) -> usize {
    assert!(p >= 1 && p <= m, "protected index {p} out of range for m={m}");
    1 << (m + 1 - p)
}

/// Value of the p-th protected attribute in division i: 1 when the integer
/// quotient i / l_p is even.
pub fn p_value_of_division(i: usize, p: usize, m: usize) -> u8 {
    let quotient = i / run_length(p, m);
    quotient.is_multiple_of(2) as u8
}

/// Bucket the group's rows into divisions keyed by (prediction, protected
/// bits, actual outcome).
pub fn build_division_table(
    dataset: &BinaryDataset,
    group: &EGroup,
    predictions: &[u8],
) -> Result<DivisionTable, DivisionError> {
    if predictions.len() != dataset.n_rows() {
        return Err(DivisionError::PredictionLength {
            expected: dataset.n_rows(),
            found: predictions.len(),
        });
    }
    let m = dataset.schema().protected.len();
    if m == 0 || m > MAX_PROTECTED {
        return Err(DivisionError::TooManyProtected(m));
    }
    let p_cols: Vec<usize> = dataset
        .schema()
        .protected
        .iter()
        .map(|n| dataset.column_index(n).expect("schema validated"))
        .collect();
    let d_col = dataset
        .column_index(&dataset.schema().outcome)
        .expect("schema validated");

    let mut g = vec![0u64; 1 << (m + 2)];
    for &row in &group.row_indices {
        let dhat = predictions[row] as usize;
        let d = dataset.value(row, d_col) as usize;
        let mut idx = (1 - dhat) << (m + 1);
        for (p, &col) in p_cols.iter().enumerate() {
            let bit = dataset.value(row, col) as usize;
            idx |= (1 - bit) << (m - p); // position m+1-(p+1)
        }
        idx |= 1 - d;
        g[idx] += 1;
    }
    Ok(DivisionTable { m, g })
}
