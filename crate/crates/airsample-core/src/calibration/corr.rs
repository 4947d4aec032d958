//! Pearson correlation maps between sensor-derived columns.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Symmetric Pearson correlation matrix. Entries involving a
/// zero-variance column are flagged as `None`; the diagonal is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major `names.len() x names.len()`.
    pub values: Vec<Option<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.names.len() + j]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("correlation needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("columns have different lengths")]
    RaggedColumns,
    #[error("column '{0}' contains non-finite values")]
    NonFinite(String),
}

/// Pearson correlation of the given columns (pairwise over all rows).
pub fn correlation_matrix(
    columns: &[(String, Vec<f64>)],
) -> Result<CorrelationMatrix, CorrelationError> {
    let p = columns.len();
    let n = columns.first().map(|(_, v)| v.len()).unwrap_or(0);
    if n < 2 {
        return Err(CorrelationError::TooFewRows(n));
    }
    for (name, col) in columns {
        if col.len() != n {
            return Err(CorrelationError::RaggedColumns);
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(CorrelationError::NonFinite(name.clone()));
        }
    }
    let means: Vec<f64> = columns
        .iter()
        .map(|(_, c)| c.iter().sum::<f64>() / n as f64)
        .collect();
    let norms: Vec<f64> = columns
        .iter()
        .zip(&means)
        .map(|((_, c), m)| libm::sqrt(c.iter().map(|v| (v - m) * (v - m)).sum::<f64>()))
        .collect();

    let mut values = vec![None; p * p];
    for i in 0..p {
        values[i * p + i] = Some(1.0);
        for j in (i + 1)..p {
            let entry = if norms[i] == 0.0 || norms[j] == 0.0 {
                None
            } else {
                let dot: f64 = columns[i]
                    .1
                    .iter()
                    .zip(&columns[j].1)
                    .map(|(a, b)| (a - means[i]) * (b - means[j]))
                    .sum();
                Some(dot / (norms[i] * norms[j]))
            };
            values[i * p + j] = entry;
            values[j * p + i] = entry;
        }
    }
    Ok(CorrelationMatrix {
        names: columns.iter().map(|(n, _)| n.clone()).collect(),
        values,
    })
}
