//! Confusion matrices and frequency-weighted f-measure.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("confusion matrix has no samples")]
    Empty,
    #[error("cannot combine confusion matrices of sizes {0} and {1}")]
    SizeMismatch(usize, usize),
}

/// Square count matrix. Rows are the actual action, columns the prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    m: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            counts: vec![0; m * m],
        }
    }

    /// Builds from rows of actual-class counts.
    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let m = rows.len();
        let mut cm = Self::new(m);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), m, "confusion matrix must be square");
            cm.counts[i * m..(i + 1) * m].copy_from_slice(row);
        }
        cm
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn add(&mut self, actual: usize, predicted: usize) {
        self.counts[actual * self.m + predicted] += 1;
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.m + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.m.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if other.m != self.m {
            return Err(MetricsError::SizeMismatch(self.m, other.m));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.m).map(|j| self.get(c, j)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.m).map(|i| self.get(i, c)).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.m).map(|c| self.get(c, c)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.correct() == self.total()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f_measure: Vec<f64>,
    /// Per-class f-measure weighted by how often the class was actually played.
    pub weighted_f: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall, F and the weighted f-measure. Zero
/// denominators give 0 for that class.
pub fn metrics_from_confusion(a: &ConfusionMatrix) -> Result<Metrics, MetricsError> {
    let total = a.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let m = a.size();
    let precision: Vec<f64> = (0..m).map(|c| ratio(a.get(c, c), a.col_sum(c))).collect();
    let recall: Vec<f64> = (0..m).map(|c| ratio(a.get(c, c), a.row_sum(c))).collect();
    let f_measure: Vec<f64> = precision
        .iter()
        .zip(&recall)
        .map(|(&p, &r)| {
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        })
        .collect();
    let weighted: f64 = (0..m).map(|c| a.row_sum(c) as f64 * f_measure[c]).sum();
    Ok(Metrics {
        precision,
        recall,
        f_measure,
        weighted_f: weighted / total as f64,
        accuracy: a.correct() as f64 / total as f64,
    })
}
