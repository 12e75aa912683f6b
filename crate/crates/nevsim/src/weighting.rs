//! Information-entropy weighting over an indicator matrix.
//!
//! The canonical construction: column-sum shares `p_ij = x_ij / sum_i x_ij`,
//! Shannon entropy `e_j = -(1/ln n) * sum_i p_ij ln p_ij` with `0 ln 0 = 0`,
//! and weights `w_j = (1 - e_j) / sum_k (1 - e_k)`. Indicators that vary more
//! across samples carry less entropy and therefore more weight.
//!
//! [`entropy_weights`] accepts any nonnegative finite matrix — the shares are
//! scale-free, so raw and min-max-normalized inputs give identical weights
//! for benefit-oriented columns. [`normalize_matrix`] exists to orient cost
//! columns before weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization orientation per indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Larger is better: `(x - min) / (max - min)`.
    Benefit,
    /// Smaller is better: `(max - x) / (max - min)`.
    Cost,
}

/// An `n x m` matrix of indicator samples with per-column orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorMatrix {
    pub names: Vec<String>,
    pub directions: Vec<Direction>,
    /// Row-major samples; every row has `names.len()` entries.
    pub rows: Vec<Vec<f64>>,
}

impl IndicatorMatrix {
    pub fn new(names: Vec<String>, directions: Vec<Direction>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = names.len();
        if m == 0 {
            return Err(Error::bad_input("matrix needs at least one indicator"));
        }
        if directions.len() != m {
            return Err(Error::bad_input("one direction per indicator required"));
        }
        if rows.len() < 2 {
            return Err(Error::bad_input("matrix needs at least two samples"));
        }
        for row in &rows {
            if row.len() != m {
                return Err(Error::bad_input("ragged matrix row"));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::bad_input("non-finite matrix entry"));
            }
        }
        Ok(IndicatorMatrix {
            names,
            directions,
            rows,
        })
    }

    pub fn samples(&self) -> usize {
        self.rows.len()
    }

    pub fn indicators(&self) -> usize {
        self.names.len()
    }

    fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |row| row[j])
    }

    /// Reads a samples-by-indicators CSV whose header carries the indicator
    /// names. All columns default to Benefit orientation.
    pub fn from_csv<R: std::io::Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
        let names: Vec<String> = reader
            .headers()
            .map_err(|e| Error::bad_input(format!("csv header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::bad_input(format!("csv row: {e}")))?;
            let row: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            rows.push(row.map_err(|e| Error::bad_input(format!("csv value: {e}")))?);
        }
        let directions = vec![Direction::Benefit; names.len()];
        IndicatorMatrix::new(names, directions, rows)
    }
}

/// Min-max-normalized matrix in [0, 1], with constant columns flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Columns whose raw values were constant; they normalize to 0.5.
    pub constant_columns: Vec<usize>,
}

/// Entropy weights plus the per-indicator entropies they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub entropies: Vec<f64>,
    /// Columns carrying no discriminating information (entropy 1).
    pub degenerate_columns: Vec<usize>,
}

impl WeightVector {
    /// Uniform weights; used when every column is degenerate.
    pub fn uniform(m: usize) -> Self {
        WeightVector {
            weights: vec![1.0 / m as f64; m],
            entropies: vec![1.0; m],
            degenerate_columns: (0..m).collect(),
        }
    }
}

/// Min-max normalization respecting each indicator's orientation. Constant
/// columns map to all-0.5 and are flagged rather than rejected.
pub fn normalize_matrix(matrix: &IndicatorMatrix) -> Result<NormalizedMatrix> {
    let n = matrix.samples();
    let m = matrix.indicators();
    let mut rows = vec![vec![0.0; m]; n];
    let mut constant_columns = Vec::new();

    for j in 0..m {
        let min = matrix.column(j).fold(f64::INFINITY, f64::min);
        let max = matrix.column(j).fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        if range == 0.0 {
            constant_columns.push(j);
            for row in rows.iter_mut() {
                row[j] = 0.5;
            }
            continue;
        }
        for (i, value) in matrix.column(j).enumerate() {
            rows[i][j] = match matrix.directions[j] {
                Direction::Benefit => (value - min) / range,
                Direction::Cost => (max - value) / range,
            };
        }
    }

    Ok(NormalizedMatrix {
        names: matrix.names.clone(),
        rows,
        constant_columns,
    })
}

/// Entropy weights over a nonnegative matrix given as rows.
///
/// All-zero columns are treated as uniform shares (entropy 1, weight 0).
/// When every column is degenerate the result falls back to uniform weights
/// with all columns flagged, keeping the operation total.
pub fn entropy_weights(rows: &[Vec<f64>]) -> Result<WeightVector> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::bad_input("entropy weights need at least two samples"));
    }
    let m = rows[0].len();
    if m == 0 {
        return Err(Error::bad_input("entropy weights need at least one column"));
    }
    for row in rows {
        if row.len() != m {
            return Err(Error::bad_input("ragged matrix row"));
        }
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::bad_input(
                "entropy weights require finite nonnegative entries",
            ));
        }
    }

    let ln_n = (n as f64).ln();
    let mut entropies = Vec::with_capacity(m);
    for j in 0..m {
        let column_sum: f64 = rows.iter().map(|row| row[j]).sum();
        let entropy = if column_sum == 0.0 {
            1.0
        } else {
            let mut acc = 0.0;
            for row in rows {
                let p = row[j] / column_sum;
                if p > 0.0 {
                    acc += p * p.ln();
                }
            }
            (-acc / ln_n).clamp(0.0, 1.0)
        };
        entropies.push(entropy);
    }

    let divergences: Vec<f64> = entropies.iter().map(|e| (1.0 - e).max(0.0)).collect();
    let total: f64 = divergences.iter().sum();
    let degenerate_columns: Vec<usize> = entropies
        .iter()
        .enumerate()
        .filter(|(_, e)| **e >= 1.0 - 1e-12)
        .map(|(j, _)| j)
        .collect();

    if total <= 0.0 {
        return Ok(WeightVector::uniform(m));
    }

    Ok(WeightVector {
        weights: divergences.iter().map(|d| d / total).collect(),
        entropies,
        degenerate_columns,
    })
}

/// Orients, normalizes, and weights an indicator matrix in one step.
pub fn weights_for(matrix: &IndicatorMatrix) -> Result<WeightVector> {
    let normalized = normalize_matrix(matrix)?;
    entropy_weights(&normalized.rows)
}
