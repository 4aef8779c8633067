use crate::error::{EvalError, Result};

/// Default forecast horizon in hours.
pub const HORIZON: usize = 48;

/// Row-major `rows × horizon` matrix of hourly values, one row per
/// (building, test instant) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    horizon: usize,
    data: Vec<f64>,
}

impl PredictionMatrix {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(EvalError::Shape("horizon must be at least 1".into()));
        }
        Ok(Self { horizon, data: Vec::new() })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let h = rows.first().map(Vec::len).ok_or_else(|| EvalError::Shape("no rows".into()))?;
        let mut m = Self::new(h)?;
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.horizon {
            return Err(EvalError::Shape(format!("row of length {}, horizon is {}", row.len(), self.horizon)));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// Append all rows of `other`.
    pub fn extend(&mut self, other: &PredictionMatrix) -> Result<()> {
        if other.horizon != self.horizon {
            return Err(EvalError::Shape(format!("horizon {} vs {}", other.horizon, self.horizon)));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.horizon
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.horizon..(i + 1) * self.horizon]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(j).step_by(self.horizon).copied()
    }

    pub(crate) fn check_paired(&self, other: &PredictionMatrix) -> Result<()> {
        if self.horizon != other.horizon || self.data.len() != other.data.len() {
            return Err(EvalError::Shape(format!(
                "{}×{} vs {}×{}",
                self.rows(),
                self.horizon,
                other.rows(),
                other.horizon
            )));
        }
        if self.data.is_empty() {
            return Err(EvalError::Shape("empty prediction matrix".into()));
        }
        Ok(())
    }
}
