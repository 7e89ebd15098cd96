//! Feature and target scaling fitted on the training set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-mean, unit-variance scaling per column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Zero-variance columns; these are centred but not rescaled.
    pub degenerate: Vec<bool>,
}

/// Affine map of each column's `[min, max]` onto `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub degenerate: Vec<bool>,
}

fn columns(rows: &[&[f64]]) -> Result<usize> {
    let d = rows.first().map(|r| r.len()).ok_or_else(|| Error::InvalidArgument("cannot fit a scaler on no rows".into()))?;
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged rows".into()));
    }
    Ok(d)
}

impl StandardScaler {
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let d = columns(rows)?;
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
        let degenerate = std.iter().zip(&mean).map(|(s, m)| *s <= 1e-12 * m.abs().max(1e-300)).collect();
        Ok(Self { mean, std, degenerate })
    }

    pub fn transform(&self, x: &mut [f64]) {
        for j in 0..x.len() {
            x[j] -= self.mean[j];
            if !self.degenerate[j] {
                x[j] /= self.std[j];
            }
        }
    }

    pub fn inverse(&self, x: &mut [f64]) {
        for j in 0..x.len() {
            if !self.degenerate[j] {
                x[j] *= self.std[j];
            }
            x[j] += self.mean[j];
        }
    }
}

impl MinMaxScaler {
    pub fn fit(rows: &[&[f64]], lo: f64, hi: f64) -> Result<Self> {
        let d = columns(rows)?;
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("empty scaling range [{lo}, {hi}]")));
        }
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in rows {
            for j in 0..d {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        let degenerate = min.iter().zip(&max).map(|(a, b)| !(b > a)).collect();
        Ok(Self { min, max, lo, hi, degenerate })
    }

    pub fn transform(&self, x: &mut [f64]) {
        for j in 0..x.len() {
            if self.degenerate[j] {
                x[j] = 0.5 * (self.lo + self.hi);
            } else {
                x[j] = self.lo + (x[j] - self.min[j]) * (self.hi - self.lo) / (self.max[j] - self.min[j]);
            }
        }
    }

    pub fn inverse(&self, x: &mut [f64]) {
        for j in 0..x.len() {
            if self.degenerate[j] {
                x[j] = self.min[j];
            } else {
                x[j] = self.min[j] + (x[j] - self.lo) * (self.max[j] - self.min[j]) / (self.hi - self.lo);
            }
        }
    }
}

/// Input scaling: standard scaling of the `2K` correlator features, `[0.1, 0.9]` for the `K` gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub correlators: StandardScaler,
    pub gains: MinMaxScaler,
}

pub const MINMAX_LO: f64 = 0.1;
pub const MINMAX_HI: f64 = 0.9;

impl InputScaler {
    pub fn fit(rows: &[&[f64]], users: usize) -> Result<Self> {
        let d = columns(rows)?;
        if d != 3 * users {
            return Err(Error::Dimension(format!("{d} features for K = {users}")));
        }
        let corr: Vec<&[f64]> = rows.iter().map(|r| &r[..2 * users]).collect();
        let gains: Vec<&[f64]> = rows.iter().map(|r| &r[2 * users..]).collect();
        Ok(Self {
            correlators: StandardScaler::fit(&corr)?,
            gains: MinMaxScaler::fit(&gains, MINMAX_LO, MINMAX_HI)?,
        })
    }

    pub fn users(&self) -> usize {
        self.gains.min.len()
    }

    pub fn transform(&self, x: &mut [f64]) {
        let (corr, gains) = x.split_at_mut(2 * self.users());
        self.correlators.transform(corr);
        self.gains.transform(gains);
    }

    pub fn degenerate_features(&self) -> Vec<usize> {
        let k = self.users();
        let a = self.correlators.degenerate.iter().enumerate().filter(|(_, d)| **d).map(|(j, _)| j);
        let b = self.gains.degenerate.iter().enumerate().filter(|(_, d)| **d).map(|(j, _)| 2 * k + j);
        a.chain(b).collect()
    }
}
