//! Per-antenna input features and the UE ordering that goes with them.

use crate::error::{Error, Result};
use crate::estimators::PilotBook;
use crate::linalg::{c, C64};
use crate::scenario::LargeScale;

/// `3K` network inputs for one antenna, with UEs sorted by descending gain.
///
/// Layout: `Re, Im` of `φ_k^H y^p_m / σ` for each sorted UE, then the gain
/// features `sqrt((β_k + |ḡ_km|^2) η_k / σ²)` in the same order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// `order[j]` is the original index of the UE in sorted slot `j`.
    pub order: Vec<usize>,
}

/// `sqrt((β_k + |ḡ_km|^2) η_k / σ²)` for every UE at antenna `m`.
pub fn gain_features(ls: &LargeScale, m: usize) -> Vec<f64> {
    (0..ls.users())
        .map(|k| ((ls.beta[k] + ls.gbar[(m, k)].norm_sqr()) * ls.eta[k] / ls.sigma2).sqrt())
        .collect()
}

/// Stable sort of UE indices by descending gain.
pub fn gain_order(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|a, b| gains[*b].total_cmp(&gains[*a]));
    order
}

pub fn build_features(yp_m: &[C64], pilots: &PilotBook, gains: &[f64], sigma2: f64) -> Result<FeatureVector> {
    let k = pilots.users();
    if gains.len() != k || yp_m.len() != pilots.tau() {
        return Err(Error::Dimension(format!(
            "{} gains and {} pilot samples for K = {k}, τ = {}",
            gains.len(),
            yp_m.len(),
            pilots.tau()
        )));
    }
    let sigma = sigma2.sqrt();
    let corr = pilots.despread(yp_m);
    let order = gain_order(gains);
    let mut values = Vec::with_capacity(3 * k);
    for &u in &order {
        values.push(corr[u].re / sigma);
        values.push(corr[u].im / sigma);
    }
    values.extend(order.iter().map(|&u| gains[u]));
    Ok(FeatureVector { values, order })
}

impl FeatureVector {
    pub fn users(&self) -> usize {
        self.order.len()
    }

    /// Gain feature of sorted slot `j`.
    pub fn gain(&self, j: usize) -> f64 {
        self.values[2 * self.users() + j]
    }

    /// Reorders per-UE values into sorted-slot order.
    pub fn permute<T: Copy>(&self, per_ue: &[T]) -> Vec<T> {
        self.order.iter().map(|&u| per_ue[u]).collect()
    }

    /// Inverse of [`FeatureVector::permute`].
    pub fn unpermute<T: Copy + Default>(&self, sorted: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); sorted.len()];
        for (j, &u) in self.order.iter().enumerate() {
            out[u] = sorted[j];
        }
        out
    }

    /// Channel-net targets: `Re, Im` of `[C]_mk / (σ s_k)` in sorted order.
    pub fn channel_targets(&self, c_row: &[C64], sigma2: f64) -> Vec<f64> {
        let sigma = sigma2.sqrt();
        self.order
            .iter()
            .enumerate()
            .flat_map(|(j, &u)| {
                let v = c_row[u] / (sigma * self.gain(j).max(f64::MIN_POSITIVE));
                [v.re, v.im]
            })
            .collect()
    }

    /// Inverse of [`FeatureVector::channel_targets`]: effective-channel row in original UE order.
    pub fn channel_row(&self, outputs: &[f64], sigma2: f64) -> Vec<C64> {
        let sigma = sigma2.sqrt();
        let sorted: Vec<C64> = (0..self.users())
            .map(|j| c(outputs[2 * j], outputs[2 * j + 1]) * (sigma * self.gain(j)))
            .collect();
        self.unpermute(&sorted)
    }

    /// Network inputs with each correlator pair divided by its UE's gain feature.
    pub fn gain_relative(&self) -> Vec<f64> {
        gain_relative(&self.values)
    }
}

/// Divides each correlator pair of a `3K` feature row by the matching gain feature.
pub fn gain_relative(values: &[f64]) -> Vec<f64> {
    let k = values.len() / 3;
    let mut v = values.to_vec();
    for j in 0..k {
        let s = values[2 * k + j].max(f64::MIN_POSITIVE);
        v[2 * j] /= s;
        v[2 * j + 1] /= s;
    }
    v
}
