//! Affine LMMSE estimation of the normalised distortion variance `[C_μμ]_mm / σ²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceDomain {
    /// Target is the ratio itself; outputs below 1 are raised to 1.
    Linear,
    /// Target is `log10` of the ratio; outputs below 0 are raised to 0.
    Log,
}

/// Affine map from the feature vector to the variance target, with the floor clamp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineVarianceEstimator {
    pub domain: VarianceDomain,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl AffineVarianceEstimator {
    /// Clamped estimate in the fitted domain.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        let v = self.bias + self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        self.clamp(v)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        match self.domain {
            VarianceDomain::Linear => v.max(1.0),
            VarianceDomain::Log => v.max(0.0),
        }
    }

    /// Estimate of `[C_μμ]_mm / σ²`.
    pub fn predict_ratio(&self, x: &[f64]) -> f64 {
        let v = self.predict_raw(x);
        match self.domain {
            VarianceDomain::Linear => v,
            VarianceDomain::Log => 10f64.powf(v),
        }
    }
}

/// Fits the LMMSE affine estimator from Monte-Carlo draws of `(features, ratio)`.
///
/// `ratios` are `[C_μμ]_mm / σ²`; the log domain fits `log10` of them.
pub fn mc_lmmse_variance(features: &[Vec<f64>], ratios: &[f64], domain: VarianceDomain) -> Result<AffineVarianceEstimator> {
    let n = features.len();
    if n < 2 || ratios.len() != n {
        return Err(Error::InvalidArgument(format!("{n} feature rows for {} targets", ratios.len())));
    }
    let d = features[0].len();
    let target: Vec<f64> = ratios
        .iter()
        .map(|r| match domain {
            VarianceDomain::Linear => *r,
            VarianceDomain::Log => r.log10(),
        })
        .collect();
    let nf = n as f64;
    let mean_x: Vec<f64> = (0..d).map(|j| features.iter().map(|x| x[j]).sum::<f64>() / nf).collect();
    let mean_t = target.iter().sum::<f64>() / nf;
    let mut cxx = DMatrix::<f64>::zeros(d, d);
    let mut ctx = DVector::<f64>::zeros(d);
    for (x, t) in features.iter().zip(&target) {
        let dx = DVector::from_iterator(d, x.iter().zip(&mean_x).map(|(a, b)| a - b));
        cxx += &dx * dx.transpose();
        ctx += &dx * (t - mean_t);
    }
    cxx /= nf;
    ctx /= nf;
    let chol = cxx
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("degenerate feature covariance".into()))?;
    let w = chol.solve(&ctx);
    let bias = mean_t - w.iter().zip(&mean_x).map(|(w, m)| w * m).sum::<f64>();
    Ok(AffineVarianceEstimator {
        domain,
        weights: w.iter().copied().collect(),
        bias,
    })
}
