//! Quasi-memoryless odd-order polynomial distortion and backoff normalisation.
//!
//! A polynomial of order `T` maps `x` to `sum_t c_t |x|^{2t} x`. Reference
//! coefficients describe the hardware for inputs of magnitude up to one; the
//! backoff and the expected input power turn them into the normalised
//! coefficients that act on the actual signal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, from_db, CMat, C64, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bs,
    Ue,
}

/// Reference polynomial of one side of the link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwarePolynomial {
    pub side: Side,
    /// `a_0..a_T` (BS) or `b_0..b_R` (UE).
    pub coeffs: Vec<C64>,
    /// Optional per-antenna BS coefficients overriding `coeffs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_antenna: Option<Vec<Vec<C64>>>,
    /// Linear power ratio.
    pub backoff: f64,
}

impl HardwarePolynomial {
    pub fn new(side: Side, coeffs: Vec<C64>, backoff_db: f64) -> Result<Self> {
        let poly = Self {
            side,
            coeffs,
            per_antenna: None,
            backoff: from_db(backoff_db),
        };
        poly.validate()?;
        Ok(poly)
    }

    /// Ideal hardware: `x -> x`.
    pub fn identity(side: Side) -> Self {
        Self {
            side,
            coeffs: vec![c(1.0, 0.0)],
            per_antenna: None,
            backoff: 1.0,
        }
    }

    /// Shipped third-order set `1, -0.125 - 0.025j` at 7 dB backoff.
    ///
    /// This is a configuration default chosen to give a moderate compression
    /// and phase rotation; it is not a fit to any measured amplifier.
    pub fn default_third_order(side: Side) -> Self {
        Self::new(side, vec![c(1.0, 0.0), c(-0.125, -0.025)], 7.0).expect("valid default")
    }

    pub fn with_per_antenna(mut self, per_antenna: Vec<Vec<C64>>) -> Result<Self> {
        self.per_antenna = Some(per_antenna);
        self.validate()?;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        match &self.per_antenna {
            Some(rows) => rows.iter().map(|r| r.len()).max().unwrap_or(1) - 1,
            None => self.coeffs.len() - 1,
        }
    }

    pub fn backoff_db(&self) -> f64 {
        10.0 * self.backoff.log10()
    }

    pub fn is_identity(&self) -> bool {
        let lin = |cs: &[C64]| cs[0] == c(1.0, 0.0) && cs[1..].iter().all(|x| *x == ZERO);
        lin(&self.coeffs) && self.per_antenna.as_ref().is_none_or(|rows| rows.iter().all(|r| lin(r)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.is_empty() || self.coeffs[0] == ZERO {
            return Err(Error::InvalidArgument("leading polynomial coefficient must be non-zero".into()));
        }
        if !(self.backoff > 0.0) {
            return Err(Error::InvalidArgument("backoff must be positive".into()));
        }
        if let Some(rows) = &self.per_antenna {
            if self.side == Side::Ue {
                return Err(Error::InvalidArgument("UE polynomials are shared by all UEs".into()));
            }
            if rows.iter().any(|r| r.is_empty() || r[0] == ZERO) {
                return Err(Error::InvalidArgument("per-antenna leading coefficient must be non-zero".into()));
            }
        }
        Ok(())
    }

    fn antenna_coeffs(&self, m: usize) -> &[C64] {
        match &self.per_antenna {
            Some(rows) => &rows[m % rows.len()],
            None => &self.coeffs,
        }
    }
}

/// `b̃_r = b_r / backoff^r`, shared by all UEs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedUeCoeffs(pub Vec<C64>);

impl NormalizedUeCoeffs {
    pub fn identity() -> Self {
        Self(vec![c(1.0, 0.0)])
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    /// Coefficient of order `r`, zero beyond the stored order.
    #[inline]
    pub fn get(&self, r: usize) -> C64 {
        self.0.get(r).copied().unwrap_or(ZERO)
    }

    #[inline]
    pub fn apply(&self, x: C64) -> C64 {
        apply_poly(&self.0, x)
    }
}

/// Per-antenna normalised BS coefficients `ã_{tm}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBsCoeffs {
    pub per_antenna: Vec<Vec<C64>>,
}

impl NormalizedBsCoeffs {
    /// Linear receivers on `m` antennas.
    pub fn identity(m: usize) -> Self {
        Self {
            per_antenna: vec![vec![c(1.0, 0.0)]; m],
        }
    }

    pub fn antennas(&self) -> usize {
        self.per_antenna.len()
    }

    pub fn antenna(&self, m: usize) -> &[C64] {
        &self.per_antenna[m]
    }

    pub fn order(&self) -> usize {
        self.per_antenna.iter().map(|r| r.len()).max().unwrap_or(1) - 1
    }

    #[inline]
    pub fn get(&self, m: usize, t: usize) -> C64 {
        self.per_antenna[m].get(t).copied().unwrap_or(ZERO)
    }
}

pub fn normalize_ue(poly: &HardwarePolynomial) -> NormalizedUeCoeffs {
    NormalizedUeCoeffs(
        poly.coeffs
            .iter()
            .enumerate()
            .map(|(r, b)| b / poly.backoff.powi(r as i32))
            .collect(),
    )
}

/// Normalises BS coefficients by `(backoff * E{|u_m|^2})^t` per antenna.
///
/// `input_power[m]` is `sum_k (|ḡ_km|^2 + β_k) p_k`.
pub fn normalize_bs(poly: &HardwarePolynomial, input_power: &[f64]) -> Result<NormalizedBsCoeffs> {
    let per_antenna = input_power
        .iter()
        .enumerate()
        .map(|(m, &pw)| {
            if !(pw > 0.0) {
                return Err(Error::ZeroInputPower(m));
            }
            let scale = poly.backoff * pw;
            Ok(poly
                .antenna_coeffs(m)
                .iter()
                .enumerate()
                .map(|(t, a)| a / scale.powi(t as i32))
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizedBsCoeffs { per_antenna })
}

/// `sum_t coeffs[t] |x|^{2t} x`.
#[inline]
pub fn apply_poly(coeffs: &[C64], x: C64) -> C64 {
    let r2 = x.norm_sqr();
    let mut acc = ZERO;
    let mut pow = 1.0;
    for a in coeffs {
        acc += a * pow;
        pow *= r2;
    }
    acc * x
}

/// Element-wise distortion with per-element coefficient sets.
pub fn apply_poly_vec(coeffs: &NormalizedBsCoeffs, x: &[C64]) -> Vec<C64> {
    x.iter()
        .enumerate()
        .map(|(m, &xm)| apply_poly(coeffs.antenna(m), xm))
        .collect()
}

/// Distorts each UE's pilot and returns the power-restoring scalings `η̃_k`.
///
/// `pilots` is `τ_p x K`; column `k` is the pilot of UE `k`.
pub fn distort_pilots(pilots: &CMat, ue: &NormalizedUeCoeffs, powers: &[f64]) -> Result<(CMat, Vec<f64>)> {
    let tau = pilots.nrows();
    if powers.len() != pilots.ncols() {
        return Err(Error::Dimension(format!("{} powers for {} pilots", powers.len(), pilots.ncols())));
    }
    let distorted = pilots.map(|x| ue.apply(x));
    let etas = (0..pilots.ncols())
        .map(|k| {
            let energy: f64 = distorted.column(k).iter().map(|x| x.norm_sqr()).sum();
            if energy <= 0.0 {
                Err(Error::ZeroEnergyPilot(k))
            } else {
                Ok(tau as f64 * powers[k] / energy)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((distorted, etas))
}
