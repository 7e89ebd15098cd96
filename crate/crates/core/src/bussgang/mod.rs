//! Bussgang effective channels, symbol cross-moments and distortion correlations.
//!
//! `g̃ = g sqrt(η)` is passed in wherever a formula needs the power-scaled
//! channel; see [`crate::scenario::scaled_channel`].

mod czz;
mod general;
mod lemma2;
mod moments;
mod third;

pub use czz::{czz_diagonal, czz_matrix, distortion_corr, distortion_variance};
pub use general::{distorted_cross_moment, effective_channel_general};
pub use lemma2::{lemma2_quartic, lemma2_sextic};
pub use moments::{on_lattice, symbol_cross_moments, SymbolCrossMoments};
pub use third::{effective_channel_3rd, lemma1_moment, Lemma1Case};
pub(crate) use third::{effective_row_3rd, ThirdOrderConstants};

use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, DistortedMoments};
use crate::distortion::{NormalizedBsCoeffs, NormalizedUeCoeffs};
use crate::error::Result;
use crate::linalg::CMat;

/// Effective channel and, for third-order systems, the distortion statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveChannelSet {
    pub c: CMat,
    pub czz: Option<CMat>,
    pub cmumu: Option<CMat>,
    pub sigma2: f64,
}

impl EffectiveChannelSet {
    /// Closed forms for third-order BS and UE distortion.
    pub fn third_order(
        gt: &CMat,
        bs: &NormalizedBsCoeffs,
        ue: &NormalizedUeCoeffs,
        cons: &Constellation,
        chi: &DistortedMoments,
        sigma2: f64,
    ) -> Result<Self> {
        let c = effective_channel_3rd(gt, bs, ue, cons)?;
        let czz = czz_matrix(gt, bs, chi)?;
        let cmumu = distortion_corr(&czz, &c, sigma2)?;
        Ok(Self {
            c,
            czz: Some(czz),
            cmumu: Some(cmumu),
            sigma2,
        })
    }

    /// Effective channel only, any order.
    pub fn general(gt: &CMat, bs: &NormalizedBsCoeffs, mom: &SymbolCrossMoments, sigma2: f64) -> Result<Self> {
        Ok(Self {
            c: effective_channel_general(gt, bs, mom)?,
            czz: None,
            cmumu: None,
            sigma2,
        })
    }
}
