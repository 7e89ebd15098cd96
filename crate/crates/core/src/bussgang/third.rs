use crate::constellation::Constellation;
use crate::distortion::{NormalizedBsCoeffs, NormalizedUeCoeffs};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};

/// Index pattern of `E{υ_{l1} υ_{l2}^* υ_{l3} ς_k^*}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lemma1Case {
    /// `l1 = l2 = l3 = k`.
    AllEqual,
    /// `l1 = k != l2 = l3`.
    FirstIsK,
    /// `l3 = k != l1 = l2`.
    LastIsK,
    Otherwise,
}

impl Lemma1Case {
    pub fn classify(l1: usize, l2: usize, l3: usize, k: usize) -> Self {
        if l1 == k && l2 == k && l3 == k {
            Self::AllEqual
        } else if l1 == k && l2 == l3 {
            Self::FirstIsK
        } else if l3 == k && l1 == l2 {
            Self::LastIsK
        } else {
            Self::Otherwise
        }
    }
}

/// Third-order symbol constants shared by the closed forms.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ThirdOrderConstants {
    /// `E{υ ς^*} = b̃_0 + ζ_4 b̃_1`.
    pub lin: C64,
    /// `E{|υ|^2 υ ς^*}`.
    pub d1: C64,
    /// `E{|υ|^2}`.
    pub d2: C64,
}

impl ThirdOrderConstants {
    pub fn new(ue: &NormalizedUeCoeffs, cons: &Constellation) -> Result<Self> {
        if ue.order() > 1 {
            return Err(Error::UnsupportedOrder(format!("UE order {} in a third-order formula", ue.order())));
        }
        let (b0, b1) = (ue.get(0), ue.get(1));
        let z = |l: usize| cons.moment(l);
        let b2 = |r1: usize, r2: usize| ue.get(r1) * ue.get(r2).conj();
        let b3 = |r1: usize, r2: usize, r3: usize| b2(r1, r2) * ue.get(r3);
        let d1 = b3(1, 1, 1) * z(10)?
            + b3(1, 1, 0) * 2.0 * z(8)?
            + b3(1, 0, 1) * z(8)?
            + b3(0, 0, 1) * 2.0 * z(6)?
            + b3(0, 1, 0) * z(6)?
            + b3(0, 0, 0) * z(4)?;
        let d2 = b2(1, 1) * z(6)? + b2(1, 0) * z(4)? + b2(0, 1) * z(4)? + b2(0, 0);
        Ok(Self {
            lin: b0 + b1 * z(4)?,
            d1,
            d2,
        })
    }
}

/// Closed-form `E{υ_{l1} υ_{l2}^* υ_{l3} ς_k^*}` for third-order UE distortion.
pub fn lemma1_moment(case: Lemma1Case, ue: &NormalizedUeCoeffs, cons: &Constellation) -> Result<C64> {
    let t = ThirdOrderConstants::new(ue, cons)?;
    Ok(match case {
        Lemma1Case::AllEqual => t.d1,
        Lemma1Case::FirstIsK | Lemma1Case::LastIsK => t.lin * t.d2,
        Lemma1Case::Otherwise => ZERO,
    })
}

/// Third-order effective channel `C_yς` given `g̃ = g sqrt(η)` (`M x K`).
pub fn effective_channel_3rd(
    gt: &CMat,
    bs: &NormalizedBsCoeffs,
    ue: &NormalizedUeCoeffs,
    cons: &Constellation,
) -> Result<CMat> {
    if bs.order() > 1 {
        return Err(Error::UnsupportedOrder(format!("BS order {} in the third-order channel", bs.order())));
    }
    if bs.antennas() != gt.nrows() {
        return Err(Error::Dimension(format!("{} coefficient rows for {} antennas", bs.antennas(), gt.nrows())));
    }
    let t = ThirdOrderConstants::new(ue, cons)?;
    let (m, k) = gt.shape();
    let mut out = CMat::zeros(m, k);
    let mut row = vec![ZERO; k];
    for r in 0..m {
        row.iter_mut().enumerate().for_each(|(l, x)| *x = gt[(r, l)]);
        for (col, v) in effective_row_3rd(&row, bs.get(r, 0), bs.get(r, 1), &t).into_iter().enumerate() {
            out[(r, col)] = v;
        }
    }
    Ok(out)
}

/// One antenna row of the third-order effective channel.
pub(crate) fn effective_row_3rd(row: &[C64], a0: C64, a1: C64, t: &ThirdOrderConstants) -> Vec<C64> {
    let total: f64 = row.iter().map(|g| g.norm_sqr()).sum();
    row.iter()
        .map(|&g| {
            let own = g.norm_sqr();
            a0 * g * t.lin + a1 * own * g * t.d1 + a1 * g * t.lin * t.d2 * 2.0 * (total - own)
        })
        .collect()
}
