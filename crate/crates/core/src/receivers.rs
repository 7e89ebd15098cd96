//! Distortion-aware combining, SINR and SE evaluation, and hard detection.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::distortion::{apply_poly, NormalizedBsCoeffs, NormalizedUeCoeffs};
use crate::error::{Error, Result};
use crate::linalg::{c, solve_hpd, solve_hpd_vec, CMat, CVec, C64, ZERO};
use crate::rng::complex_normal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CombinerKind {
    DaMmse,
    EwDaMmse,
    DaMrc,
    DaRzf,
    /// RZF built from distortion-unaware channel estimates.
    DuaRzf,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 5] = [Self::DaMrc, Self::DaRzf, Self::EwDaMmse, Self::DaMmse, Self::DuaRzf];

    pub fn name(self) -> &'static str {
        match self {
            Self::DaMmse => "da-mmse",
            Self::EwDaMmse => "ew-da-mmse",
            Self::DaMrc => "da-mrc",
            Self::DaRzf => "da-rzf",
            Self::DuaRzf => "dua-rzf",
        }
    }
}

impl fmt::Display for CombinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CombinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown receiver '{s}'")))
    }
}

impl TryFrom<String> for CombinerKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CombinerKind> for String {
    fn from(k: CombinerKind) -> String {
        k.name().to_string()
    }
}

/// Combining vectors as the columns of `V` (`M x K`).
#[derive(Clone, Debug, PartialEq)]
pub struct CombinerSet {
    pub kind: CombinerKind,
    pub v: CMat,
}

/// `SINR_k` for combiner `v` against the true effective channel and distortion correlation.
pub fn sinr(v: &CVec, c_eff: &CMat, cmumu: &CMat, k: usize) -> Result<f64> {
    let proj = c_eff.adjoint() * v;
    let signal = proj[k].norm_sqr();
    let interference: f64 = proj.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, x)| x.norm_sqr()).sum();
    let distortion = (v.adjoint() * cmumu * v)[(0, 0)].re;
    let denom = interference + distortion;
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument("SINR denominator is not positive".into()));
    }
    Ok(signal / denom)
}

/// `E{log2(1 + SINR)}` over the given realizations.
pub fn se_lower_bound(sinrs: &[f64]) -> f64 {
    if sinrs.is_empty() {
        return 0.0;
    }
    sinrs.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / sinrs.len() as f64
}

/// `(C_zz + σ² I - c_k c_k^H)^{-1} c_k`.
pub fn combine_da_mmse(c_eff: &CMat, czz: &CMat, sigma2: f64, k: usize) -> Result<CVec> {
    let m = c_eff.nrows();
    let ck = c_eff.column(k).into_owned();
    let a = czz + CMat::identity(m, m) * c(sigma2, 0.0) - &ck * ck.adjoint();
    solve_hpd_vec(&a, &ck)
}

/// `(diag(C_μμ) + sum_{i != k} c_i c_i^H)^{-1} c_k`.
pub fn combine_ew_da_mmse(c_eff: &CMat, cmumu_diag: &[f64], k: usize) -> Result<CVec> {
    let m = c_eff.nrows();
    if cmumu_diag.len() != m {
        return Err(Error::Dimension(format!("{} variances for {m} antennas", cmumu_diag.len())));
    }
    let mut a = CMat::from_diagonal(&CVec::from_iterator(m, cmumu_diag.iter().map(|d| c(*d, 0.0))));
    for i in 0..c_eff.ncols() {
        if i != k {
            let ci = c_eff.column(i);
            a += ci * ci.adjoint();
        }
    }
    solve_hpd_vec(&a, &c_eff.column(k).into_owned())
}

pub fn combine_da_mrc(c_eff: &CMat, k: usize) -> CVec {
    c_eff.column(k).into_owned()
}

/// `C (C^H C + σ² I)^{-1}`.
pub fn combine_da_rzf(c_eff: &CMat, sigma2: f64) -> Result<CMat> {
    let k = c_eff.ncols();
    let gram = c_eff.adjoint() * c_eff + CMat::identity(k, k) * c(sigma2, 0.0);
    // (G^{-1})^H = G^{-1} for Hermitian G
    Ok(c_eff * solve_hpd(&gram, &CMat::identity(k, k))?)
}

/// Builds all `K` combiners of one kind.
///
/// `czz` is needed for DA-MMSE and `cmumu_diag` for EW-DA-MMSE.
pub fn combiners(kind: CombinerKind, c_eff: &CMat, czz: Option<&CMat>, cmumu_diag: Option<&[f64]>, sigma2: f64) -> Result<CombinerSet> {
    let (m, k) = c_eff.shape();
    let v = match kind {
        CombinerKind::DaMrc => c_eff.clone(),
        CombinerKind::DaRzf | CombinerKind::DuaRzf => combine_da_rzf(c_eff, sigma2)?,
        CombinerKind::DaMmse => {
            let czz = czz.ok_or_else(|| Error::InvalidArgument("DA-MMSE needs C_zz".into()))?;
            let mut v = CMat::zeros(m, k);
            for col in 0..k {
                v.set_column(col, &combine_da_mmse(c_eff, czz, sigma2, col)?);
            }
            v
        }
        CombinerKind::EwDaMmse => {
            let d = cmumu_diag.ok_or_else(|| Error::InvalidArgument("EW-DA-MMSE needs diag(C_μμ)".into()))?;
            let mut v = CMat::zeros(m, k);
            for col in 0..k {
                v.set_column(col, &combine_ew_da_mmse(c_eff, d, col)?);
            }
            v
        }
    };
    Ok(CombinerSet { kind, v })
}

/// Received data block `Y = z(G sqrt(η) υ) + n` (`M x N`) for symbol indices `tx[k][n]`.
pub fn transmit_data<R: Rng + ?Sized>(
    g: &CMat,
    eta: &[f64],
    bs: &NormalizedBsCoeffs,
    ue: &NormalizedUeCoeffs,
    cons: &Constellation,
    tx: &[Vec<usize>],
    sigma2: f64,
    rng: &mut R,
) -> CMat {
    let (m, k) = g.shape();
    let n = tx.first().map_or(0, |t| t.len());
    let s: Vec<Vec<C64>> = (0..k)
        .map(|u| tx[u].iter().map(|&i| ue.apply(cons.symbols()[i]) * eta[u].sqrt()).collect())
        .collect();
    let sn = sigma2.sqrt();
    let mut y = CMat::zeros(m, n);
    for t in 0..n {
        for row in 0..m {
            let u: C64 = (0..k).map(|u| g[(row, u)] * s[u][t]).sum();
            y[(row, t)] = apply_poly(bs.antenna(row), u) + complex_normal(rng) * sn;
        }
    }
    y
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitErrors {
    pub errors: u64,
    pub bits: u64,
}

impl BitErrors {
    pub fn rate(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    pub fn add(&mut self, other: BitErrors) {
        self.errors += other.errors;
        self.bits += other.bits;
    }
}

/// Hard detection of every UE's symbols from `Y` (`M x N`).
///
/// `v_k^H y` is divided by `v_k^H c_k` with `c_k` taken from `c_ref` (the
/// estimated effective channel, or the true one for perfect CSI).
pub fn detect(y: &CMat, v: &CMat, c_ref: &CMat, cons: &Constellation, tx: &[Vec<usize>]) -> Vec<BitErrors> {
    let k = v.ncols();
    let proj = v.adjoint() * y;
    (0..k)
        .map(|u| {
            let gain = v.column(u).dotc(&c_ref.column(u));
            let mut out = BitErrors::default();
            for (t, &sent) in tx[u].iter().enumerate() {
                let z = if gain == ZERO { proj[(u, t)] } else { proj[(u, t)] / gain };
                let got = cons.decide(z);
                out.errors += (cons.labels()[got] ^ cons.labels()[sent]).count_ones() as u64;
                out.bits += cons.bits_per_symbol() as u64;
            }
            out
        })
        .collect()
}
