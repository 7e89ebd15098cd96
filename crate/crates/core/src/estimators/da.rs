use crate::bussgang::ThirdOrderConstants;
use crate::constellation::Constellation;
use crate::distortion::{NormalizedBsCoeffs, NormalizedUeCoeffs};
use crate::error::{Error, Result};
use crate::linalg::{c, dot_h, solve_hpd, CMat, CVec, C64, ZERO};
use crate::scenario::LargeScale;

use super::dua::PilotPhase;
use super::lemma3::{lemma3_e1, lemma3_e2, lemma3_e3};
use super::PilotBook;

/// First and second order statistics for one antenna.
#[derive(Clone, Debug, PartialEq)]
pub struct AntennaMoments {
    /// `E{y^p_m}`, length `τ_p`.
    pub ybar: CVec,
    /// `E{[C_yς]_{m,:}}`, length `K`.
    pub cbar: CVec,
    /// Row `k` is `C_{[C]_mk, y^p_m}`.
    pub cross: CMat,
    /// `C_{y^p_m y^p_m}`.
    pub cyy: CMat,
    /// `cross * cyy^{-1}`.
    gain: CMat,
}

impl AntennaMoments {
    pub fn new(ybar: CVec, cbar: CVec, cross: CMat, cyy: CMat) -> Result<Self> {
        let gain = solve_hpd(&cyy, &cross.adjoint())?.adjoint();
        Ok(Self { ybar, cbar, cross, cyy, gain })
    }

    /// LMMSE estimate of the effective-channel row from this antenna's pilots.
    pub fn estimate(&self, yp_m: &[C64]) -> CVec {
        let dy = CVec::from_iterator(yp_m.len(), yp_m.iter().zip(self.ybar.iter()).map(|(y, m)| y - m));
        &self.cbar + &self.gain * dy
    }
}

/// Statistics behind the distortion-aware LMMSE estimator of `C_yς`.
#[derive(Clone, Debug, PartialEq)]
pub struct DaLmmseMoments {
    /// `φ̃_n`, one length-`K` vector per pilot symbol.
    pub phi_tilde: Vec<Vec<C64>>,
    /// `h̄_m`, one per antenna.
    pub hbar: Vec<Vec<C64>>,
    /// `(c̃_0m, c̃_1m, c̃_2m)` per antenna.
    pub c_coeffs: Vec<[C64; 3]>,
    pub antennas: Vec<AntennaMoments>,
}

impl DaLmmseMoments {
    /// Estimates every row of `C_yς` from `Y^p` (`M x τ_p`).
    pub fn estimate(&self, yp: &CMat) -> CMat {
        let k = self.phi_tilde.first().map_or(0, |v| v.len());
        let mut out = CMat::zeros(yp.nrows(), k);
        for (m, ant) in self.antennas.iter().enumerate() {
            let row: Vec<C64> = yp.row(m).iter().copied().collect();
            out.row_mut(m).tr_copy_from(&ant.estimate(&row));
        }
        out
    }

    /// Prior mean `C̄_yς` (`M x K`).
    pub fn mean(&self) -> CMat {
        let k = self.phi_tilde.first().map_or(0, |v| v.len());
        CMat::from_fn(self.antennas.len(), k, |m, col| self.antennas[m].cbar[col])
    }
}

/// `[Ĉ]_mk = [C̄]_mk + C_{[C]_mk y} C_yy^{-1} (y^p_m - ȳ^p_m)` for all `k`.
pub fn da_lmmse(yp_m: &[C64], moments: &AntennaMoments) -> CVec {
    moments.estimate(yp_m)
}

pub(crate) fn check_third_order(bs: &NormalizedBsCoeffs, ue: &NormalizedUeCoeffs) -> Result<()> {
    if bs.order() > 1 || ue.order() > 1 {
        return Err(Error::UnsupportedOrder(format!(
            "closed-form DA-LMMSE needs third-order polynomials, got BS {} / UE {}",
            bs.order(),
            ue.order()
        )));
    }
    Ok(())
}

/// Closed-form moments for third-order BS and UE distortion.
pub fn build_da_moments(
    ls: &LargeScale,
    pilots: &PilotBook,
    bs: &NormalizedBsCoeffs,
    ue: &NormalizedUeCoeffs,
    cons: &Constellation,
) -> Result<DaLmmseMoments> {
    check_third_order(bs, ue)?;
    if ls.beta.iter().any(|b| *b <= 0.0) {
        return Err(Error::InvalidArgument("DA-LMMSE needs β_k > 0".into()));
    }
    let (m, k, tau) = (ls.antennas(), ls.users(), pilots.tau());
    let phase = PilotPhase::new(pilots, ue, &ls.power)?;
    let t = ThirdOrderConstants::new(ue, cons)?;
    let phi: Vec<Vec<C64>> = (0..tau)
        .map(|n| (0..k).map(|l| (phase.phi_tilde[(n, l)] * (ls.beta[l] * phase.eta_tilde[l]).sqrt()).conj()).collect())
        .collect();
    let e: Vec<Vec<C64>> = (0..k)
        .map(|l| {
            let mut v = vec![ZERO; k];
            v[l] = c((ls.beta[l] * ls.eta[l]).sqrt(), 0.0);
            v
        })
        .collect();
    let mut hbars = Vec::with_capacity(m);
    let mut coeffs = Vec::with_capacity(m);
    let mut antennas = Vec::with_capacity(m);
    for row in 0..m {
        let hbar: Vec<C64> = (0..k).map(|l| ls.gbar[(row, l)] / ls.beta[l].sqrt()).collect();
        let (a0, a1) = (bs.get(row, 0), bs.get(row, 1));
        let c0 = a0 * t.lin;
        let c1 = a1 * t.d1;
        let c2 = a1 * t.lin * t.d2 * 2.0;

        let ybar = CVec::from_iterator(
            tau,
            phi.iter().map(|p| {
                let s = dot_h(p, &hbar);
                a0 * s + a1 * s * s.conj() * s + a1 * s * dot_h(p, p) * 2.0
            }),
        );
        let cbar = CVec::from_iterator(
            k,
            (0..k).map(|col| {
                let eta = ls.eta[col];
                let g = ls.gbar[(row, col)];
                let others: f64 = (0..k)
                    .filter(|&l| l != col)
                    .map(|l| ls.eta[l] * (ls.gbar[(row, l)].norm_sqr() + ls.beta[l]))
                    .sum();
                c0 * eta.sqrt() * g + c1 * eta.sqrt() * g * (eta * g.norm_sqr() + 2.0 * eta * ls.beta[col]) + c2 * eta.sqrt() * g * others
            }),
        );
        let h = &hbar;
        let mut cross = CMat::zeros(k, tau);
        for col in 0..k {
            let ek = &e[col];
            for (n, p) in phi.iter().enumerate() {
                let mut v = c0 * a0.conj() * lemma3_e1(ek, p, h)
                    + c0 * a1.conj() * lemma3_e2(ek, p, p, p, h)
                    + c1 * a0.conj() * lemma3_e2(ek, ek, ek, p, h)
                    + c1 * a1.conj() * lemma3_e3(ek, ek, ek, p, p, p, h);
                for (l, el) in e.iter().enumerate() {
                    if l != col {
                        v += c2 * a0.conj() * lemma3_e2(el, el, ek, p, h) + c2 * a1.conj() * lemma3_e3(el, el, ek, p, p, p, h);
                    }
                }
                cross[(col, n)] = v - cbar[col] * ybar[n].conj();
            }
        }
        let mut cyy = CMat::zeros(tau, tau);
        for (n, pn) in phi.iter().enumerate() {
            for (j, pj) in phi.iter().enumerate().skip(n) {
                let mut v = a0.norm_sqr() * lemma3_e1(pn, pj, h)
                    + a0 * a1.conj() * lemma3_e2(pn, pj, pj, pj, h)
                    + a1 * a0.conj() * lemma3_e2(pn, pn, pn, pj, h)
                    + a1.norm_sqr() * lemma3_e3(pn, pn, pn, pj, pj, pj, h)
                    - ybar[n] * ybar[j].conj();
                if n == j {
                    v = c(v.re + ls.sigma2, 0.0);
                }
                cyy[(n, j)] = v;
                cyy[(j, n)] = v.conj();
            }
        }
        antennas.push(AntennaMoments::new(ybar, cbar, cross, cyy)?);
        hbars.push(hbar);
        coeffs.push([c0, c1, c2]);
    }
    Ok(DaLmmseMoments {
        phi_tilde: phi,
        hbar: hbars,
        c_coeffs: coeffs,
        antennas,
    })
}
