use rand::Rng;

use crate::distortion::{apply_poly, NormalizedBsCoeffs};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::rng::complex_normal;
use crate::scenario::LargeScale;

use super::PilotBook;

/// Distorted pilots actually transmitted in one coherence block.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotPhase {
    /// `τ_p x K` distorted pilots `φ̃`.
    pub phi_tilde: CMat,
    /// Power restoring scalings `η̃_k`.
    pub eta_tilde: Vec<f64>,
}

impl PilotPhase {
    pub fn new(pilots: &PilotBook, ue: &crate::distortion::NormalizedUeCoeffs, power: &[f64]) -> Result<Self> {
        let (phi_tilde, eta_tilde) = crate::distortion::distort_pilots(pilots.matrix(), ue, power)?;
        Ok(Self { phi_tilde, eta_tilde })
    }

    pub fn tau(&self) -> usize {
        self.phi_tilde.nrows()
    }

    /// Noise-free antenna input `u_n = sum_k sqrt(η̃_k) φ̃_kn g_k` for one antenna row of `g`.
    pub fn antenna_input(&self, g_row: &[C64]) -> Vec<C64> {
        (0..self.tau())
            .map(|n| {
                g_row
                    .iter()
                    .enumerate()
                    .map(|(k, g)| g * self.phi_tilde[(n, k)] * self.eta_tilde[k].sqrt())
                    .sum()
            })
            .collect()
    }
}

/// Received pilot block `Y^p` (`M x τ_p`) after BS distortion and thermal noise.
pub fn received_pilots<R: Rng + ?Sized>(g: &CMat, bs: &NormalizedBsCoeffs, phase: &PilotPhase, sigma2: f64, rng: &mut R) -> CMat {
    let (m, tau) = (g.nrows(), phase.tau());
    let mut y = CMat::zeros(m, tau);
    let sn = sigma2.sqrt();
    for row in 0..m {
        let g_row: Vec<C64> = g.row(row).iter().copied().collect();
        for (n, u) in phase.antenna_input(&g_row).into_iter().enumerate() {
            y[(row, n)] = apply_poly(bs.antenna(row), u) + complex_normal(rng) * sn;
        }
    }
    y
}

/// Distortion-unaware LMMSE estimate of the physical channels (`M x K`) from `Y^p`.
pub fn dua_lmmse(yp: &CMat, pilots: &PilotBook, ls: &LargeScale) -> Result<CMat> {
    if !pilots.is_orthogonal() {
        return Err(Error::NonOrthogonalPilots);
    }
    let (m, k, tau) = (yp.nrows(), pilots.users(), pilots.tau() as f64);
    if ls.users() != k || ls.antennas() != m || yp.ncols() != pilots.tau() {
        return Err(Error::Dimension(format!("Y^p {:?} for K = {k}, M = {}", yp.shape(), ls.antennas())));
    }
    let mut out = CMat::zeros(m, k);
    for row in 0..m {
        let y: Vec<C64> = yp.row(row).iter().copied().collect();
        let d = pilots.despread(&y);
        for col in 0..k {
            let (p, beta) = (ls.power[col], ls.beta[col]);
            let gbar = ls.gbar[(row, col)];
            let gain = p.sqrt() * beta / (tau * p * beta + ls.sigma2);
            out[(row, col)] = gbar + (d[col] - gbar * (p.sqrt() * tau)) * gain;
        }
    }
    Ok(out)
}

/// Effective-channel estimate implied by a physical-channel estimate: `ã_0 b̃_0 sqrt(η_k) ĝ_km`.
pub fn dua_effective(ghat: &CMat, bs: &NormalizedBsCoeffs, b0: C64, eta: &[f64]) -> CMat {
    CMat::from_fn(ghat.nrows(), ghat.ncols(), |m, k| bs.get(m, 0) * b0 * eta[k].sqrt() * ghat[(m, k)])
}
