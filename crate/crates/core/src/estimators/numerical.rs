//! DA-LMMSE statistics by direct numerical integration of the signal model.
//!
//! The closed forms are cross-checked against this route. Gauss-Hermite
//! product rules integrate the polynomial integrands exactly; sampling gives a
//! Monte-Carlo estimate.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::bussgang::{effective_row_3rd, ThirdOrderConstants};
use crate::constellation::Constellation;
use crate::distortion::{apply_poly, NormalizedBsCoeffs, NormalizedUeCoeffs};
use crate::error::Result;
use crate::linalg::{c, CMat, CVec, C64, ZERO};
use crate::rng::complex_normal;
use crate::scenario::LargeScale;

use super::da::{check_third_order, AntennaMoments};
use super::dua::PilotPhase;
use super::PilotBook;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Integration {
    /// Product Gauss-Hermite rule with this many nodes per real dimension.
    GaussHermite(usize),
    /// Plain sample average over this many draws.
    MonteCarlo(usize),
}

/// Nodes and weights for `E{f(x)}`, `x ~ N(0, 1)` (Golub-Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

struct Accumulator {
    y: CVec,
    c: CVec,
    cy: CMat,
    yy: CMat,
    weight: f64,
}

impl Accumulator {
    fn new(k: usize, tau: usize) -> Self {
        Self {
            y: CVec::zeros(tau),
            c: CVec::zeros(k),
            cy: CMat::zeros(k, tau),
            yy: CMat::zeros(tau, tau),
            weight: 0.0,
        }
    }

    fn add(&mut self, w: f64, y: &CVec, cv: &CVec) {
        self.y += y * c(w, 0.0);
        self.c += cv * c(w, 0.0);
        self.cy += cv * y.adjoint() * c(w, 0.0);
        self.yy += y * y.adjoint() * c(w, 0.0);
        self.weight += w;
    }

    fn finish(self, sigma2: f64) -> Result<AntennaMoments> {
        let s = c(1.0 / self.weight, 0.0);
        let ybar = self.y * s;
        let cbar = self.c * s;
        let cross = self.cy * s - &cbar * ybar.adjoint();
        let tau = ybar.len();
        let cyy = self.yy * s - &ybar * ybar.adjoint() + CMat::identity(tau, tau) * c(sigma2, 0.0);
        AntennaMoments::new(ybar, cbar, cross, cyy)
    }
}

/// Per-antenna DA-LMMSE statistics by integrating over the scattered channel.
///
/// Thermal noise enters `C_yy` analytically as `σ² I`.
pub fn build_da_moments_numerical<R: Rng + ?Sized>(
    ls: &LargeScale,
    pilots: &PilotBook,
    bs: &NormalizedBsCoeffs,
    ue: &NormalizedUeCoeffs,
    cons: &Constellation,
    integration: Integration,
    rng: &mut R,
) -> Result<Vec<AntennaMoments>> {
    check_third_order(bs, ue)?;
    let (m, k, tau) = (ls.antennas(), ls.users(), pilots.tau());
    let phase = PilotPhase::new(pilots, ue, &ls.power)?;
    let t = ThirdOrderConstants::new(ue, cons)?;
    let mut acc: Vec<Accumulator> = (0..m).map(|_| Accumulator::new(k, tau)).collect();
    let mut g_row = vec![ZERO; k];
    let mut gt_row = vec![ZERO; k];
    let mut visit = |h: &[C64], w: f64, acc: &mut Vec<Accumulator>| {
        for (row, a) in acc.iter_mut().enumerate() {
            for l in 0..k {
                g_row[l] = ls.gbar[(row, l)] + h[row * k + l] * ls.beta[l].sqrt();
                gt_row[l] = g_row[l] * ls.eta[l].sqrt();
            }
            let coeffs = bs.antenna(row);
            let y = CVec::from_iterator(tau, phase.antenna_input(&g_row).into_iter().map(|u| apply_poly(coeffs, u)));
            let cv = CVec::from_vec(effective_row_3rd(&gt_row, bs.get(row, 0), bs.get(row, 1), &t));
            a.add(w, &y, &cv);
        }
    };
    match integration {
        Integration::MonteCarlo(draws) => {
            let mut h = vec![ZERO; m * k];
            for _ in 0..draws {
                h.iter_mut().for_each(|x| *x = complex_normal(rng));
                visit(&h, 1.0, &mut acc);
            }
        }
        Integration::GaussHermite(n) => {
            // antennas are independent, so one K-dimensional rule serves all rows
            let (x, w) = gauss_hermite(n);
            let dims = 2 * k;
            let total = n.pow(dims as u32);
            let mut idx = vec![0usize; dims];
            let mut h = vec![ZERO; m * k];
            for _ in 0..total {
                let mut weight = 1.0;
                for l in 0..k {
                    let (re, im) = (idx[2 * l], idx[2 * l + 1]);
                    weight *= w[re] * w[im];
                    let v = c(x[re], x[im]) / 2f64.sqrt();
                    for row in 0..m {
                        h[row * k + l] = v;
                    }
                }
                visit(&h, weight, &mut acc);
                for d in idx.iter_mut() {
                    *d += 1;
                    if *d < n {
                        break;
                    }
                    *d = 0;
                }
            }
        }
    }
    acc.into_iter().map(|a| a.finish(ls.sigma2)).collect()
}
