use crate::constellation::DistortedMoments;
use crate::distortion::NormalizedBsCoeffs;
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_part, CMat, CVec, C64};

use super::lemma2::{lemma2_quartic, lemma2_sextic};

fn conj_row(gt: &CMat, m: usize) -> CVec {
    CVec::from_iterator(gt.ncols(), gt.row(m).iter().map(|x| x.conj()))
}

fn check_third_order(gt: &CMat, bs: &NormalizedBsCoeffs) -> Result<()> {
    if bs.order() > 1 {
        return Err(Error::UnsupportedOrder(format!("closed-form C_zz needs BS order 1, got {}", bs.order())));
    }
    if bs.antennas() != gt.nrows() {
        return Err(Error::Dimension(format!("{} coefficient rows for {} antennas", bs.antennas(), gt.nrows())));
    }
    Ok(())
}

/// `[C_zz]_mn` for third-order BS distortion; `x` holds the conjugated rows of `g̃`.
fn czz_entry(x: &[CVec], a: &[CMat], q: &[CMat], bs: &NormalizedBsCoeffs, chi: &DistortedMoments, m: usize, n: usize) -> C64 {
    let (a0m, a1m) = (bs.get(m, 0), bs.get(m, 1));
    let (a0n, a1n) = (bs.get(n, 0), bs.get(n, 1));
    let form = |mat: &CMat| (x[m].adjoint() * mat * &x[n])[(0, 0)];
    let mut v = a0m * a0n.conj() * x[m].dotc(&x[n]) * chi.chi(2);
    if a1m != C64::new(0.0, 0.0) {
        v += a1m * a0n.conj() * form(&q[m]);
    }
    if a1n != C64::new(0.0, 0.0) {
        v += a0m * a1n.conj() * form(&q[n]);
    }
    if a1m != C64::new(0.0, 0.0) && a1n != C64::new(0.0, 0.0) {
        v += a1m * a1n.conj() * form(&lemma2_sextic(&a[m], &a[n], chi));
    }
    v
}

struct Prepared {
    x: Vec<CVec>,
    a: Vec<CMat>,
    q: Vec<CMat>,
}

fn prepare(gt: &CMat, chi: &DistortedMoments) -> Prepared {
    let x: Vec<CVec> = (0..gt.nrows()).map(|m| conj_row(gt, m)).collect();
    let a: Vec<CMat> = x.iter().map(|v| v * v.adjoint()).collect();
    let q = a.iter().map(|am| lemma2_quartic(am, chi)).collect();
    Prepared { x, a, q }
}

/// `C_zz = E{z z^H}` for third-order BS distortion, `g̃ = g sqrt(η)`.
pub fn czz_matrix(gt: &CMat, bs: &NormalizedBsCoeffs, chi: &DistortedMoments) -> Result<CMat> {
    check_third_order(gt, bs)?;
    let p = prepare(gt, chi);
    let m = gt.nrows();
    let mut out = CMat::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = czz_entry(&p.x, &p.a, &p.q, bs, chi, i, j);
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    Ok(out)
}

/// Diagonal of `C_zz` only.
pub fn czz_diagonal(gt: &CMat, bs: &NormalizedBsCoeffs, chi: &DistortedMoments) -> Result<Vec<f64>> {
    check_third_order(gt, bs)?;
    let p = prepare(gt, chi);
    Ok((0..gt.nrows()).map(|m| czz_entry(&p.x, &p.a, &p.q, bs, chi, m, m).re).collect())
}

/// Relative tolerance on a negative diagonal residue before it is treated as a formula error.
const PSD_SLACK: f64 = 1e-10;

/// `C_μμ = C_zz + σ² I - C_yς C_yς^H`.
pub fn distortion_corr(czz: &CMat, c_eff: &CMat, sigma2: f64) -> Result<CMat> {
    let m = czz.nrows();
    if czz.ncols() != m || c_eff.nrows() != m {
        return Err(Error::Dimension(format!("C_zz {:?} with C_yς {:?}", czz.shape(), c_eff.shape())));
    }
    let mut out = hermitian_part(&(czz + CMat::identity(m, m) * c(sigma2, 0.0) - c_eff * c_eff.adjoint()));
    for i in 0..m {
        let residue = out[(i, i)].re - sigma2;
        if residue < 0.0 {
            if residue < -PSD_SLACK * sigma2 {
                return Err(Error::NotPsd { index: i, residue });
            }
            out[(i, i)] = c(sigma2, 0.0);
        }
        out[(i, i)].im = 0.0;
    }
    Ok(out)
}

/// Diagonal of `C_μμ` from the diagonals of `C_zz` and the rows of `C_yς`.
pub fn distortion_variance(czz_diag: &[f64], c_eff: &CMat, sigma2: f64) -> Result<Vec<f64>> {
    czz_diag
        .iter()
        .enumerate()
        .map(|(m, d)| {
            let v = d + sigma2 - c_eff.row(m).norm_squared();
            let residue = v - sigma2;
            if residue < -PSD_SLACK * sigma2 {
                Err(Error::NotPsd { index: m, residue })
            } else {
                Ok(v.max(sigma2))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bussgang::third::effective_channel_3rd;
    use crate::constellation::{distorted_moments, Constellation};
    use crate::distortion::NormalizedUeCoeffs;
    use crate::linalg::{max_hermitian_defect, rel_err};
    use crate::rng::{complex_normal, Purpose, SeedTree};

    fn instance(seed: u64, m: usize, k: usize) -> CMat {
        let mut rng = SeedTree::new(seed).stream(Purpose::Oracle, 0, 0);
        CMat::from_fn(m, k, |_, _| complex_normal(&mut rng))
    }

    #[test]
    fn linear_bs_structure() {
        let gt = instance(1, 3, 2);
        let a0 = c(0.9, -0.1);
        let bs = NormalizedBsCoeffs { per_antenna: vec![vec![a0, C64::new(0.0, 0.0)]; 3] };
        let chi = DistortedMoments { chi: vec![1.0, 0.8, 1.0, 1.5] };
        let czz = czz_matrix(&gt, &bs, &chi).unwrap();
        let expected = &gt * gt.adjoint() * c(a0.norm_sqr() * 0.8, 0.0);
        assert!(rel_err(&czz, &expected) < 1e-14);
        let diag = czz_diagonal(&gt, &bs, &chi).unwrap();
        for m in 0..3 {
            assert!((diag[m] - a0.norm_sqr() * 0.8 * gt.row(m).norm_squared()).abs() < 1e-13);
        }
    }

    #[test]
    fn hermitian_and_psd_bounds() {
        let gt = instance(2, 4, 3);
        let bs = NormalizedBsCoeffs { per_antenna: vec![vec![c(1.0, 0.0), c(-0.05, -0.01)]; 4] };
        let ue = NormalizedUeCoeffs(vec![c(1.0, 0.0), c(-0.07, 0.01)]);
        for cons in [Constellation::qpsk(), Constellation::gaussian()] {
            let chi = distorted_moments(&cons, &ue);
            let czz = czz_matrix(&gt, &bs, &chi).unwrap();
            assert!(max_hermitian_defect(&czz) < 1e-12);
            let ce = effective_channel_3rd(&gt, &bs, &ue, &cons).unwrap();
            let cmm = distortion_corr(&czz, &ce, 0.01).unwrap();
            let eig = crate::linalg::hermitian_part(&cmm).symmetric_eigenvalues();
            assert!(eig.iter().all(|e| *e > -1e-10));
            for m in 0..4 {
                assert!(cmm[(m, m)].re / 0.01 >= 1.0);
            }
            let dv = distortion_variance(&czz_diagonal(&gt, &bs, &chi).unwrap(), &ce, 0.01).unwrap();
            for m in 0..4 {
                assert!((dv[m] - cmm[(m, m)].re).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_gaussian_residual_is_noise() {
        let gt = instance(3, 3, 3);
        let bs = NormalizedBsCoeffs::identity(3);
        let bs = NormalizedBsCoeffs { per_antenna: bs.per_antenna.into_iter().map(|mut r| { r.push(C64::new(0.0, 0.0)); r }).collect() };
        let ue = NormalizedUeCoeffs::identity();
        let cons = Constellation::gaussian();
        let chi = distorted_moments(&cons, &ue);
        let ce = effective_channel_3rd(&gt, &bs, &ue, &cons).unwrap();
        let cmm = distortion_corr(&czz_matrix(&gt, &bs, &chi).unwrap(), &ce, 0.3).unwrap();
        assert!(rel_err(&cmm, &(CMat::identity(3, 3) * c(0.3, 0.0))) < 1e-13);
    }

    #[test]
    fn materially_negative_residue_is_an_error() {
        let czz = CMat::zeros(2, 2);
        let ce = CMat::from_element(2, 1, c(1.0, 0.0));
        assert!(matches!(distortion_corr(&czz, &ce, 0.1), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn higher_order_rejected() {
        let gt = instance(4, 2, 2);
        let bs = NormalizedBsCoeffs { per_antenna: vec![vec![c(1.0, 0.0), c(0.1, 0.0), c(0.01, 0.0)]; 2] };
        let chi = DistortedMoments { chi: vec![1.0; 4] };
        assert!(matches!(czz_matrix(&gt, &bs, &chi), Err(Error::UnsupportedOrder(_))));
    }
}
