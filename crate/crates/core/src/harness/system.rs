//! Shared per-setup and per-realization simulation state.

use rand::Rng;

use super::config::ExperimentConfig;
use crate::bussgang::{czz_diagonal, distortion_variance, effective_channel_3rd, symbol_cross_moments, EffectiveChannelSet};
use crate::constellation::{distorted_moments, Constellation, DistortedMoments};
use crate::distortion::{normalize_bs, normalize_ue, HardwarePolynomial, NormalizedBsCoeffs, NormalizedUeCoeffs, Side};
use crate::error::{Error, Result};
use crate::estimators::{build_da_moments, received_pilots, DaLmmseMoments, PilotBook, PilotPhase};
use crate::linalg::{CMat, C64};
use crate::neural::{build_features, gain_features, FeatureVector};
use crate::rng::{complex_normal, Purpose, SeedTree};
use crate::scenario::{sample_channel, sample_drop, scaled_channel, LargeScale};

/// Everything that is fixed across setups.
#[derive(Clone, Debug)]
pub struct SystemModel {
    pub config: ExperimentConfig,
    pub seeds: SeedTree,
    pub constellation: Constellation,
    pub bs_poly: HardwarePolynomial,
    pub ue: NormalizedUeCoeffs,
    pub chi: DistortedMoments,
    pub pilots: PilotBook,
}

/// One UE drop with its normalised coefficients and pilot phase.
#[derive(Clone, Debug)]
pub struct Setup {
    pub index: usize,
    pub ls: LargeScale,
    pub bs: NormalizedBsCoeffs,
    pub phase: PilotPhase,
}

/// One channel realization of a setup with its pilot observation.
#[derive(Clone, Debug)]
pub struct Realization {
    pub g: CMat,
    pub pilots_rx: CMat,
    pub truth: EffectiveChannelSet,
}

impl SystemModel {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let constellation = Constellation::new(config.constellation)?;
        let bs_poly = config.bs.build(Side::Bs)?;
        let ue = normalize_ue(&config.ue.build(Side::Ue)?);
        let chi = distorted_moments(&constellation, &ue);
        Ok(Self {
            config: config.clone(),
            seeds: SeedTree::new(config.seed),
            constellation,
            bs_poly,
            ue,
            chi,
            pilots: PilotBook::dft(config.pilot_length(), config.scenario.k),
        })
    }

    pub fn is_third_order(&self) -> bool {
        self.bs_poly.order() <= 1 && self.ue.order() <= 1
    }

    pub fn require_third_order(&self, what: &str) -> Result<()> {
        if self.is_third_order() {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} needs third-order BS and UE polynomials")))
        }
    }

    /// Completes a drop: BS normalisation and distorted pilots.
    pub fn setup_from(&self, index: usize, ls: LargeScale) -> Result<Setup> {
        let bs = normalize_bs(&self.bs_poly, &ls.input_power())?;
        let phase = PilotPhase::new(&self.pilots, &self.ue, &ls.power)?;
        Ok(Setup { index, ls, bs, phase })
    }

    pub fn sample_setup_with<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> Result<Setup> {
        let ls = sample_drop(&self.config.scenario, self.chi.chi(2), rng)?;
        self.setup_from(index, ls)
    }

    pub fn setup(&self, index: usize) -> Result<Setup> {
        self.sample_setup_with(index, &mut self.seeds.stream(Purpose::Drop, index as u64, 0))
    }

    pub fn da_moments(&self, setup: &Setup) -> Result<DaLmmseMoments> {
        build_da_moments(&setup.ls, &self.pilots, &setup.bs, &self.ue, &self.constellation)
    }

    /// Effective channel and, for third-order systems, `C_zz` and `C_μμ`.
    pub fn effective(&self, setup: &Setup, g: &CMat) -> Result<EffectiveChannelSet> {
        let gt = scaled_channel(g, &setup.ls.eta);
        if self.is_third_order() {
            EffectiveChannelSet::third_order(&gt, &setup.bs, &self.ue, &self.constellation, &self.chi, setup.ls.sigma2)
        } else {
            let mom = symbol_cross_moments(&self.constellation, &self.ue, setup.bs.order() + 1);
            EffectiveChannelSet::general(&gt, &setup.bs, &mom, setup.ls.sigma2)
        }
    }

    pub fn realization(&self, setup: &Setup, r: usize) -> Result<Realization> {
        let (s, r) = (setup.index as u64, r as u64);
        let g = sample_channel(&setup.ls, &mut self.seeds.stream(Purpose::Channel, s, r));
        let pilots_rx = received_pilots(&g, &setup.bs, &setup.phase, setup.ls.sigma2, &mut self.seeds.stream(Purpose::Noise, s, r));
        let truth = self.effective(setup, &g)?;
        Ok(Realization { g, pilots_rx, truth })
    }

    /// Feature vectors of every antenna for one pilot observation.
    pub fn features(&self, setup: &Setup, pilots_rx: &CMat) -> Result<Vec<FeatureVector>> {
        (0..setup.ls.antennas())
            .map(|m| {
                let row: Vec<C64> = pilots_rx.row(m).iter().copied().collect();
                build_features(&row, &self.pilots, &gain_features(&setup.ls, m), setup.ls.sigma2)
            })
            .collect()
    }

    /// One training sample at antenna `m`: features, effective-channel row and `[C_μμ]_mm`.
    pub fn antenna_sample<R: Rng + ?Sized>(&self, setup: &Setup, m: usize, rng: &mut R) -> Result<(FeatureVector, Vec<C64>, f64)> {
        self.require_third_order("training data")?;
        let ls = &setup.ls;
        let k = ls.users();
        let g_row: Vec<C64> = (0..k).map(|l| ls.gbar[(m, l)] + complex_normal(rng) * ls.beta[l].sqrt()).collect();
        let coeffs = setup.bs.antenna(m).to_vec();
        let single = NormalizedBsCoeffs { per_antenna: vec![coeffs.clone()] };
        let sn = ls.sigma2.sqrt();
        let yp: Vec<C64> = setup
            .phase
            .antenna_input(&g_row)
            .into_iter()
            .map(|u| crate::distortion::apply_poly(&coeffs, u) + complex_normal(rng) * sn)
            .collect();
        let gt = CMat::from_fn(1, k, |_, l| g_row[l] * ls.eta[l].sqrt());
        let c_row = effective_channel_3rd(&gt, &single, &self.ue, &self.constellation)?;
        let var = distortion_variance(&czz_diagonal(&gt, &single, &self.chi)?, &c_row, ls.sigma2)?[0];
        let fv = build_features(&yp, &self.pilots, &gain_features(ls, m), ls.sigma2)?;
        Ok((fv, c_row.iter().copied().collect(), var))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bussgang::distortion_corr;

    #[test]
    fn antenna_sample_matches_full_matrices() {
        let cfg = ExperimentConfig { setups: 1, ..ExperimentConfig::default() };
        let sys = SystemModel::new(&cfg).unwrap();
        let setup = sys.setup(0).unwrap();
        let mut a = sys.seeds.stream(Purpose::Dataset, 0, 0);
        let (fv, c_row, var) = sys.antenna_sample(&setup, 3, &mut a).unwrap();
        // replay the same draws for the whole array and compare row 3
        let mut b = sys.seeds.stream(Purpose::Dataset, 0, 0);
        let k = setup.ls.users();
        let g_row: Vec<C64> = (0..k).map(|l| setup.ls.gbar[(3, l)] + complex_normal(&mut b) * setup.ls.beta[l].sqrt()).collect();
        let mut g = setup.ls.gbar.clone();
        for l in 0..k {
            g[(3, l)] = g_row[l];
        }
        let full = sys.effective(&setup, &g).unwrap();
        for l in 0..k {
            assert!((full.c[(3, l)] - c_row[l]).norm() <= 1e-12 * c_row[l].norm());
        }
        let cm = distortion_corr(full.czz.as_ref().unwrap(), &full.c, setup.ls.sigma2).unwrap();
        assert!((cm[(3, 3)].re - var).abs() <= 1e-10 * var);
        assert_eq!(fv.values.len(), 3 * k);
    }

    #[test]
    fn setups_are_reproducible() {
        let sys = SystemModel::new(&ExperimentConfig::default()).unwrap();
        assert_eq!(sys.setup(4).unwrap().ls, sys.setup(4).unwrap().ls);
        assert_ne!(sys.setup(4).unwrap().ls, sys.setup(5).unwrap().ls);
        let a = sys.realization(&sys.setup(1).unwrap(), 2).unwrap();
        let b = sys.realization(&sys.setup(1).unwrap(), 2).unwrap();
        assert_eq!(a.pilots_rx, b.pilots_rx);
    }
}
