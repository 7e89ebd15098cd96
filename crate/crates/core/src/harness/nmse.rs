//! Channel and variance estimation campaigns.

use rayon::prelude::*;
use serde::Serialize;

use super::config::EstimatorKind;
use super::output::{num, Table};
use super::system::SystemModel;
use super::median;
use crate::error::{Error, Result};
use crate::estimators::{dua_effective, dua_lmmse, mc_lmmse_variance, AffineVarianceEstimator, VarianceDomain};
use crate::linalg::{db, CMat, C64};
use crate::neural::{EstimatorModel, NetKind};
use crate::rng::Purpose;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NmseOutcome {
    pub estimators: Vec<EstimatorKind>,
    /// Channel: `nmse_db[setup][estimator][ue]`; variance: one entry per setup.
    pub nmse_db: Vec<Vec<Vec<f64>>>,
}

impl NmseOutcome {
    pub fn values(&self, kind: EstimatorKind) -> Option<Vec<f64>> {
        let i = self.estimators.iter().position(|e| *e == kind)?;
        Some(self.nmse_db.iter().flat_map(|s| s[i].iter().copied()).collect())
    }

    pub fn median_db(&self, kind: EstimatorKind) -> Option<f64> {
        self.values(kind).map(|v| median(&v))
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["setup", "ue", "estimator", "nmse_db"]);
        for (s, per) in self.nmse_db.iter().enumerate() {
            for (e, kind) in self.estimators.iter().enumerate() {
                for (k, v) in per[e].iter().enumerate() {
                    t.push(vec![s.to_string(), k.to_string(), kind.to_string(), num(*v)]);
                }
            }
        }
        t
    }
}

fn check_model(model: Option<&EstimatorModel>, kind: NetKind, k: usize) -> Result<&EstimatorModel> {
    let m = model.ok_or_else(|| Error::MissingModel(format!("{kind:?} network required by the dl estimator").to_lowercase()))?;
    if m.kind != kind || m.users != k {
        return Err(Error::Config(format!("model is a {:?} net for K = {}, need {kind:?} for K = {k}", m.kind, m.users)));
    }
    Ok(m)
}

/// Effective-channel NMSE per UE and setup: `sum_r ||Ĉ_k - C_k||^2 / sum_r ||C_k||^2`.
pub fn run_channel_nmse(sys: &SystemModel, model: Option<&EstimatorModel>) -> Result<NmseOutcome> {
    let estimators: Vec<EstimatorKind> = sys.config.estimators.iter().copied().filter(|e| e.is_channel()).collect();
    if estimators.is_empty() {
        return Err(Error::Config("no channel estimator selected".into()));
    }
    let k = sys.config.scenario.k;
    let dl = if estimators.contains(&EstimatorKind::Dl) { Some(check_model(model, NetKind::Channel, k)?) } else { None };
    if estimators.contains(&EstimatorKind::DaLmmse) {
        sys.require_third_order("DA-LMMSE")?;
    }
    let nmse_db = (0..sys.config.setups)
        .into_par_iter()
        .map(|s| {
            let setup = sys.setup(s)?;
            let da = if estimators.contains(&EstimatorKind::DaLmmse) { Some(sys.da_moments(&setup)?) } else { None };
            let mut err = vec![vec![0.0; k]; estimators.len()];
            let mut pow = vec![0.0; k];
            for r in 0..sys.config.realizations {
                let real = sys.realization(&setup, r)?;
                let truth = &real.truth.c;
                for u in 0..k {
                    pow[u] += truth.column(u).norm_squared();
                }
                for (i, e) in estimators.iter().enumerate() {
                    let est = match e {
                        EstimatorKind::DuaLmmse => {
                            let ghat = dua_lmmse(&real.pilots_rx, &sys.pilots, &setup.ls)?;
                            dua_effective(&ghat, &setup.bs, sys.ue.get(0), &setup.ls.eta)
                        }
                        EstimatorKind::DaLmmse => da.as_ref().unwrap().estimate(&real.pilots_rx),
                        EstimatorKind::Dl => dl_channel(sys, &setup, &real.pilots_rx, dl.unwrap())?,
                        _ => unreachable!("filtered to channel estimators"),
                    };
                    for u in 0..k {
                        err[i][u] += (est.column(u) - truth.column(u)).norm_squared();
                    }
                }
            }
            Ok(err.iter().map(|e| e.iter().zip(&pow).map(|(a, b)| db(a / b)).collect()).collect())
        })
        .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;
    Ok(NmseOutcome { estimators, nmse_db })
}

/// Monte-Carlo fit of the affine variance estimators on fresh drops, one per domain.
pub fn fit_mc_lmmse(sys: &SystemModel) -> Result<(AffineVarianceEstimator, AffineVarianceEstimator)> {
    sys.require_third_order("the variance estimators")?;
    let n = sys.config.mc_lmmse_draws;
    let chunk = 1000;
    let parts = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut rng = sys.seeds.stream(Purpose::McLmmse, c as u64, 0);
            let count = chunk.min(n - c * chunk);
            (0..count)
                .map(|_| {
                    let setup = sys.sample_setup_with(0, &mut rng)?;
                    let m = rand::Rng::random_range(&mut rng, 0..setup.ls.antennas());
                    let (fv, _, var) = sys.antenna_sample(&setup, m, &mut rng)?;
                    Ok((fv.values, var / setup.ls.sigma2))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let (features, ratios): (Vec<Vec<f64>>, Vec<f64>) = parts.into_iter().flatten().unzip();
    Ok((
        mc_lmmse_variance(&features, &ratios, VarianceDomain::Linear)?,
        mc_lmmse_variance(&features, &ratios, VarianceDomain::Log)?,
    ))
}

/// Variance NMSE per setup: `sum_{r,m} (d̂_m - d_m)^2 / sum_{r,m} d_m^2` with `d_m = [C_μμ]_mm`.
pub fn run_variance_nmse(
    sys: &SystemModel,
    mc: Option<&(AffineVarianceEstimator, AffineVarianceEstimator)>,
    model: Option<&EstimatorModel>,
) -> Result<NmseOutcome> {
    sys.require_third_order("the variance experiment")?;
    let estimators: Vec<EstimatorKind> = sys.config.estimators.iter().copied().filter(|e| e.is_variance()).collect();
    if estimators.is_empty() {
        return Err(Error::Config("no variance estimator selected".into()));
    }
    let k = sys.config.scenario.k;
    let dl = if estimators.contains(&EstimatorKind::Dl) { Some(check_model(model, NetKind::Variance, k)?) } else { None };
    let needs_mc = estimators.iter().any(|e| matches!(e, EstimatorKind::McLmmseLin | EstimatorKind::McLmmseLog));
    let fitted;
    let mc = match (needs_mc, mc) {
        (false, _) => None,
        (true, Some(m)) => Some(m),
        (true, None) => {
            fitted = fit_mc_lmmse(sys)?;
            Some(&fitted)
        }
    };
    let nmse_db = (0..sys.config.setups)
        .into_par_iter()
        .map(|s| {
            let setup = sys.setup(s)?;
            let mut err = vec![0.0; estimators.len()];
            let mut pow = 0.0;
            for r in 0..sys.config.realizations {
                let real = sys.realization(&setup, r)?;
                let cmm = real.truth.cmumu.as_ref().unwrap();
                let truth: Vec<f64> = (0..cmm.nrows()).map(|i| cmm[(i, i)].re / setup.ls.sigma2).collect();
                pow += truth.iter().map(|d| d * d).sum::<f64>();
                let features = sys.features(&setup, &real.pilots_rx)?;
                for (i, e) in estimators.iter().enumerate() {
                    let est: Vec<f64> = match e {
                        EstimatorKind::McLmmseLin => features.iter().map(|f| mc.unwrap().0.predict_ratio(&f.values)).collect(),
                        EstimatorKind::McLmmseLog => features.iter().map(|f| mc.unwrap().1.predict_ratio(&f.values)).collect(),
                        EstimatorKind::Dl => dl.unwrap().variance_ratios(&features)?,
                        _ => unreachable!("filtered to variance estimators"),
                    };
                    err[i] += est.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                }
            }
            Ok(err.iter().map(|e| vec![db(e / pow)]).collect())
        })
        .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;
    Ok(NmseOutcome { estimators, nmse_db })
}

/// Effective-channel row estimates of all antennas from the DL model, as an `M x K` matrix.
pub fn dl_channel(sys: &SystemModel, setup: &super::system::Setup, pilots_rx: &CMat, model: &EstimatorModel) -> Result<CMat> {
    let rows: Vec<Vec<C64>> = model.channel_rows(&sys.features(setup, pilots_rx)?, setup.ls.sigma2)?;
    Ok(CMat::from_fn(rows.len(), setup.ls.users(), |m, u| rows[m][u]))
}
