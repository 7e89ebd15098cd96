//! Uncoded BER campaign over receiver and channel-knowledge combinations.

use rayon::prelude::*;
use serde::Serialize;

use super::config::BerCombo;
use super::nmse::dl_channel;
use super::output::{num, Table};
use super::system::SystemModel;
use crate::error::{Error, Result};
use crate::estimators::{dua_effective, dua_lmmse};
use crate::linalg::CMat;
use crate::neural::{EstimatorModel, NetKind};
use crate::receivers::{combiners, detect, transmit_data, BitErrors, CombinerKind};
use crate::rng::Purpose;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerOutcome {
    pub combos: Vec<BerCombo>,
    /// `errors[setup][combo][rank]`, UEs ranked by ascending SNR within each setup.
    pub errors: Vec<Vec<Vec<BitErrors>>>,
}

impl BerOutcome {
    fn index(&self, combo: BerCombo) -> Option<usize> {
        self.combos.iter().position(|c| *c == combo)
    }

    /// BER of each setup at SNR rank `rank`.
    pub fn per_setup(&self, combo: BerCombo, rank: usize) -> Option<Vec<f64>> {
        let i = self.index(combo)?;
        Some(self.errors.iter().map(|s| s[i][rank].rate()).collect())
    }

    /// Errors pooled over setups at each rank.
    pub fn pooled(&self, combo: BerCombo) -> Option<Vec<BitErrors>> {
        let i = self.index(combo)?;
        let ranks = self.errors.first().map_or(0, |s| s[i].len());
        Some(
            (0..ranks)
                .map(|r| {
                    let mut acc = BitErrors::default();
                    for s in &self.errors {
                        acc.add(s[i][r]);
                    }
                    acc
                })
                .collect(),
        )
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["combo", "ue_rank", "errors", "bits", "ber"]);
        for combo in &self.combos {
            for (rank, e) in self.pooled(*combo).unwrap_or_default().iter().enumerate() {
                t.push(vec![combo.to_string(), rank.to_string(), e.errors.to_string(), e.bits.to_string(), num(e.rate())]);
            }
        }
        t
    }
}

pub fn run_ber(sys: &SystemModel, channel_model: Option<&EstimatorModel>, variance_model: Option<&EstimatorModel>) -> Result<BerOutcome> {
    sys.require_third_order("the BER experiment")?;
    if sys.constellation.is_gaussian() {
        return Err(Error::Config("the BER experiment needs a finite constellation".into()));
    }
    let combos = sys.config.ber_combos.clone();
    let k = sys.config.scenario.k;
    let needs_dl = combos.iter().any(|c| c.needs_models());
    let check = |m: Option<&EstimatorModel>, kind: NetKind| -> Result<()> {
        match m {
            None => Err(Error::MissingModel(format!("{kind:?} network required by the BER combos").to_lowercase())),
            Some(m) if m.kind != kind || m.users != k => Err(Error::Config(format!("model mismatch: {:?} for K = {}", m.kind, m.users))),
            Some(_) => Ok(()),
        }
    };
    if needs_dl {
        check(channel_model, NetKind::Channel)?;
        if combos.contains(&BerCombo::EwDaMmseDl) {
            check(variance_model, NetKind::Variance)?;
        }
    }
    let needs_lmmse = combos.contains(&BerCombo::DaRzfLmmse);
    let errors = (0..sys.config.setups)
        .into_par_iter()
        .map(|s| {
            let setup = sys.setup(s)?;
            let sigma2 = setup.ls.sigma2;
            let snr = setup.ls.snr();
            let mut rank: Vec<usize> = (0..k).collect();
            rank.sort_by(|a, b| snr[*a].total_cmp(&snr[*b]));
            let da = if needs_lmmse { Some(sys.da_moments(&setup)?) } else { None };
            let mut acc = vec![vec![BitErrors::default(); k]; combos.len()];
            for r in 0..sys.config.realizations {
                let real = sys.realization(&setup, r)?;
                let truth = &real.truth.c;
                let cmm = real.truth.cmumu.as_ref().unwrap();
                let true_diag: Vec<f64> = (0..cmm.nrows()).map(|i| cmm[(i, i)].re).collect();
                let mut rng = sys.seeds.stream(Purpose::Symbols, s as u64, r as u64);
                let tx: Vec<Vec<usize>> = (0..k).map(|_| (0..sys.config.symbols).map(|_| sys.constellation.draw_index(&mut rng)).collect()).collect();
                let y = transmit_data(&real.g, &setup.ls.eta, &setup.bs, &sys.ue, &sys.constellation, &tx, sigma2, &mut rng);
                let dl = match channel_model {
                    Some(m) if needs_dl => Some(dl_channel(sys, &setup, &real.pilots_rx, m)?),
                    _ => None,
                };
                for (i, combo) in combos.iter().enumerate() {
                    let (v, reference): (CMat, CMat) = match combo {
                        BerCombo::DuaRzf => {
                            let ghat = dua_lmmse(&real.pilots_rx, &sys.pilots, &setup.ls)?;
                            let est = dua_effective(&ghat, &setup.bs, sys.ue.get(0), &setup.ls.eta);
                            (combiners(CombinerKind::DaRzf, &est, None, None, sigma2)?.v, est)
                        }
                        BerCombo::DaRzfLmmse => {
                            let est = da.as_ref().unwrap().estimate(&real.pilots_rx);
                            (combiners(CombinerKind::DaRzf, &est, None, None, sigma2)?.v, est)
                        }
                        BerCombo::DaRzfDl => {
                            let est = dl.clone().unwrap();
                            (combiners(CombinerKind::DaRzf, &est, None, None, sigma2)?.v, est)
                        }
                        BerCombo::DaRzfPerfect => (combiners(CombinerKind::DaRzf, truth, None, None, sigma2)?.v, truth.clone()),
                        BerCombo::EwDaMmseDl => {
                            let est = dl.clone().unwrap();
                            let ratios = variance_model.unwrap().variance_ratios(&sys.features(&setup, &real.pilots_rx)?)?;
                            let diag: Vec<f64> = ratios.iter().map(|r| r * sigma2).collect();
                            (combiners(CombinerKind::EwDaMmse, &est, None, Some(&diag), sigma2)?.v, est)
                        }
                        BerCombo::EwDaMmsePerfect => {
                            (combiners(CombinerKind::EwDaMmse, truth, None, Some(&true_diag), sigma2)?.v, truth.clone())
                        }
                    };
                    let e = detect(&y, &v, &reference, &sys.constellation, &tx);
                    for (j, &u) in rank.iter().enumerate() {
                        acc[i][j].add(e[u]);
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BerOutcome { combos, errors })
}
