//! Spectral-efficiency campaign over receivers with perfect statistics.

use rayon::prelude::*;
use serde::Serialize;

use super::output::{num, Table};
use super::system::SystemModel;
use super::median;
use crate::error::{Error, Result};
use crate::estimators::dua_effective;
use crate::receivers::{combiners, se_lower_bound, sinr, CombinerKind};

/// Relative slack when checking that DA-MMSE attains the largest SINR.
pub const AUDIT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SinrAudit {
    pub instances: u64,
    pub violations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeOutcome {
    pub receivers: Vec<CombinerKind>,
    /// `se[setup][receiver][ue]`.
    pub se: Vec<Vec<Vec<f64>>>,
    pub audit: SinrAudit,
}

impl SeOutcome {
    pub fn values(&self, receiver: usize) -> Vec<f64> {
        self.se.iter().flat_map(|s| s[receiver].iter().copied()).collect()
    }

    pub fn median(&self, kind: CombinerKind) -> Option<f64> {
        let i = self.receivers.iter().position(|r| *r == kind)?;
        Some(median(&self.values(i)))
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["setup", "ue", "receiver", "se"]);
        for (s, per) in self.se.iter().enumerate() {
            for (r, kind) in self.receivers.iter().enumerate() {
                for (k, v) in per[r].iter().enumerate() {
                    t.push(vec![s.to_string(), k.to_string(), kind.to_string(), num(*v)]);
                }
            }
        }
        t
    }
}

/// Per-UE SE averaged over realizations for every configured receiver.
///
/// DA-MMSE is always evaluated so that its optimality can be audited.
pub fn run_se(sys: &SystemModel) -> Result<SeOutcome> {
    sys.require_third_order("the SE experiment")?;
    if !sys.constellation.is_gaussian() {
        return Err(Error::Config("the SE experiment assumes Gaussian data symbols; set constellation to \"gaussian\"".into()));
    }
    let receivers = sys.config.receivers.clone();
    let audit_set = [CombinerKind::EwDaMmse, CombinerKind::DaRzf, CombinerKind::DaMrc];
    let per_setup = (0..sys.config.setups)
        .into_par_iter()
        .map(|s| {
            let setup = sys.setup(s)?;
            let k = setup.ls.users();
            let sigma2 = setup.ls.sigma2;
            let mut sinrs = vec![vec![Vec::with_capacity(sys.config.realizations); k]; receivers.len()];
            let mut audit = SinrAudit::default();
            for r in 0..sys.config.realizations {
                let real = sys.realization(&setup, r)?;
                let (c, czz, cmm) = (&real.truth.c, real.truth.czz.as_ref().unwrap(), real.truth.cmumu.as_ref().unwrap());
                let diag: Vec<f64> = (0..c.nrows()).map(|i| cmm[(i, i)].re).collect();
                let build = |kind: CombinerKind| match kind {
                    CombinerKind::DuaRzf => {
                        let naive = dua_effective(&real.g, &setup.bs, sys.ue.get(0), &setup.ls.eta);
                        combiners(kind, &naive, None, None, sigma2)
                    }
                    _ => combiners(kind, c, Some(czz), Some(&diag), sigma2),
                };
                let mmse = build(CombinerKind::DaMmse)?;
                let best: Vec<f64> = (0..k).map(|u| sinr(&mmse.v.column(u).into_owned(), c, cmm, u)).collect::<Result<_>>()?;
                for kind in audit_set {
                    let v = build(kind)?;
                    for (u, b) in best.iter().enumerate() {
                        audit.instances += 1;
                        if sinr(&v.v.column(u).into_owned(), c, cmm, u)? > b * (1.0 + AUDIT_SLACK) {
                            audit.violations += 1;
                        }
                    }
                }
                for (i, kind) in receivers.iter().enumerate() {
                    let v = if *kind == CombinerKind::DaMmse { mmse.clone() } else { build(*kind)? };
                    for u in 0..k {
                        sinrs[i][u].push(sinr(&v.v.column(u).into_owned(), c, cmm, u)?);
                    }
                }
            }
            let se: Vec<Vec<f64>> = sinrs.iter().map(|per| per.iter().map(|s| se_lower_bound(s)).collect()).collect();
            Ok((se, audit))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut audit = SinrAudit::default();
    let mut se = Vec::with_capacity(per_setup.len());
    for (s, a) in per_setup {
        audit.instances += a.instances;
        audit.violations += a.violations;
        se.push(s);
    }
    Ok(SeOutcome { receivers, se, audit })
}
