//! Experiment orchestration: campaigns, dataset generation, training and outputs.
//!
//! Every campaign parallelizes over setups with rayon and collects results in
//! setup order; all randomness comes from [`crate::rng::SeedTree`] streams keyed
//! by setup and realization, so outputs do not depend on the worker count.

mod ber;
mod config;
mod dataset;
mod nmse;
pub mod output;
mod se;
mod system;
mod training;

use std::path::Path;

use serde_json::{json, Value};

pub use ber::{run_ber, BerOutcome};
pub use config::{apply_override, BerCombo, EstimatorKind, ExperimentConfig, ExperimentKind, ModelPaths, PolynomialConfig};
pub use dataset::{generate_dataset, read_dataset, write_dataset, DatasetHeader, DATASET_MAGIC};
pub use nmse::{dl_channel, fit_mc_lmmse, run_channel_nmse, run_variance_nmse, NmseOutcome};
pub use se::{run_se, SeOutcome, SinrAudit, AUDIT_SLACK};
pub use system::{Realization, Setup, SystemModel};
pub use training::{datasets, export_binary, load_models, train_models, write_datasets, TrainOutcome, TRAIN_FILE, VALIDATION_FILE};

use crate::error::{Error, Result};
use crate::neural::EstimatorModel;
use output::{cdf_script, line_script, num, write_script, write_summary, write_table, Table};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "NLMIMO_WORKERS";

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `f` on a pool sized by [`WORKERS_ENV`], or on the global pool when unset.
pub fn with_workers<T: Send>(f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => {
            let n: usize = raw
                .trim()
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{raw}'")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            pool.install(f)
        }
        Err(_) => f(),
    }
}

fn load_model(sys: &SystemModel, out: &Path, which: &Path) -> Result<EstimatorModel> {
    EstimatorModel::load(&sys.config.model_path(out, which))
}

fn medians(outcome: &NmseOutcome) -> Value {
    outcome
        .estimators
        .iter()
        .map(|e| (e.to_string(), json!(outcome.median_db(*e))))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn write_channel_nmse(outcome: &NmseOutcome, out: &Path, hash: &str) -> Result<Value> {
    write_table(&out.join("nmse_channel.csv"), &outcome.table(), hash)?;
    write_script(&out.join("plot_nmse_channel.py"), &cdf_script("nmse_channel.csv", "estimator", "nmse_db", "NMSE (dB)"))?;
    let summary = json!({ "experiment": "nmse-channel", "median_nmse_db": medians(outcome) });
    write_summary(&out.join("nmse_channel.json"), &summary, hash)?;
    Ok(summary)
}

fn write_variance_nmse(outcome: &NmseOutcome, out: &Path, hash: &str) -> Result<Value> {
    let mut t = Table::new(&["setup", "estimator", "nmse_db"]);
    for (s, per) in outcome.nmse_db.iter().enumerate() {
        for (e, kind) in outcome.estimators.iter().enumerate() {
            t.push(vec![s.to_string(), kind.to_string(), num(per[e][0])]);
        }
    }
    write_table(&out.join("nmse_variance.csv"), &t, hash)?;
    write_script(&out.join("plot_nmse_variance.py"), &cdf_script("nmse_variance.csv", "estimator", "nmse_db", "NMSE (dB)"))?;
    let summary = json!({ "experiment": "nmse-variance", "median_nmse_db": medians(outcome) });
    write_summary(&out.join("nmse_variance.json"), &summary, hash)?;
    Ok(summary)
}

/// Runs one experiment, writes its artifacts under `out` and returns the JSON summary.
pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig, out: &Path) -> Result<Value> {
    let sys = SystemModel::new(config)?;
    let hash = config.hash();
    let models = &config.models;
    with_workers(|| match kind {
        ExperimentKind::SeCdf => {
            let se = run_se(&sys)?;
            write_table(&out.join("se.csv"), &se.table(), &hash)?;
            write_script(&out.join("plot_se_cdf.py"), &cdf_script("se.csv", "receiver", "se", "SE (bit/s/Hz)"))?;
            let med: serde_json::Map<_, _> = se.receivers.iter().map(|r| (r.to_string(), json!(se.median(*r)))).collect();
            let summary = json!({ "experiment": "se-cdf", "median_se": med, "audit": se.audit });
            write_summary(&out.join("se.json"), &summary, &hash)?;
            Ok(summary)
        }
        ExperimentKind::NmseChannel => {
            let dl = match config.estimators.contains(&EstimatorKind::Dl) {
                true => Some(load_model(&sys, out, &models.channel)?),
                false => None,
            };
            write_channel_nmse(&run_channel_nmse(&sys, dl.as_ref())?, out, &hash)
        }
        ExperimentKind::NmseVariance => {
            let dl = match config.estimators.contains(&EstimatorKind::Dl) {
                true => Some(load_model(&sys, out, &models.variance)?),
                false => None,
            };
            write_variance_nmse(&run_variance_nmse(&sys, None, dl.as_ref())?, out, &hash)
        }
        ExperimentKind::Ber => {
            let needs = config.ber_combos.iter().any(|c| c.needs_models());
            let (ch, var) = if needs { load_models(&sys, out).map(|(a, b)| (Some(a), Some(b)))? } else { (None, None) };
            let ber = run_ber(&sys, ch.as_ref(), var.as_ref())?;
            write_table(&out.join("ber.csv"), &ber.table(), &hash)?;
            write_script(&out.join("plot_ber.py"), &line_script("ber.csv", "combo", "ue_rank", "ber", "BER", true))?;
            let pooled: serde_json::Map<_, _> = ber
                .combos
                .iter()
                .map(|c| (c.to_string(), json!(ber.pooled(*c).unwrap_or_default().iter().map(|e| e.rate()).collect::<Vec<_>>())))
                .collect();
            let summary = json!({ "experiment": "ber", "ber_by_rank": pooled });
            write_summary(&out.join("ber.json"), &summary, &hash)?;
            Ok(summary)
        }
        ExperimentKind::DatasetGen => {
            let (n_train, n_val) = write_datasets(&sys, out)?;
            let summary = json!({ "experiment": "dataset-gen", "train_samples": n_train, "validation_samples": n_val });
            write_summary(&out.join("dataset.json"), &summary, &hash)?;
            Ok(summary)
        }
        ExperimentKind::Train => {
            let (train, val) = datasets(&sys, out)?;
            let (channel, variance, report) = train_models(&sys, &train, &val)?;
            channel.save(&config.model_path(out, &models.channel))?;
            variance.save(&config.model_path(out, &models.variance))?;
            let mut log = Table::new(&["net", "epoch", "train_loss", "val_loss"]);
            for (net, r) in [("channel", &report.channel), ("variance", &report.variance)] {
                for (e, (a, b)) in r.train_loss.iter().zip(&r.val_loss).enumerate() {
                    log.push(vec![net.into(), e.to_string(), num(*a), num(*b)]);
                }
            }
            write_table(&out.join("training_log.csv"), &log, &hash)?;
            write_script(&out.join("plot_training.py"), &line_script("training_log.csv", "net", "epoch", "val_loss", "validation loss", true))?;
            let summary = json!({ "experiment": "train", "channel": report.channel, "variance": report.variance });
            write_summary(&out.join("train.json"), &summary, &hash)?;
            Ok(summary)
        }
        ExperimentKind::Eval => {
            let (channel, variance) = load_models(&sys, out)?;
            let a = write_channel_nmse(&run_channel_nmse(&sys, Some(&channel))?, out, &hash)?;
            let b = write_variance_nmse(&run_variance_nmse(&sys, None, Some(&variance))?, out, &hash)?;
            Ok(json!({ "experiment": "eval", "channel": a, "variance": b }))
        }
        ExperimentKind::Export => {
            let (channel, variance) = load_models(&sys, out)?;
            export_binary(&channel, &out.join("channel.nlm"))?;
            export_binary(&variance, &out.join("variance.nlm"))?;
            Ok(json!({ "experiment": "export", "files": ["channel.nlm", "variance.nlm"] }))
        }
    })
}
