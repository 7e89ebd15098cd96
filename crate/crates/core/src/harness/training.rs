//! `train`, `eval` and `export` runners.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::dataset::{generate_dataset, read_dataset, write_dataset};
use super::system::SystemModel;
use crate::error::{Error, Result};
use crate::neural::{train_channel_net, train_variance_net, Dataset, EstimatorModel, TrainReport};
use crate::rng::{Purpose, SeedTree};

pub const TRAIN_FILE: &str = "train.nlds";
pub const VALIDATION_FILE: &str = "validation.nlds";

#[derive(Clone, Debug, Serialize)]
pub struct TrainOutcome {
    pub channel: TrainReport,
    pub variance: TrainReport,
}

/// Loads the datasets written by `dataset-gen` under the same config, or generates them.
pub fn datasets(sys: &SystemModel, dir: &Path) -> Result<(Dataset, Dataset)> {
    let hash = sys.config.hash();
    let load = |name: &str| -> Result<Option<Dataset>> {
        let path = dir.join(name);
        if !path.exists() {
            return Ok(None);
        }
        let (header, ds) = read_dataset(&path)?;
        if header.config_hash != hash {
            return Err(Error::ConfigMismatch { path: path.display().to_string(), found: header.config_hash, expected: hash.clone() });
        }
        Ok(Some(ds))
    };
    let train = match load(TRAIN_FILE)? {
        Some(ds) => ds,
        None => generate_dataset(sys, sys.config.train.train_size, Purpose::Dataset)?,
    };
    let val = match load(VALIDATION_FILE)? {
        Some(ds) => ds,
        None => generate_dataset(sys, sys.config.train.validation_size, Purpose::Validation)?,
    };
    Ok((train, val))
}

pub fn write_datasets(sys: &SystemModel, dir: &Path) -> Result<(usize, usize)> {
    let hash = sys.config.hash();
    let train = generate_dataset(sys, sys.config.train.train_size, Purpose::Dataset)?;
    let val = generate_dataset(sys, sys.config.train.validation_size, Purpose::Validation)?;
    write_dataset(&dir.join(TRAIN_FILE), &train, &hash)?;
    write_dataset(&dir.join(VALIDATION_FILE), &val, &hash)?;
    Ok((train.len(), val.len()))
}

/// Trains both networks and returns them tagged with the config hash.
pub fn train_models(sys: &SystemModel, train: &Dataset, val: &Dataset) -> Result<(EstimatorModel, EstimatorModel, TrainOutcome)> {
    let seeds = SeedTree::new(sys.seeds.master());
    let (mut channel, rc) = train_channel_net(train, val, &sys.config.train, &seeds)?;
    let (mut variance, rv) = train_variance_net(train, val, &sys.config.train, &seeds)?;
    let hash = sys.config.hash();
    channel.config_hash = hash.clone();
    variance.config_hash = hash;
    Ok((channel, variance, TrainOutcome { channel: rc, variance: rv }))
}

pub fn load_models(sys: &SystemModel, out: &Path) -> Result<(EstimatorModel, EstimatorModel)> {
    let m = &sys.config.models;
    Ok((
        EstimatorModel::load(&sys.config.model_path(out, &m.channel))?,
        EstimatorModel::load(&sys.config.model_path(out, &m.variance))?,
    ))
}

/// Binary model container: magic, `u32` header length, JSON header, then
/// every layer's row-major weights followed by its biases as little-endian `f32`.
pub fn export_binary(model: &EstimatorModel, path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Header<'a> {
        format_version: u32,
        kind: crate::neural::NetKind,
        users: usize,
        widths: Vec<usize>,
        activations: Vec<crate::neural::Activation>,
        endianness: &'static str,
        dtype: &'static str,
        input_scaler: &'a crate::neural::InputScaler,
        output_scaler: &'a Option<crate::neural::MinMaxScaler>,
        config_hash: &'a str,
    }
    let header = Header {
        format_version: crate::neural::MODEL_FORMAT_VERSION,
        kind: model.kind,
        users: model.users,
        widths: model.net.widths(),
        activations: model.net.layers.iter().map(|l| l.activation).collect(),
        endianness: "little",
        dtype: "f32",
        input_scaler: &model.inputs,
        output_scaler: &model.output,
        config_hash: &model.config_hash,
    };
    let head = serde_json::to_vec(&header)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut bytes = Vec::new();
    bytes.extend_from_slice(b"NLMNN\x01");
    bytes.extend_from_slice(&(head.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&head);
    for l in &model.net.layers {
        for v in l.weights.transpose().iter().chain(l.bias.iter()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}
