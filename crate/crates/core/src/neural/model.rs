//! Trained estimator networks: inference and the JSON model container.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::{gain_relative, FeatureVector};
use super::mlp::{Activation, Layer, Mlp};
use super::scalers::{InputScaler, MinMaxScaler};
use crate::error::{Error, Result};
use crate::linalg::C64;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    /// Outputs the gain-normalised effective-channel row.
    Channel,
    /// Outputs MinMax-scaled `log10([C_μμ]_mm / σ²)`.
    Variance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorModel {
    pub kind: NetKind,
    pub users: usize,
    pub net: Mlp<f32>,
    pub inputs: InputScaler,
    pub output: Option<MinMaxScaler>,
    pub config_hash: String,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    activation: Activation,
    /// Row-major.
    weights: Vec<f32>,
    bias: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: NetKind,
    users: usize,
    widths: Vec<usize>,
    layers: Vec<LayerRecord>,
    input_scaler: InputScaler,
    output_scaler: Option<MinMaxScaler>,
    config_hash: String,
}

impl EstimatorModel {
    /// Scaled network inputs, one column per feature vector.
    pub fn input_matrix(&self, features: &[FeatureVector]) -> Result<DMatrix<f32>> {
        let d = 3 * self.users;
        let mut x = DMatrix::<f32>::zeros(d, features.len());
        for (col, fv) in features.iter().enumerate() {
            if fv.values.len() != d {
                return Err(Error::Dimension(format!("feature vector of length {} for K = {}", fv.values.len(), self.users)));
            }
            let mut row = gain_relative(&fv.values);
            self.inputs.transform(&mut row);
            for (j, v) in row.into_iter().enumerate() {
                x[(j, col)] = v as f32;
            }
        }
        Ok(x)
    }

    /// Effective-channel rows in original UE order.
    pub fn channel_rows(&self, features: &[FeatureVector], sigma2: f64) -> Result<Vec<Vec<C64>>> {
        if self.kind != NetKind::Channel {
            return Err(Error::InvalidArgument("not a channel model".into()));
        }
        let out = self.net.forward_batch(&self.input_matrix(features)?)?;
        Ok(features
            .iter()
            .enumerate()
            .map(|(col, fv)| {
                let o: Vec<f64> = out.column(col).iter().map(|v| *v as f64).collect();
                fv.channel_row(&o, sigma2)
            })
            .collect())
    }

    /// Estimates of `[C_μμ]_mm / σ²`, never below one.
    pub fn variance_ratios(&self, features: &[FeatureVector]) -> Result<Vec<f64>> {
        let scaler = match (self.kind, &self.output) {
            (NetKind::Variance, Some(s)) => s,
            _ => return Err(Error::InvalidArgument("not a variance model".into())),
        };
        let out = self.net.forward_batch(&self.input_matrix(features)?)?;
        Ok(out
            .iter()
            .map(|v| {
                let mut t = [*v as f64];
                scaler.inverse(&mut t);
                10f64.powf(t[0].max(0.0))
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let layers = self
            .net
            .layers
            .iter()
            .map(|l| LayerRecord {
                rows: l.outputs(),
                cols: l.inputs(),
                activation: l.activation,
                weights: l.weights.transpose().as_slice().to_vec(),
                bias: l.bias.as_slice().to_vec(),
            })
            .collect();
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kind: self.kind,
            users: self.users,
            widths: self.net.widths(),
            layers,
            input_scaler: self.inputs.clone(),
            output_scaler: self.output.clone(),
            config_hash: self.config_hash.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported model format version {}", file.format_version)));
        }
        let layers = file
            .layers
            .into_iter()
            .map(|r| {
                if r.weights.len() != r.rows * r.cols || r.bias.len() != r.rows {
                    return Err(Error::Dimension(format!("layer record {}x{} with {} weights", r.rows, r.cols, r.weights.len())));
                }
                Ok(Layer {
                    weights: DMatrix::from_row_slice(r.rows, r.cols, &r.weights),
                    bias: DVector::from_vec(r.bias),
                    activation: r.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Mlp::new(layers)?;
        if net.widths() != file.widths || net.input_dim() != 3 * file.users || file.input_scaler.users() != file.users {
            return Err(Error::Dimension("model widths disagree with the declared layout".into()));
        }
        Ok(Self {
            kind: file.kind,
            users: file.users,
            net,
            inputs: file.input_scaler,
            output: file.output_scaler,
            config_hash: file.config_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Loads a model; a missing file maps to [`Error::MissingModel`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingModel(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }
}
