//! Mini-batch training with early stopping, and the two estimator networks.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::features::gain_relative;
use super::mlp::{Activation, Mlp, Real};
use super::model::{EstimatorModel, NetKind};
use super::scalers::{InputScaler, MinMaxScaler, MINMAX_HI, MINMAX_LO};
use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedTree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Hidden width is this many neurons per UE.
    pub hidden_per_user: usize,
    pub hidden_layers: usize,
    /// Training samples whose target norm exceeds this quantile are dropped; `1.0` keeps all.
    pub outlier_quantile: f64,
    pub train_size: usize,
    pub validation_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 1000,
            max_epochs: 50,
            patience: 5,
            hidden_per_user: 30,
            hidden_layers: 2,
            outlier_quantile: 0.995,
            train_size: 300_000,
            validation_size: 30_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.hidden_per_user == 0 || self.train_size == 0 || self.validation_size == 0 {
            return Err(Error::Config("training sizes must be positive".into()));
        }
        if self.patience == 0 || self.patience > self.max_epochs {
            return Err(Error::Config(format!("patience {} must lie in 1..={}", self.patience, self.max_epochs)));
        }
        if !(self.outlier_quantile > 0.0 && self.outlier_quantile <= 1.0) {
            return Err(Error::Config(format!("outlier quantile {} outside (0, 1]", self.outlier_quantile)));
        }
        Ok(())
    }

    pub fn widths(&self, inputs: usize, outputs: usize, users: usize) -> Vec<usize> {
        let mut w = vec![inputs];
        w.extend(std::iter::repeat_n(self.hidden_per_user * users, self.hidden_layers));
        w.push(outputs);
        w
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub trimmed: usize,
}

impl TrainReport {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss.get(self.best_epoch).copied().unwrap_or(f64::NAN)
    }
}

/// Trains `net` on column-sample matrices and restores the best-validation weights.
pub fn fit<T: Real, R: Rng + ?Sized>(
    net: &mut Mlp<T>,
    train: (&DMatrix<T>, &DMatrix<T>),
    val: (&DMatrix<T>, &DMatrix<T>),
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    let (x, y) = train;
    let n = x.ncols();
    if n == 0 || y.ncols() != n || val.0.ncols() != val.1.ncols() || val.0.ncols() == 0 {
        return Err(Error::Dimension("empty or misaligned training data".into()));
    }
    let mut adam = Adam::new(cfg.adam, &net.param_sizes());
    let mut report = TrainReport::default();
    let mut best = (f64::INFINITY, net.clone());
    let mut wait = 0;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select_columns(chunk);
            let yb = y.select_columns(chunk);
            let (loss, grads) = net.loss_and_gradients(&xb, &yb)?;
            total += loss.to_f64() * chunk.len() as f64;
            adam.step(net.params_mut(), &grads.slices());
        }
        let val_loss = net.loss(val.0, val.1)?.to_f64();
        report.train_loss.push(total / n as f64);
        report.val_loss.push(val_loss);
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: val_loss });
        }
        if val_loss < best.0 {
            best = (val_loss, net.clone());
            report.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    *net = best.1;
    Ok(report)
}

/// Feature rows and both targets for one `(K, constellation, polynomial)` configuration.
///
/// Rows are stored row-major; channel targets are gain-normalised (see
/// [`super::FeatureVector::channel_targets`]) and the variance target is
/// `log10([C_μμ]_mm / σ²)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub users: usize,
    pub features: Vec<f64>,
    pub channel: Vec<f64>,
    pub log_variance: Vec<f64>,
}

impl Dataset {
    pub fn new(users: usize) -> Self {
        Self { users, ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.log_variance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, features: &[f64], channel: &[f64], log_variance: f64) {
        debug_assert_eq!(features.len(), 3 * self.users);
        debug_assert_eq!(channel.len(), 2 * self.users);
        self.features.extend_from_slice(features);
        self.channel.extend_from_slice(channel);
        self.log_variance.push(log_variance);
    }

    pub fn append(&mut self, other: Dataset) {
        self.features.extend(other.features);
        self.channel.extend(other.channel);
        self.log_variance.extend(other.log_variance);
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        let d = 3 * self.users;
        &self.features[i * d..(i + 1) * d]
    }

    pub fn channel_row(&self, i: usize) -> &[f64] {
        let d = 2 * self.users;
        &self.channel[i * d..(i + 1) * d]
    }

    pub fn check(&self) -> Result<()> {
        let n = self.len();
        if self.features.len() != 3 * self.users * n || self.channel.len() != 2 * self.users * n {
            return Err(Error::Dimension(format!("dataset arrays inconsistent with {n} samples and K = {}", self.users)));
        }
        Ok(())
    }
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((v.len() - 1) as f64 * q).round() as usize;
    v[idx.min(v.len() - 1)]
}

/// Indices kept after dropping samples whose score exceeds the `q`-quantile.
fn trim(scores: &[f64], q: f64) -> Vec<usize> {
    if q >= 1.0 {
        return (0..scores.len()).collect();
    }
    let cut = quantile(scores, q);
    (0..scores.len()).filter(|&i| scores[i] <= cut).collect()
}

fn input_matrix(ds: &Dataset, idx: &[usize], scaler: &InputScaler) -> DMatrix<f32> {
    let d = 3 * ds.users;
    let mut out = DMatrix::<f32>::zeros(d, idx.len());
    for (col, &i) in idx.iter().enumerate() {
        let mut row = gain_relative(ds.feature_row(i));
        scaler.transform(&mut row);
        for (j, v) in row.iter().enumerate() {
            out[(j, col)] = *v as f32;
        }
    }
    out
}

fn fit_input_scaler(ds: &Dataset, idx: &[usize]) -> Result<InputScaler> {
    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| gain_relative(ds.feature_row(i))).collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    InputScaler::fit(&refs, ds.users)
}

fn check_pair(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    train.check()?;
    val.check()?;
    if train.users != val.users || train.is_empty() || val.is_empty() {
        return Err(Error::Dimension("training and validation sets must be non-empty with equal K".into()));
    }
    Ok(())
}

/// Channel network `3K -> hidden -> 2K` with a linear output.
pub fn train_channel_net(train: &Dataset, val: &Dataset, cfg: &TrainConfig, seeds: &SeedTree) -> Result<(EstimatorModel, TrainReport)> {
    check_pair(train, val, cfg)?;
    let k = train.users;
    let scores: Vec<f64> = (0..train.len()).map(|i| train.channel_row(i).iter().map(|v| v * v).sum::<f64>()).collect();
    let keep = trim(&scores, cfg.outlier_quantile);
    let inputs = fit_input_scaler(train, &keep)?;
    let x = input_matrix(train, &keep, &inputs);
    let y = DMatrix::from_fn(2 * k, keep.len(), |r, col| train.channel_row(keep[col])[r] as f32);
    let all: Vec<usize> = (0..val.len()).collect();
    let xv = input_matrix(val, &all, &inputs);
    let yv = DMatrix::from_fn(2 * k, val.len(), |r, col| val.channel_row(col)[r] as f32);
    let mut net = Mlp::init(&cfg.widths(3 * k, 2 * k, k), Activation::Relu, Activation::Linear, &mut seeds.stream(Purpose::Init, 0, 0))?;
    let mut report = fit(&mut net, (&x, &y), (&xv, &yv), cfg, &mut seeds.stream(Purpose::Shuffle, 0, 0))?;
    report.trimmed = train.len() - keep.len();
    Ok((EstimatorModel { kind: NetKind::Channel, users: k, net, inputs, output: None, config_hash: String::new() }, report))
}

/// `sum ||net(x) - t||^2 / sum ||t||^2` over a dataset, in the channel net's target space.
pub fn channel_target_nmse(model: &EstimatorModel, ds: &Dataset) -> Result<f64> {
    if model.kind != NetKind::Channel || model.users != ds.users {
        return Err(Error::InvalidArgument("channel model with matching K required".into()));
    }
    ds.check()?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let out = model.net.forward_batch(&input_matrix(ds, &all, &model.inputs))?;
    let (mut err, mut pow) = (0.0, 0.0);
    for (col, i) in all.into_iter().enumerate() {
        for (r, t) in ds.channel_row(i).iter().enumerate() {
            err += (out[(r, col)] as f64 - t).powi(2);
            pow += t * t;
        }
    }
    Ok(err / pow)
}

/// Variance network `3K -> hidden -> 1` with a ReLU output on MinMax-scaled `log10` targets.
pub fn train_variance_net(train: &Dataset, val: &Dataset, cfg: &TrainConfig, seeds: &SeedTree) -> Result<(EstimatorModel, TrainReport)> {
    check_pair(train, val, cfg)?;
    let k = train.users;
    let keep = trim(&train.log_variance, cfg.outlier_quantile);
    let inputs = fit_input_scaler(train, &keep)?;
    let targets: Vec<[f64; 1]> = keep.iter().map(|&i| [train.log_variance[i]]).collect();
    let refs: Vec<&[f64]> = targets.iter().map(|t| t.as_slice()).collect();
    let output = MinMaxScaler::fit(&refs, MINMAX_LO, MINMAX_HI)?;
    let scale = |v: f64| {
        let mut t = [v];
        output.transform(&mut t);
        t[0] as f32
    };
    let x = input_matrix(train, &keep, &inputs);
    let y = DMatrix::from_fn(1, keep.len(), |_, col| scale(train.log_variance[keep[col]]));
    let all: Vec<usize> = (0..val.len()).collect();
    let xv = input_matrix(val, &all, &inputs);
    let yv = DMatrix::from_fn(1, val.len(), |_, col| scale(val.log_variance[col]));
    let mut net = Mlp::init(&cfg.widths(3 * k, 1, k), Activation::Relu, Activation::Relu, &mut seeds.stream(Purpose::Init, 1, 0))?;
    let mut report = fit(&mut net, (&x, &y), (&xv, &yv), cfg, &mut seeds.stream(Purpose::Shuffle, 1, 0))?;
    report.trimmed = train.len() - keep.len();
    Ok((
        EstimatorModel { kind: NetKind::Variance, users: k, net, inputs, output: Some(output), config_hash: String::new() },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::normal;

    fn linear_problem(n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut rng = SeedTree::new(seed).stream(Purpose::Oracle, 0, 0);
        let a = DMatrix::from_row_slice(2, 3, &[0.5, -1.0, 0.25, 2.0, 0.0, -0.75]);
        let x = DMatrix::from_fn(3, n, |_, _| normal(&mut rng));
        let y = &a * &x;
        (x, y)
    }

    #[test]
    fn loss_decreases_over_first_steps() {
        let (x, y) = linear_problem(500, 1);
        let mut net = Mlp::<f64>::init(&[3, 16, 16, 2], Activation::Relu, Activation::Linear, &mut SeedTree::new(2).stream(Purpose::Init, 0, 0)).unwrap();
        let mut adam = Adam::new(AdamConfig::default(), &net.param_sizes());
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let (loss, g) = net.loss_and_gradients(&x, &y).unwrap();
            assert!(loss < last);
            last = loss;
            adam.step(net.params_mut(), &g.slices());
        }
    }

    #[test]
    fn early_stopping_halts_after_patience() {
        // targets are pure noise, so validation loss stops improving quickly
        let mut rng = SeedTree::new(5).stream(Purpose::Oracle, 0, 0);
        let x = DMatrix::from_fn(3, 400, |_, _| normal(&mut rng));
        let y = DMatrix::from_fn(1, 400, |_, _| normal(&mut rng));
        let xv = DMatrix::from_fn(3, 400, |_, _| normal(&mut rng));
        let yv = DMatrix::from_fn(1, 400, |_, _| normal(&mut rng));
        let cfg = TrainConfig { batch_size: 50, max_epochs: 50, patience: 5, adam: AdamConfig { learning_rate: 1e-2, ..AdamConfig::default() }, ..TrainConfig::default() };
        let mut net = Mlp::<f64>::init(&[3, 32, 1], Activation::Relu, Activation::Linear, &mut rng).unwrap();
        let report = fit(&mut net, (&x, &y), (&xv, &yv), &cfg, &mut rng).unwrap();
        assert!(report.stopped_early);
        assert_eq!(report.val_loss.len(), report.best_epoch + 1 + cfg.patience);
        let restored = net.loss(&xv, &yv).unwrap();
        assert!((restored - report.best_val_loss()).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_reported() {
        let (x, y) = linear_problem(100, 3);
        let cfg = TrainConfig { adam: AdamConfig { learning_rate: f64::NAN, ..AdamConfig::default() }, batch_size: 50, ..TrainConfig::default() };
        let mut net = Mlp::<f64>::init(&[3, 4, 2], Activation::Relu, Activation::Linear, &mut SeedTree::new(1).stream(Purpose::Init, 0, 0)).unwrap();
        let err = fit(&mut net, (&x, &y), (&x, &y), &cfg, &mut SeedTree::new(1).stream(Purpose::Shuffle, 0, 0));
        assert!(matches!(err, Err(Error::Diverged { epoch: 0, .. })));
    }

    #[test]
    fn trimming_drops_the_top_tail() {
        let scores: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let kept = trim(&scores, 0.995);
        assert_eq!(kept.len(), 995);
        assert_eq!(trim(&scores, 1.0).len(), 1000);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { patience: 60, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { outlier_quantile: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert_eq!(TrainConfig::default().widths(15, 10, 5), vec![15, 150, 150, 10]);
    }
}
