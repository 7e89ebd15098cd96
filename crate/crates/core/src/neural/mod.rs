//! Learned estimators of the effective channel and the distortion-plus-noise variance.

mod adam;
mod features;
mod mlp;
mod model;
mod scalers;
mod train;

pub use adam::{Adam, AdamConfig};
pub use features::{build_features, gain_features, gain_order, gain_relative, FeatureVector};
pub use mlp::{Activation, ForwardCache, Gradients, Layer, Mlp, Real};
pub use model::{EstimatorModel, NetKind, MODEL_FORMAT_VERSION};
pub use scalers::{InputScaler, MinMaxScaler, StandardScaler, MINMAX_HI, MINMAX_LO};
pub use train::{channel_target_nmse, fit, train_channel_net, train_variance_net, Dataset, TrainConfig, TrainReport};
