//! Experiment configuration: JSON file, dotted overrides and the config hash.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::constellation::ConstellationKind;
use crate::distortion::{HardwarePolynomial, Side};
use crate::error::{Error, Result};
use crate::linalg::c;
use crate::neural::TrainConfig;
use crate::receivers::CombinerKind;
use crate::scenario::ScenarioConfig;

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let s = s.trim().to_ascii_lowercase();
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| Error::Config(format!("unknown {} '{s}'", stringify!($name))))
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;

            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }

        impl From<$name> for String {
            fn from(v: $name) -> String {
                v.name().to_string()
            }
        }
    };
}

named_enum!(
    ExperimentKind {
        SeCdf => "se-cdf",
        NmseChannel => "nmse-channel",
        NmseVariance => "nmse-variance",
        Ber => "ber",
        DatasetGen => "dataset-gen",
        Train => "train",
        Eval => "eval",
        Export => "export",
    }
);

named_enum!(
    /// Channel estimators (`dua-lmmse`, `da-lmmse`, `dl`) and variance estimators
    /// (`mc-lmmse-lin`, `mc-lmmse-log`, `dl`).
    EstimatorKind {
        DuaLmmse => "dua-lmmse",
        DaLmmse => "da-lmmse",
        McLmmseLin => "mc-lmmse-lin",
        McLmmseLog => "mc-lmmse-log",
        Dl => "dl",
    }
);

named_enum!(
    /// Receiver and channel-knowledge pairs compared in the BER experiment.
    BerCombo {
        DuaRzf => "dua-rzf",
        DaRzfLmmse => "da-rzf-lmmse",
        DaRzfDl => "da-rzf-dl",
        DaRzfPerfect => "da-rzf-perfect",
        EwDaMmseDl => "ew-da-mmse-dl",
        EwDaMmsePerfect => "ew-da-mmse-perfect",
    }
);

impl BerCombo {
    pub fn needs_models(self) -> bool {
        matches!(self, BerCombo::DaRzfDl | BerCombo::EwDaMmseDl)
    }
}

impl EstimatorKind {
    pub fn is_channel(self) -> bool {
        matches!(self, Self::DuaLmmse | Self::DaLmmse | Self::Dl)
    }

    pub fn is_variance(self) -> bool {
        matches!(self, Self::McLmmseLin | Self::McLmmseLog | Self::Dl)
    }
}

/// Reference polynomial as `(re, im)` pairs per order, with the backoff in dB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolynomialConfig {
    pub coeffs: Vec<[f64; 2]>,
    pub backoff_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_antenna: Option<Vec<Vec<[f64; 2]>>>,
}

impl Default for PolynomialConfig {
    fn default() -> Self {
        Self { coeffs: vec![[1.0, 0.0], [-0.125, -0.025]], backoff_db: 7.0, per_antenna: None }
    }
}

impl PolynomialConfig {
    pub fn linear() -> Self {
        Self { coeffs: vec![[1.0, 0.0]], backoff_db: 7.0, per_antenna: None }
    }

    pub fn build(&self, side: Side) -> Result<HardwarePolynomial> {
        let conv = |v: &[[f64; 2]]| v.iter().map(|p| c(p[0], p[1])).collect::<Vec<_>>();
        let poly = HardwarePolynomial::new(side, conv(&self.coeffs), self.backoff_db)?;
        match &self.per_antenna {
            Some(rows) => poly.with_per_antenna(rows.iter().map(|r| conv(r)).collect()),
            None => Ok(poly),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPaths {
    pub channel: PathBuf,
    pub variance: PathBuf,
}

impl Default for ModelPaths {
    fn default() -> Self {
        Self { channel: PathBuf::from("models/channel.json"), variance: PathBuf::from("models/variance.json") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub bs: PolynomialConfig,
    pub ue: PolynomialConfig,
    pub constellation: ConstellationKind,
    /// Pilot length; defaults to `K`.
    pub pilot_length: Option<usize>,
    pub setups: usize,
    pub realizations: usize,
    /// Data symbols per realization in the BER experiment.
    pub symbols: usize,
    pub estimators: Vec<EstimatorKind>,
    pub receivers: Vec<CombinerKind>,
    pub ber_combos: Vec<BerCombo>,
    /// Monte-Carlo draws for fitting the affine variance estimators.
    pub mc_lmmse_draws: usize,
    pub train: TrainConfig,
    /// Model files; relative paths resolve against the output directory.
    pub models: ModelPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scenario: ScenarioConfig::default(),
            bs: PolynomialConfig::default(),
            ue: PolynomialConfig::default(),
            constellation: ConstellationKind::Qpsk,
            pilot_length: None,
            setups: 100,
            realizations: 100,
            symbols: 2000,
            estimators: vec![EstimatorKind::DuaLmmse, EstimatorKind::DaLmmse, EstimatorKind::Dl],
            receivers: vec![CombinerKind::DaMrc, CombinerKind::DaRzf, CombinerKind::EwDaMmse, CombinerKind::DaMmse],
            ber_combos: BerCombo::ALL.to_vec(),
            mc_lmmse_draws: 100_000,
            train: TrainConfig::default(),
            models: ModelPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        self.bs.build(Side::Bs)?;
        self.ue.build(Side::Ue)?;
        if self.setups == 0 || self.realizations == 0 || self.symbols == 0 {
            return Err(Error::Config("setups, realizations and symbols must be at least 1".into()));
        }
        if self.pilot_length.is_some_and(|t| t < self.scenario.k) {
            return Err(Error::Config(format!("pilot length below K = {}", self.scenario.k)));
        }
        if self.mc_lmmse_draws < 2 {
            return Err(Error::Config("mc_lmmse_draws must be at least 2".into()));
        }
        Ok(())
    }

    pub fn pilot_length(&self) -> usize {
        self.pilot_length.unwrap_or(self.scenario.k)
    }

    /// Hex SHA-256 of the canonical JSON form, truncated to 16 characters.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_path(&self, out: &Path, which: &Path) -> PathBuf {
        if which.is_absolute() {
            which.to_path_buf()
        } else {
            out.join(which)
        }
    }

    /// Parses a JSON config and applies `key.path=value` overrides.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        if !value.is_object() {
            return Err(Error::Config("config root must be an object".into()));
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_with_overrides(&text, overrides)
    }
}

/// Sets a dotted path in a JSON object. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let parsed = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}' descends into a non-object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override '{key}' descends into a non-object")))?;
    obj.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = ExperimentConfig::from_json_with_overrides("{}", &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.pilot_length(), 5);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = ExperimentConfig::from_json_with_overrides(
            r#"{"scenario": {"m": 16}}"#,
            &["scenario.k=3".into(), "estimators=[\"da-lmmse\"]".into(), "constellation=gaussian".into(), "train.adam.learning_rate=0.01".into()],
        )
        .unwrap();
        assert_eq!((cfg.scenario.m, cfg.scenario.k), (16, 3));
        assert_eq!(cfg.estimators, vec![EstimatorKind::DaLmmse]);
        assert_eq!(cfg.constellation, ConstellationKind::CircularGaussian);
        assert_eq!(cfg.train.adam.learning_rate, 0.01);
    }

    #[test]
    fn config_errors() {
        for bad in ["[1]", "{\"bogus\": 1}", "{\"setups\": 0}", "{\"estimators\": [\"zf\"]}", "not json"] {
            assert!(matches!(ExperimentConfig::from_json_with_overrides(bad, &[]), Err(Error::Config(_))), "{bad}");
        }
        assert!(ExperimentConfig::from_json_with_overrides("{}", &["noequals".into()]).is_err());
        assert!(ExperimentConfig::from_json_with_overrides("{}", &["seed.x=1".into()]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), *k);
        }
        for k in BerCombo::ALL {
            assert_eq!(k.name().parse::<BerCombo>().unwrap(), *k);
        }
    }
}
