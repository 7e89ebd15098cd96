//! UMi drops, large-scale fading, power control and Rician channel draws.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_db, CMat, C64};
use crate::rng::complex_normal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// BS antennas.
    pub m: usize,
    /// UEs.
    pub k: usize,
    pub cell_side_m: f64,
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub noise_dbm: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub p_max_w: f64,
    pub power_control_db: f64,
    pub min_distance_m: f64,
    pub umi: UmiParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m: 32,
            k: 5,
            cell_side_m: 250.0,
            carrier_ghz: 2.0,
            bandwidth_mhz: 20.0,
            noise_dbm: -96.0,
            bs_height_m: 10.0,
            ue_height_m: 1.5,
            p_max_w: 0.2,
            power_control_db: 20.0,
            min_distance_m: 10.0,
            umi: UmiParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 {
            return Err(Error::Config("M and K must be at least 1".into()));
        }
        if !(self.p_max_w > 0.0) || !self.noise_dbm.is_finite() {
            return Err(Error::Config("p_max must be positive and the noise power finite".into()));
        }
        if self.power_control_db < 0.0 {
            return Err(Error::Config("power-control spread must be at least 0 dB".into()));
        }
        if self.min_distance_m * 2.0 >= self.cell_side_m {
            return Err(Error::Config("minimum distance does not fit in the cell".into()));
        }
        Ok(())
    }

    /// Noise power in watts.
    pub fn sigma2(&self) -> f64 {
        from_db(self.noise_dbm - 30.0)
    }
}

/// Urban-microcell pathloss, LOS probability, shadowing and Rician factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UmiParams {
    /// `[A, B, C]` in `A + B log10(d) + C log10(f_GHz)`.
    pub los_pathloss: [f64; 3],
    pub nlos_pathloss: [f64; 3],
    pub los_shadowing_db: f64,
    pub nlos_shadowing_db: f64,
    /// `d1, d2` in `min(d1/d, 1)(1 - e^{-d/d2}) + e^{-d/d2}`.
    pub los_probability: [f64; 2],
    /// `κ_dB = a + b d` for LOS UEs.
    pub rician_db: [f64; 2],
}

impl Default for UmiParams {
    fn default() -> Self {
        Self {
            los_pathloss: [28.0, 22.0, 20.0],
            nlos_pathloss: [22.7, 36.7, 26.0],
            los_shadowing_db: 3.0,
            nlos_shadowing_db: 4.0,
            los_probability: [18.0, 36.0],
            rician_db: [13.0, -0.03],
        }
    }
}

impl UmiParams {
    pub fn pathloss_db(&self, los: bool, d: f64, f_ghz: f64) -> f64 {
        let [a, b, c] = if los { self.los_pathloss } else { self.nlos_pathloss };
        a + b * d.log10() + c * f_ghz.log10()
    }

    pub fn los_probability(&self, d: f64) -> f64 {
        let [d1, d2] = self.los_probability;
        let e = (-d / d2).exp();
        (d1 / d).min(1.0) * (1.0 - e) + e
    }

    /// Linear Rician factor; zero for NLOS UEs.
    pub fn rician_factor(&self, los: bool, d: f64) -> f64 {
        if los {
            from_db(self.rician_db[0] + self.rician_db[1] * d)
        } else {
            0.0
        }
    }
}

/// Large-scale parameters of one drop.
///
/// `beta[k]` is the per-antenna variance of the scattered part; `gbar` holds
/// the LOS means as columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeScale {
    pub beta: Vec<f64>,
    pub gbar: CMat,
    pub los: Vec<bool>,
    pub kappa: Vec<f64>,
    pub distance: Vec<f64>,
    pub power: Vec<f64>,
    /// `η_k = p_k / χ_2`.
    pub eta: Vec<f64>,
    pub sigma2: f64,
}

impl LargeScale {
    /// Builds a drop from explicit statistics; used by tests and bindings.
    pub fn from_parts(beta: Vec<f64>, gbar: CMat, power: Vec<f64>, eta: Vec<f64>, sigma2: f64) -> Result<Self> {
        let k = beta.len();
        if gbar.ncols() != k || power.len() != k || eta.len() != k {
            return Err(Error::Dimension(format!("inconsistent large-scale sizes for K = {k}")));
        }
        if beta.iter().any(|b| *b < 0.0) || !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument("β must be non-negative and σ² positive".into()));
        }
        let los = (0..k).map(|i| gbar.column(i).norm_squared() > 0.0).collect();
        Ok(Self {
            beta,
            gbar,
            los,
            kappa: vec![0.0; k],
            distance: vec![f64::NAN; k],
            power,
            eta,
            sigma2,
        })
    }

    pub fn antennas(&self) -> usize {
        self.gbar.nrows()
    }

    pub fn users(&self) -> usize {
        self.beta.len()
    }

    /// Total per-antenna gain `β_k + ||ḡ_k||^2 / M`.
    pub fn total_gain(&self, k: usize) -> f64 {
        self.beta[k] + self.gbar.column(k).norm_squared() / self.antennas() as f64
    }

    /// `E{|u_m|^2} = sum_k (|ḡ_km|^2 + β_k) p_k`.
    pub fn input_power(&self) -> Vec<f64> {
        (0..self.antennas())
            .map(|m| (0..self.users()).map(|k| (self.gbar[(m, k)].norm_sqr() + self.beta[k]) * self.power[k]).sum())
            .collect()
    }

    /// Received SNR `p_k (β_k + ||ḡ_k||^2/M) / σ²` per UE.
    pub fn snr(&self) -> Vec<f64> {
        (0..self.users()).map(|k| self.power[k] * self.total_gain(k) / self.sigma2).collect()
    }

    /// Recomputes `η_k` for a new `χ_2`.
    pub fn set_chi2(&mut self, chi2: f64) {
        self.eta = self.power.iter().map(|p| p / chi2).collect();
    }
}

/// `p_k = p_max min(1, Δ β_min / β_k)` with `Δ` linear.
pub fn power_control(gains: &[f64], p_max: f64, delta: f64) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::InvalidArgument("power control needs at least one UE".into()));
    }
    if delta < 1.0 {
        return Err(Error::InvalidArgument(format!("power-control spread {delta} below 1")));
    }
    let min = gains.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(gains.iter().map(|g| p_max * (delta * min / g).min(1.0)).collect())
}

/// Draws UE positions and large-scale fading for one setup.
pub fn sample_drop<R: Rng + ?Sized>(cfg: &ScenarioConfig, chi2: f64, rng: &mut R) -> Result<LargeScale> {
    cfg.validate()?;
    let (m, k) = (cfg.m, cfg.k);
    let half = cfg.cell_side_m / 2.0;
    let dh = cfg.bs_height_m - cfg.ue_height_m;
    let mut beta = Vec::with_capacity(k);
    let mut gain = Vec::with_capacity(k);
    let mut los = Vec::with_capacity(k);
    let mut kappa = Vec::with_capacity(k);
    let mut distance = Vec::with_capacity(k);
    let mut gbar = CMat::zeros(m, k);
    for col in 0..k {
        let (x, y) = loop {
            let x = rng.random_range(-half..half);
            let y = rng.random_range(-half..half);
            if x.hypot(y) >= cfg.min_distance_m {
                break (x, y);
            }
        };
        let d2 = x.hypot(y);
        let d3 = d2.hypot(dh);
        let is_los = rng.random::<f64>() < cfg.umi.los_probability(d2);
        let sf = if is_los { cfg.umi.los_shadowing_db } else { cfg.umi.nlos_shadowing_db };
        let shadow = Normal::new(0.0, sf).expect("finite shadowing").sample(rng);
        let total = from_db(-cfg.umi.pathloss_db(is_los, d3, cfg.carrier_ghz) + shadow);
        let kap = cfg.umi.rician_factor(is_los, d3);
        let theta = y.atan2(x);
        let amp = (kap / (kap + 1.0) * total).sqrt();
        for a in 0..m {
            gbar[(a, col)] = C64::from_polar(amp, PI * a as f64 * theta.sin());
        }
        beta.push(total / (kap + 1.0));
        gain.push(total);
        los.push(is_los);
        kappa.push(kap);
        distance.push(d3);
    }
    let power = power_control(&gain, cfg.p_max_w, from_db(cfg.power_control_db))?;
    let eta = power.iter().map(|p| p / chi2).collect();
    Ok(LargeScale {
        beta,
        gbar,
        los,
        kappa,
        distance,
        power,
        eta,
        sigma2: cfg.sigma2(),
    })
}

/// `g_km = ḡ_km + sqrt(β_k) (x + jy)/sqrt(2)`.
pub fn sample_channel<R: Rng + ?Sized>(ls: &LargeScale, rng: &mut R) -> CMat {
    let (m, k) = (ls.antennas(), ls.users());
    let mut g = ls.gbar.clone();
    for col in 0..k {
        let s = ls.beta[col].sqrt();
        for row in 0..m {
            g[(row, col)] += complex_normal(rng) * s;
        }
    }
    g
}

/// Scales column `k` by `sqrt(η_k)`: the `g̃` of the effective-channel formulas.
pub fn scaled_channel(g: &CMat, eta: &[f64]) -> CMat {
    let mut out = g.clone();
    for (k, e) in eta.iter().enumerate() {
        out.column_mut(k).scale_mut(e.sqrt());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::rng::{Purpose, SeedTree};
    use proptest::prelude::*;

    #[test]
    fn los_pathloss_hand_value() {
        let p = UmiParams::default();
        let pl = p.pathloss_db(true, 100.0, 2.0);
        assert!((pl - (28.0 + 44.0 + 20.0 * 2f64.log10())).abs() < 1e-12);
        assert!((pl - 78.0206).abs() < 1e-4);
        let nlos = p.pathloss_db(false, 100.0, 2.0);
        assert!((nlos - (22.7 + 73.4 + 26.0 * 2f64.log10())).abs() < 1e-12);
    }

    #[test]
    fn los_probability_limits() {
        let p = UmiParams::default();
        assert!((p.los_probability(1e-9) - 1.0).abs() < 1e-9);
        assert!((p.los_probability(18.0) - 1.0).abs() < 1e-12);
        let d: f64 = 100.0;
        let e = (-d / 36.0).exp();
        assert!((p.los_probability(d) - (0.18 * (1.0 - e) + e)).abs() < 1e-15);
    }

    #[test]
    fn power_control_examples() {
        assert_eq!(power_control(&[1.0, 1.0], 0.2, 100.0).unwrap(), vec![0.2, 0.2]);
        let p = power_control(&[1.0, 1000.0], 0.2, 100.0).unwrap();
        assert!((p[0] - 0.2).abs() < 1e-15 && (p[1] - 0.02).abs() < 1e-15);
        assert!(power_control(&[], 0.2, 100.0).is_err());
        assert!(power_control(&[1.0], 0.2, 0.5).is_err());
    }

    #[test]
    fn single_user_full_power() {
        let cfg = ScenarioConfig { k: 1, m: 4, ..Default::default() };
        let mut rng = SeedTree::new(3).stream(Purpose::Drop, 0, 0);
        for _ in 0..20 {
            let ls = sample_drop(&cfg, 1.0, &mut rng).unwrap();
            assert_eq!(ls.power, vec![0.2]);
        }
    }

    #[test]
    fn received_power_spread_bounded() {
        let cfg = ScenarioConfig::default();
        let delta = from_db(cfg.power_control_db);
        let mut rng = SeedTree::new(11).stream(Purpose::Drop, 0, 0);
        for _ in 0..100 {
            let ls = sample_drop(&cfg, 1.0, &mut rng).unwrap();
            let rx: Vec<f64> = (0..cfg.k).map(|k| ls.total_gain(k) * ls.power[k]).collect();
            let hi = rx.iter().copied().fold(0.0, f64::max);
            let lo = rx.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(hi / lo <= delta * (1.0 + 1e-9));
            assert!(ls.power.iter().all(|p| *p <= cfg.p_max_w));
            assert!(ls.distance.iter().all(|d| *d >= cfg.min_distance_m));
        }
    }

    #[test]
    fn decomposition_of_los_power() {
        let cfg = ScenarioConfig { m: 16, k: 8, ..Default::default() };
        let mut rng = SeedTree::new(2).stream(Purpose::Drop, 0, 0);
        let ls = sample_drop(&cfg, 1.0, &mut rng).unwrap();
        for k in 0..cfg.k {
            let total = ls.beta[k] * (ls.kappa[k] + 1.0);
            let los_energy = ls.gbar.column(k).norm_squared();
            assert!((los_energy - ls.kappa[k] / (ls.kappa[k] + 1.0) * total * 16.0).abs() <= 1e-9 * total * 16.0);
            if !ls.los[k] {
                assert_eq!(los_energy, 0.0);
            }
        }
    }

    #[test]
    fn deterministic_drops() {
        let cfg = ScenarioConfig::default();
        let tree = SeedTree::new(99);
        let a = sample_drop(&cfg, 1.0, &mut tree.stream(Purpose::Drop, 4, 0)).unwrap();
        let b = sample_drop(&cfg, 1.0, &mut tree.stream(Purpose::Drop, 4, 0)).unwrap();
        assert_eq!(a, b);
        let ga = sample_channel(&a, &mut tree.stream(Purpose::Channel, 4, 1));
        let gb = sample_channel(&b, &mut tree.stream(Purpose::Channel, 4, 1));
        assert_eq!(ga, gb);
    }

    #[test]
    fn zero_variance_channel_is_the_mean() {
        let gbar = CMat::from_element(3, 1, c(0.5, -0.2));
        let ls = LargeScale::from_parts(vec![0.0], gbar.clone(), vec![1.0], vec![1.0], 1.0).unwrap();
        let g = sample_channel(&ls, &mut SeedTree::new(0).stream(Purpose::Channel, 0, 0));
        assert_eq!(g, gbar);
    }

    #[test]
    fn channel_statistics_match() {
        let gbar = CMat::from_row_slice(2, 2, &[c(0.3, 0.4), c(0.0, 0.0), c(-0.1, 0.2), c(0.0, 0.0)]);
        let beta = vec![0.5, 2.0];
        let ls = LargeScale::from_parts(beta.clone(), gbar.clone(), vec![1.0; 2], vec![1.0; 2], 1.0).unwrap();
        let mut rng = SeedTree::new(8).stream(Purpose::Channel, 0, 0);
        let n = 100_000;
        let mut mean = CMat::zeros(2, 2);
        let mut var = [[0.0; 2]; 2];
        for _ in 0..n {
            let g = sample_channel(&ls, &mut rng);
            mean += &g;
            for m in 0..2 {
                for k in 0..2 {
                    var[m][k] += (g[(m, k)] - gbar[(m, k)]).norm_sqr();
                }
            }
        }
        mean /= c(n as f64, 0.0);
        for m in 0..2 {
            for k in 0..2 {
                let v = var[m][k] / n as f64;
                assert!((v / beta[k] - 1.0).abs() < 0.02);
                let se = (beta[k] / n as f64).sqrt();
                assert!((mean[(m, k)] - gbar[(m, k)]).norm() < 3.0 * se * 1.5);
            }
        }
    }

    proptest! {
        #[test]
        fn power_control_is_scale_invariant(g in proptest::collection::vec(1e-12f64..1e-6, 1..8), s in 1e-3f64..1e3) {
            let a = power_control(&g, 0.2, 100.0).unwrap();
            let scaled: Vec<f64> = g.iter().map(|x| x * s).collect();
            let b = power_control(&scaled, 0.2, 100.0).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * 0.2);
            }
        }
    }
}
