//! Transmit symbol ensembles and their even-order moments.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distortion::NormalizedUeCoeffs;
use crate::error::{Error, Result};
use crate::linalg::{c, C64, ZERO};
use crate::rng::complex_normal;

/// Largest even moment order tabulated by default: `2(T + R) + 4` with `T = R = 3`.
pub const DEFAULT_MAX_MOMENT_ORDER: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ConstellationKind {
    Qpsk,
    SquareQam(usize),
    CircularGaussian,
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "qpsk" | "qam4" => Ok(Self::Qpsk),
            "gaussian" => Ok(Self::CircularGaussian),
            other => other
                .strip_prefix("qam")
                .and_then(|n| n.parse::<usize>().ok())
                .map(Self::SquareQam)
                .ok_or_else(|| Error::UnsupportedConstellation(s.to_string())),
        }
    }
}

impl TryFrom<String> for ConstellationKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ConstellationKind> for String {
    fn from(k: ConstellationKind) -> String {
        k.to_string()
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Qpsk => write!(f, "qpsk"),
            Self::SquareQam(m) => write!(f, "qam{m}"),
            Self::CircularGaussian => write!(f, "gaussian"),
        }
    }
}

/// Equiprobable unit-power symbol set, or the circular Gaussian ensemble.
#[derive(Clone, Debug)]
pub struct Constellation {
    kind: ConstellationKind,
    symbols: Vec<C64>,
    labels: Vec<u32>,
    bits_per_symbol: usize,
    levels: usize,
    scale: f64,
    /// `zeta[i] = E{|ς|^{2i}}`.
    zeta: Vec<f64>,
}

impl Constellation {
    pub fn new(kind: ConstellationKind) -> Result<Self> {
        build_constellation(kind, DEFAULT_MAX_MOMENT_ORDER)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::new(name.parse()?)
    }

    pub fn qpsk() -> Self {
        Self::new(ConstellationKind::Qpsk).expect("qpsk")
    }

    pub fn gaussian() -> Self {
        Self::new(ConstellationKind::CircularGaussian).expect("gaussian")
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn is_gaussian(&self) -> bool {
        self.kind == ConstellationKind::CircularGaussian
    }

    /// Symbol points; empty for the Gaussian ensemble.
    pub fn symbols(&self) -> &[C64] {
        &self.symbols
    }

    /// Gray bit label of each symbol.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn max_order(&self) -> usize {
        2 * (self.zeta.len() - 1)
    }

    /// `ζ_l = E{|ς|^l}` for even `l`.
    pub fn moment(&self, l: usize) -> Result<f64> {
        if l % 2 == 1 {
            return Err(Error::OddMomentOrder(l));
        }
        self.zeta.get(l / 2).copied().ok_or(Error::MomentOrderTooLarge {
            order: l,
            max: self.max_order(),
        })
    }

    /// `ζ_l` for an order known to be tabulated.
    pub fn zeta(&self, l: usize) -> f64 {
        self.moment(l).expect("moment order within table")
    }

    /// `E{ς^{l1} (ς*)^{l2}}`.
    pub fn mixed_moment(&self, l1: usize, l2: usize) -> C64 {
        if self.is_gaussian() {
            return if l1 == l2 { c(factorial(l1), 0.0) } else { ZERO };
        }
        self.expect(|s| s.powu(l1 as u32) * s.conj().powu(l2 as u32))
    }

    /// Average of `f` over the equiprobable symbols (finite sets only).
    pub fn expect<F: Fn(C64) -> C64>(&self, f: F) -> C64 {
        debug_assert!(!self.is_gaussian());
        let sum: C64 = self.symbols.iter().map(|&s| f(s)).sum();
        sum / self.symbols.len() as f64
    }

    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.symbols.len())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> C64 {
        if self.is_gaussian() {
            complex_normal(rng)
        } else {
            self.symbols[self.draw_index(rng)]
        }
    }

    /// Nearest-symbol decision by per-axis slicing on the square grid.
    pub fn decide(&self, z: C64) -> usize {
        let l = self.levels;
        let slice = |v: f64| {
            let pos = (v / self.scale + (l as f64 - 1.0)) / 2.0;
            pos.round().clamp(0.0, (l - 1) as f64) as usize
        };
        slice(z.re) * l + slice(z.im)
    }
}

/// Builds a symbol set with moment tables up to `max_order`.
pub fn build_constellation(kind: ConstellationKind, max_order: usize) -> Result<Constellation> {
    let max_order = max_order.max(2) & !1;
    let (symbols, labels, bits, levels, scale) = match kind {
        ConstellationKind::CircularGaussian => (Vec::new(), Vec::new(), 0, 0, 0.0),
        ConstellationKind::Qpsk => square_qam(4),
        ConstellationKind::SquareQam(m) => {
            let side = (m as f64).sqrt().round() as usize;
            if m < 16 || side * side != m || !side.is_power_of_two() {
                return Err(Error::UnsupportedConstellation(format!("qam{m}")));
            }
            square_qam(m)
        }
    };
    let zeta = (0..=max_order / 2)
        .map(|i| {
            if kind == ConstellationKind::CircularGaussian {
                factorial(i)
            } else {
                symbols.iter().map(|s| s.norm_sqr().powi(i as i32)).sum::<f64>() / symbols.len() as f64
            }
        })
        .collect();
    Ok(Constellation {
        kind,
        symbols,
        labels,
        bits_per_symbol: bits,
        levels,
        scale,
        zeta,
    })
}

fn gray(i: usize) -> u32 {
    (i ^ (i >> 1)) as u32
}

fn square_qam(m: usize) -> (Vec<C64>, Vec<u32>, usize, usize, f64) {
    let side = (m as f64).sqrt().round() as usize;
    let axis_bits = side.trailing_zeros() as usize;
    let scale = (1.5 / (m as f64 - 1.0)).sqrt();
    let amp = |i: usize| (2.0 * i as f64 - (side as f64 - 1.0)) * scale;
    let mut symbols = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for ix in 0..side {
        for iq in 0..side {
            symbols.push(c(amp(ix), amp(iq)));
            labels.push((gray(ix) << axis_bits) | gray(iq));
        }
    }
    (symbols, labels, 2 * axis_bits, side, scale)
}

/// True iff the multiset of points is invariant under multiplication by `j`.
pub fn shift_symmetric(points: &[C64]) -> bool {
    let tol = 1e-9;
    let mut used = vec![false; points.len()];
    points.iter().all(|p| {
        let q = p * c(0.0, 1.0);
        match (0..points.len()).find(|&i| !used[i] && (points[i] - q).norm() < tol) {
            Some(i) => {
                used[i] = true;
                true
            }
            None => false,
        }
    })
}

pub fn check_shift_symmetry(c: &Constellation) -> bool {
    c.is_gaussian() || shift_symmetric(c.symbols())
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Even-order moments `χ_l = E{|υ|^l}` of the distorted symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortedMoments {
    /// `chi[i] = χ_{2i}`.
    pub chi: Vec<f64>,
}

impl DistortedMoments {
    pub fn chi(&self, l: usize) -> f64 {
        assert!(l % 2 == 0, "odd moment order {l}");
        self.chi[l / 2]
    }
}

/// Real polynomial in `x = |ς|^2` with complex coefficients, lowest order first.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct XPoly(pub Vec<C64>);

impl XPoly {
    pub fn one() -> Self {
        Self(vec![c(1.0, 0.0)])
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![ZERO; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self(out)
    }

    pub fn conj(&self) -> Self {
        Self(self.0.iter().map(|a| a.conj()).collect())
    }

    pub fn pow(&self, n: usize) -> Self {
        (0..n).fold(Self::one(), |acc, _| acc.mul(self))
    }

    /// `E{x^shift p(x)}` for `x ~ Exp(1)`, using `E{x^n} = n!`.
    pub fn exp_moment(&self, shift: usize) -> C64 {
        self.0
            .iter()
            .enumerate()
            .map(|(n, a)| a * factorial(n + shift))
            .sum()
    }
}

/// Exact χ table: enumeration for finite sets, moment expansion for Gaussian.
pub fn distorted_moments(cons: &Constellation, ue: &NormalizedUeCoeffs) -> DistortedMoments {
    let half = cons.max_order() / 2;
    let chi = if cons.is_gaussian() {
        // |υ|^{2i} = x^i (f f̄)^i with f(x) = Σ b̃_r x^r
        let f = XPoly(ue.0.clone());
        let ff = f.mul(&f.conj());
        (0..=half).map(|i| ff.pow(i).exp_moment(i).re).collect()
    } else {
        (0..=half)
            .map(|i| {
                cons.symbols()
                    .iter()
                    .map(|&s| ue.apply(s).norm_sqr().powi(i as i32))
                    .sum::<f64>()
                    / cons.symbols().len() as f64
            })
            .collect()
    };
    DistortedMoments { chi }
}

/// `η_k = p_k / χ_2`.
pub fn power_scale(p: f64, chi2: f64) -> Result<f64> {
    if !(p > 0.0) || !(chi2 > 0.0) {
        return Err(Error::InvalidArgument(format!("power scaling needs p > 0 and χ2 > 0, got {p}, {chi2}")));
    }
    Ok(p / chi2)
}
