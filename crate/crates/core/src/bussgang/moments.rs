use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, XPoly};
use crate::distortion::NormalizedUeCoeffs;
use crate::linalg::{C64, ZERO};

/// Exact tables of `E{υ^a (υ*)^b}` and `E{υ^a (υ*)^b ς*}` for `a, b <= max`.
///
/// Entries outside the four-fold lattice are stored as exact zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolCrossMoments {
    max: usize,
    plain: Vec<C64>,
    with_symbol: Vec<C64>,
}

/// `a - b` is a multiple of four.
#[inline]
pub fn on_lattice(a: usize, b: usize) -> bool {
    (a as i64 - b as i64).rem_euclid(4) == 0
}

impl SymbolCrossMoments {
    pub fn max_index(&self) -> usize {
        self.max
    }

    /// `E{υ^a (υ*)^b}`.
    #[inline]
    pub fn plain(&self, a: usize, b: usize) -> C64 {
        self.plain[a * (self.max + 1) + b]
    }

    /// `E{υ^a (υ*)^b ς*}`.
    #[inline]
    pub fn with_symbol(&self, a: usize, b: usize) -> C64 {
        self.with_symbol[a * (self.max + 1) + b]
    }
}

/// Builds the tables by enumeration (finite sets) or exponential moments (Gaussian).
pub fn symbol_cross_moments(cons: &Constellation, ue: &NormalizedUeCoeffs, max: usize) -> SymbolCrossMoments {
    let n = max + 1;
    let mut plain = vec![ZERO; n * n];
    let mut with_symbol = vec![ZERO; n * n];
    if cons.is_gaussian() {
        // υ = ς f(x), x = |ς|^2 ~ Exp(1): only a = b (plain) and a = b + 1 survive
        let f = XPoly(ue.0.clone());
        let fc = f.conj();
        for a in 0..n {
            plain[a * n + a] = f.pow(a).mul(&fc.pow(a)).exp_moment(a);
            if a >= 1 {
                with_symbol[a * n + a - 1] = f.pow(a).mul(&fc.pow(a - 1)).exp_moment(a);
            }
        }
    } else {
        let vs: Vec<(C64, C64)> = cons.symbols().iter().map(|&s| (ue.apply(s), s)).collect();
        let count = vs.len() as f64;
        for a in 0..n {
            for b in 0..n {
                if on_lattice(a, b) {
                    let s: C64 = vs.iter().map(|(v, _)| v.powu(a as u32) * v.conj().powu(b as u32)).sum();
                    plain[a * n + b] = s / count;
                }
                if on_lattice(a, b + 1) {
                    let s: C64 = vs
                        .iter()
                        .map(|(v, x)| v.powu(a as u32) * v.conj().powu(b as u32) * x.conj())
                        .sum();
                    with_symbol[a * n + b] = s / count;
                }
            }
        }
    }
    SymbolCrossMoments { max, plain, with_symbol }
}
