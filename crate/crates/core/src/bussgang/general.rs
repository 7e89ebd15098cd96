use crate::constellation::factorial;
use crate::distortion::NormalizedBsCoeffs;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};

use super::moments::{on_lattice, SymbolCrossMoments};

/// Powers `(a, b)` of `υ_l` and `υ_l^*` carried by one interfering UE.
type Pattern = (usize, usize);

fn multinomial(n: usize, parts: impl Iterator<Item = usize>) -> f64 {
    parts.fold(factorial(n), |acc, p| acc / factorial(p))
}

/// Multisets of non-trivial lattice patterns summing to `(rk, rl)`, generated
/// in non-decreasing order so each multiset appears once.
fn pattern_multisets(rk: usize, rl: usize, max_len: usize) -> Vec<Vec<Pattern>> {
    fn rec(rk: usize, rl: usize, min: Pattern, max_len: usize, cur: &mut Vec<Pattern>, out: &mut Vec<Vec<Pattern>>) {
        if rk == 0 && rl == 0 {
            out.push(cur.clone());
            return;
        }
        if cur.len() == max_len {
            return;
        }
        for a in min.0..=rk {
            let b_start = if a == min.0 { min.1 } else { 0 };
            for b in b_start..=rl {
                if a + b == 0 || !on_lattice(a, b) {
                    continue;
                }
                cur.push((a, b));
                rec(rk - a, rl - b, (a, b), max_len, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(rk, rl, (0, 0), max_len, &mut Vec::new(), &mut out);
    out
}

/// Sum over distinct users `f_s != k` of `prod_s g_{f_s}^{a_s} (g_{f_s}^*)^{b_s}`,
/// counting each assignment once when patterns repeat.
fn assignment_sum(row: &[C64], k: usize, patterns: &[Pattern]) -> C64 {
    fn rec(row: &[C64], k: usize, patterns: &[Pattern], used: &mut Vec<bool>) -> C64 {
        let Some((&(a, b), rest)) = patterns.split_first() else {
            return C64::new(1.0, 0.0);
        };
        let mut acc = ZERO;
        for f in 0..row.len() {
            if f == k || used[f] {
                continue;
            }
            used[f] = true;
            acc += row[f].powu(a as u32) * row[f].conj().powu(b as u32) * rec(row, k, rest, used);
            used[f] = false;
        }
        acc
    }
    let mut repeats = 1.0;
    let mut run = 1;
    for w in patterns.windows(2) {
        if w[0] == w[1] {
            run += 1;
            repeats *= run as f64;
        } else {
            run = 1;
        }
    }
    rec(row, k, patterns, &mut vec![false; row.len()]) / repeats
}

/// `E{|u_m|^{2t} u_m ς_k^*}` with `u_m = sum_l g̃_lm υ_l`, for one antenna row of `g̃`.
pub fn distorted_cross_moment(row: &[C64], k: usize, t: usize, mom: &SymbolCrossMoments) -> Result<C64> {
    if t + 1 > mom.max_index() {
        return Err(Error::MomentOrderTooLarge {
            order: 2 * t + 2,
            max: 2 * mom.max_index(),
        });
    }
    let others = row.len() - 1;
    let gk = row[k];
    let mut total = ZERO;
    for k1 in 0..=t + 1 {
        for j1 in 0..=t {
            if !on_lattice(k1, j1 + 1) {
                continue;
            }
            let own = mom.with_symbol(k1, j1);
            if own == ZERO {
                continue;
            }
            let own_gain = gk.powu(k1 as u32) * gk.conj().powu(j1 as u32);
            for set in pattern_multisets(t + 1 - k1, t - j1, others) {
                let coef = multinomial(t + 1, std::iter::once(k1).chain(set.iter().map(|p| p.0)))
                    * multinomial(t, std::iter::once(j1).chain(set.iter().map(|p| p.1)));
                let sym: C64 = set.iter().map(|&(a, b)| mom.plain(a, b)).product();
                if sym == ZERO {
                    continue;
                }
                total += own * sym * own_gain * assignment_sum(row, k, &set) * coef;
            }
        }
    }
    Ok(total)
}

/// General-order effective channel `[C_yς]_mk = sum_t ã_tm E{|u_m|^{2t} u_m ς_k^*}`.
pub fn effective_channel_general(gt: &CMat, bs: &NormalizedBsCoeffs, mom: &SymbolCrossMoments) -> Result<CMat> {
    let (m, k) = gt.shape();
    if bs.antennas() != m {
        return Err(Error::Dimension(format!("{} coefficient rows for {m} antennas", bs.antennas())));
    }
    let mut out = CMat::zeros(m, k);
    for row in 0..m {
        let g: Vec<C64> = gt.row(row).iter().copied().collect();
        let coeffs = bs.antenna(row);
        for col in 0..k {
            let mut acc = ZERO;
            for (t, a) in coeffs.iter().enumerate() {
                if *a != ZERO {
                    acc += a * distorted_cross_moment(&g, col, t, mom)?;
                }
            }
            out[(row, col)] = acc;
        }
    }
    Ok(out)
}
