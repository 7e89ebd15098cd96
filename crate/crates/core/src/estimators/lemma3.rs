//! Moments of quadratic forms in `h = h̄ + h̃` with `h̃ ~ CN(0, I)`.

use crate::linalg::{dot_h, C64};

/// `H_m(x, y) = x^H h̄ h̄^H y`.
#[inline]
pub fn hm(x: &[C64], y: &[C64], hbar: &[C64]) -> C64 {
    dot_h(x, hbar) * dot_h(hbar, y)
}

/// `E{a^H h h^H b}`.
pub fn lemma3_e1(a: &[C64], b: &[C64], hbar: &[C64]) -> C64 {
    hm(a, b, hbar) + dot_h(a, b)
}

/// `E{a1^H h h^H b1 a2^H h h^H b2}`.
pub fn lemma3_e2(a1: &[C64], b1: &[C64], a2: &[C64], b2: &[C64], hbar: &[C64]) -> C64 {
    let a = [a1, a2];
    let b = [b1, b2];
    let mut acc = hm(a1, b1, hbar) * hm(a2, b2, hbar);
    for i1 in 0..2 {
        for i2 in 0..2 {
            let (j1, j2) = (1 - i1, 1 - i2);
            acc += (hm(a[i1], b[i2], hbar) + dot_h(a[i1], b[i2]) * 0.5) * dot_h(a[j1], b[j2]);
        }
    }
    acc
}

const PERMS3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// `E{prod_{i=1..3} a_i^H h h^H b_i}`.
pub fn lemma3_e3(a1: &[C64], b1: &[C64], a2: &[C64], b2: &[C64], a3: &[C64], b3: &[C64], hbar: &[C64]) -> C64 {
    let a = [a1, a2, a3];
    let b = [b1, b2, b3];
    let mut h = [[C64::new(0.0, 0.0); 3]; 3];
    let mut d = [[C64::new(0.0, 0.0); 3]; 3];
    let ah: Vec<C64> = a.iter().map(|x| dot_h(x, hbar)).collect();
    let hb: Vec<C64> = b.iter().map(|y| dot_h(hbar, y)).collect();
    for i in 0..3 {
        for j in 0..3 {
            h[i][j] = ah[i] * hb[j];
            d[i][j] = dot_h(a[i], b[j]);
        }
    }
    let mut acc = h[0][0] * h[1][1] * h[2][2];
    for s in PERMS3 {
        for p in PERMS3 {
            let (i, j, k) = (s[0], s[1], s[2]);
            let (u, v, w) = (p[0], p[1], p[2]);
            acc += h[i][u] * h[j][v] * d[k][w] / 4.0 + h[i][u] * d[j][v] * d[k][w] / 2.0 + d[i][u] * d[j][v] * d[k][w] / 6.0;
        }
    }
    acc
}
