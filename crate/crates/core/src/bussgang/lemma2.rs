use crate::constellation::DistortedMoments;
use crate::linalg::{c, diag_part, trace, CMat};

/// `E{υ υ^H A υ υ^H}` for i.i.d. lattice-symmetric entries.
pub fn lemma2_quartic(a: &CMat, chi: &DistortedMoments) -> CMat {
    let (x2, x4) = (chi.chi(2), chi.chi(4));
    let id = CMat::identity(a.nrows(), a.ncols());
    a * c(x2 * x2, 0.0) + id * (trace(a) * x2 * x2) + diag_part(a) * c(x4 - 2.0 * x2 * x2, 0.0)
}

/// `E{υ υ^H A υ υ^H B υ υ^H}` for i.i.d. lattice-symmetric entries.
pub fn lemma2_sextic(a: &CMat, b: &CMat, chi: &DistortedMoments) -> CMat {
    let (x2, x4, x6) = (chi.chi(2), chi.chi(4), chi.chi(6));
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let (ta, tb) = (trace(a), trace(b));
    let (da, db) = (diag_part(a), diag_part(b));
    let ab = a * b;
    let ba = b * a;
    let first = &ab + &ba + b * ta + a * tb + &id * (ta * tb) + &id * trace(&ab);
    let second = &da * b
        + &db * a
        + a * &db
        + b * &da
        + diag_part(&(&ab + &ba))
        + &db * ta
        + &da * tb
        + &id * trace(&(&da * &db));
    first * c(x2.powi(3), 0.0) + second * c(x4 * x2 - 2.0 * x2.powi(3), 0.0) + (&da * &db) * c(x6 - 9.0 * x4 * x2 + 12.0 * x2.powi(3), 0.0)
}
