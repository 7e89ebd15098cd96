//! Pilot-based estimation of physical channels, effective channels and
//! distortion variances.

mod da;
mod dua;
mod lemma3;
mod numerical;
mod pilots;
mod variance;

pub use da::{build_da_moments, da_lmmse, AntennaMoments, DaLmmseMoments};
pub use dua::{dua_effective, dua_lmmse, received_pilots, PilotPhase};
pub use lemma3::{hm, lemma3_e1, lemma3_e2, lemma3_e3};
pub use numerical::{build_da_moments_numerical, gauss_hermite, Integration};
pub use pilots::PilotBook;
pub use variance::{mc_lmmse_variance, AffineVarianceEstimator, VarianceDomain};
