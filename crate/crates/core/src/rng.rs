//! Deterministic random streams.
//!
//! Every stochastic draw in an experiment comes from a ChaCha8 stream keyed by
//! `(master seed, purpose)` for the key and `(setup, realization)` for the
//! stream counter, so results do not depend on scheduling order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::C64;

/// What a stream is used for. Distinct purposes never share key material.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Drop,
    Channel,
    Noise,
    Symbols,
    Dataset,
    Validation,
    Shuffle,
    Init,
    McLmmse,
    Oracle,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Drop => 0x01,
            Purpose::Channel => 0x02,
            Purpose::Noise => 0x03,
            Purpose::Symbols => 0x04,
            Purpose::Dataset => 0x05,
            Purpose::Validation => 0x06,
            Purpose::Shuffle => 0x07,
            Purpose::Init => 0x08,
            Purpose::McLmmse => 0x09,
            Purpose::Oracle => 0x0a,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Independent stream for `(purpose, a, b)`.
    pub fn stream(&self, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
        let key = splitmix64(self.master ^ splitmix64(purpose.tag().wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(splitmix64(a.wrapping_mul(0xD134_2543_DE82_EF95) ^ b.rotate_left(29)) ^ b);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unit-variance circularly symmetric complex Gaussian sample.
#[inline]
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[inline]
pub fn normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
