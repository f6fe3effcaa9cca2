//! Seeded random streams.
//!
//! Every random artifact (ensemble, noise, initial point) draws from its own
//! ChaCha stream so that draws for one object never alias another.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::scalar::{Cplx, Real};

/// Stream identifiers; the same seed on different streams yields independent draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Ensemble = 1,
    Noise = 2,
    Init = 3,
    Signal = 4,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// SplitMix64 finalizer, used to derive child seeds from labelled parents.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a seed from a parent seed and a sequence of labels.
pub fn derive_seed(parent: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix64(parent), |acc, &l| mix64(acc ^ mix64(l)))
}

/// FNV-1a hash of a string label, for use with [`derive_seed`].
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn normal<T: Real, R: Rng>(rng: &mut R) -> T {
    let v: f64 = rng.sample(StandardNormal);
    T::lit(v)
}

/// Circularly-symmetric complex normal with total variance `var`.
pub fn complex_normal<T: Real, R: Rng>(rng: &mut R, var: f64) -> Cplx<T> {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cplx::new(T::lit(re * s), T::lit(im * s))
}
