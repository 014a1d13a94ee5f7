//! Seeded random streams.
//!
//! One master seed fans out into independent ChaCha8 streams, one per
//! consumer, so that changing how one consumer draws never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::ln;

/// Consumers of randomness within a sampling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    /// Token values drawn from predicted marginals.
    Values = 0,
    /// Gumbel noise for confidence-based selection.
    Selection = 1,
    /// Permutation used by the random scheduler.
    Permutation = 2,
}

/// Independent generator for `sub` derived from `seed`.
pub fn substream(seed: u64, sub: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sub as u64);
    rng
}

/// Uniform draw in the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard Gumbel variate, `-ln(-ln u)`.
pub fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -ln(-ln(open_unit(rng)))
}
