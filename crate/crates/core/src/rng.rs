//! Counter-based random streams.
//!
//! Every consumer asks for a substream by `(seed, stream)`. The generator is
//! ChaCha12 keyed by the seed, with the stream index selecting an
//! independent 2^64-block counter space, so the draws of path `i` depend on
//! nothing but `(seed, i)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha12Rng;

/// Stream offsets reserved for non-path consumers, well above any path index.
pub const DRIFT_STREAM: u64 = 1 << 62;
pub const TAIL_STREAM: u64 = (1 << 62) + 1;
pub const PROBE_STREAM: u64 = (1 << 62) + 2;

pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform on [0, 1).
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Poisson draw by sequential inversion of the CDF.
pub fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let u = uniform(rng);
    let mut k = 0u32;
    let mut pmf = (-mean).exp();
    let mut cdf = pmf;
    while u >= cdf {
        k += 1;
        pmf *= mean / k as f64;
        let next = cdf + pmf;
        if next == cdf {
            // tail mass below double resolution
            break;
        }
        cdf = next;
    }
    k
}
