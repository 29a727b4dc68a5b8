//! Deterministic random streams.
//!
//! Every randomized routine in this crate draws from ChaCha12 keyed by a
//! `u64` seed, so results are byte-identical across runs and platforms.
//! Independent substreams (per column, per trial, per generator stage) come
//! from one documented splitting rule: [`derive_seed`] reads `(seed, index)`
//! as position `index` in a SplitMix64 stream keyed by `seed`, and the
//! derived value seeds a fresh generator. Gaussians use the Box-Muller transform on top of the uniform
//! stream, with `libm` supplying log/cos/sin so the bit pattern does not
//! depend on the platform's math library.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer: the standard 64-bit avalanche permutation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of substream `index` of the stream keyed by `seed`.
///
/// This is output number `index` of a SplitMix64 generator whose state is
/// initialized to `splitmix64(seed)`: the state advances by the odd Weyl
/// constant, so the map is injective in `index` for fixed seed and not
/// symmetric under swapping the arguments. Nesting is fine; trial t's
/// column j lives at `derive_seed(derive_seed(seed, t), j)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Fresh deterministic generator for `seed`.
pub fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Uniform draw from [0, 1) with 53 random bits.
pub fn uniform(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw from {0, 1, …, bound − 1} by masked rejection, exact for
/// every bound (no modulo bias).
pub fn uniform_below(rng: &mut ChaCha12Rng, bound: usize) -> usize {
    assert!(bound > 0, "uniform_below needs a positive bound");
    let mask = (bound as u64).next_power_of_two() - 1;
    loop {
        let x = rng.next_u64() & mask;
        if x < bound as u64 {
            return x as usize;
        }
    }
}

/// One pair of independent standard normals via Box-Muller.
///
/// u₁ is shifted into (0, 1] so the logarithm is finite.
pub fn normal_pair(rng: &mut ChaCha12Rng) -> (f64, f64) {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = uniform(rng);
    let r = libm::sqrt(-2.0 * libm::log(u1));
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * libm::cos(theta), r * libm::sin(theta))
}

/// Fill `out` with standard normals, consuming Box-Muller pairs in order.
/// For odd lengths the final pair's second value is discarded, so the stream
/// position depends only on `out.len()`.
pub fn fill_normal(rng: &mut ChaCha12Rng, out: &mut [f64]) {
    let mut i = 0;
    while i + 1 < out.len() {
        let (a, b) = normal_pair(rng);
        out[i] = a;
        out[i + 1] = b;
        i += 2;
    }
    if i < out.len() {
        out[i] = normal_pair(rng).0;
    }
}

// ======================================================================
// tests
// ======================================================================
