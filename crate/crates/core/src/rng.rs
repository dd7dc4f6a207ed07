//! Seeded random sampling with a fixed, portable algorithm.
//!
//! Every generator is ChaCha8 keyed by `seed` through `SeedableRng::seed_from_u64`
//! (PCG32-expanded key) with an explicit stream number, so independent draws
//! never share generator state. Uniform doubles take the top 53 bits of a
//! `u64`; normal deviates use the Box-Muller transform on two such uniforms.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for the `stream`-th independent draw under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform double in `[0, 1)`.
pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform double in `[lo, hi)`.
pub fn uniform_in<R: RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Standard normal deviate (Box-Muller, cosine branch).
pub fn normal<R: RngCore>(rng: &mut R) -> f64 {
    // 1 - u keeps the logarithm finite
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Complex number with independent standard-normal real and imaginary parts.
pub fn complex_normal<R: RngCore>(rng: &mut R) -> Complex64 {
    Complex64::new(normal(rng), normal(rng))
}

/// Point uniform on the probability simplex with `k` vertices.
pub fn simplex<R: RngCore>(rng: &mut R, k: usize) -> Vec<f64> {
    // normalized exponentials
    let mut w: Vec<f64> = (0..k).map(|_| -(1.0 - uniform(rng)).ln()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Uniform integer in `lo..=hi`.
pub fn int_in<R: RngCore>(rng: &mut R, lo: usize, hi: usize) -> usize {
    lo + (uniform(rng) * (hi - lo + 1) as f64) as usize
}
