//! Seeded random vectors.
//!
//! All randomness goes through [`Pcg32`] (PCG-XSH-RR, 64-bit LCG state,
//! 32-bit output), which is platform independent for a fixed seed.

use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
pub use rand_pcg::Pcg32;

use crate::tridiag::C64;

pub fn seeded(seed: u64) -> Pcg32 {
    Pcg32::seed_from_u64(seed)
}

/// Vector of independent standard complex Gaussians.
pub fn complex_gaussian(rng: &mut Pcg32, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        })
        .collect()
}

/// Sum of a few Gaussian bumps with random complex amplitudes, centred well
/// inside `[lo, hi]` so that the result is negligible at both ends.
pub fn smooth_bumps(rng: &mut Pcg32, nodes: &[f64]) -> Vec<C64> {
    let lo = nodes[0];
    let hi = nodes[nodes.len() - 1];
    let len = hi - lo;
    let count = rng.random_range(1..=4);
    let mut g = vec![C64::new(0.0, 0.0); nodes.len()];
    for _ in 0..count {
        let width = len * rng.random_range(0.02..0.06);
        let centre = lo + len * rng.random_range(0.35..0.65);
        let amp = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for (gi, &y) in g.iter_mut().zip(nodes) {
            let s = (y - centre) / width;
            *gi += amp * (-0.5 * s * s).exp();
        }
    }
    g
}

pub fn uniform(rng: &mut Pcg32, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
