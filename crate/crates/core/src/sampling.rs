//! Seeded random states for the property and oracle suites.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mixture::{DensityField, MixtureParams};
use crate::spectral::SpectralGrid;

/// Deterministic generator for case `index` of stream `stream` under `seed`.
pub fn case_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    rng.set_stream(stream);
    rng
}

/// Log-uniform positive densities in `[lo, hi]`.
pub fn positive_point(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|_| rng.gen_range(a..b).exp()).collect()
}

/// Exponents in `[1.2, 3)` and masses in `[0.5, 2)`.
pub fn mixed_params(rng: &mut impl Rng, n: usize) -> MixtureParams {
    let gamma = (0..n).map(|_| rng.gen_range(1.2..3.0)).collect();
    let mass = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    MixtureParams::new(gamma, mass)
}

/// A smooth periodic field with mean `mean` and a few low modes of total amplitude
/// at most `spread * mean`.
pub fn smooth_field(rng: &mut impl Rng, grid: &SpectralGrid, mean: f64, spread: f64, modes: u32) -> Vec<f64> {
    let terms: Vec<(f64, f64, f64)> = (1..=modes)
        .map(|k| {
            let amp = rng.gen_range(0.0..1.0) / k as f64;
            (amp, k as f64, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let total: f64 = terms.iter().map(|t| t.0).sum::<f64>().max(f64::MIN_POSITIVE);
    let scale = spread * mean / total;
    grid.sample(|x| mean + terms.iter().map(|(a, k, p)| scale * a * (2.0 * PI * k * x + p).sin()).sum::<f64>())
}

/// Strictly positive smooth state with component means in `[0.5, 2)`.
pub fn smooth_state(rng: &mut impl Rng, grid: &SpectralGrid, n: usize) -> DensityField {
    let comps = (0..n)
        .map(|_| {
            let mean = rng.gen_range(0.5..2.0);
            let spread = rng.gen_range(0.05..0.4);
            smooth_field(rng, grid, mean, spread, 4)
        })
        .collect();
    DensityField::from_components(comps, 0.0).expect("components share the grid")
}
