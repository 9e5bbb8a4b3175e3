//! Bundled test potentials.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::potential::PeriodicMatrixPotential;

fn sym(n: usize, rows: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, rows)
}

fn build(n: usize, mean: &[f64], cos: &[&[f64]], sin: &[&[f64]]) -> PeriodicMatrixPotential {
    PeriodicMatrixPotential::new(
        sym(n, mean),
        cos.iter().map(|c| sym(n, c)).collect(),
        sin.iter().map(|s| sym(n, s)).collect(),
    )
    .expect("bundled potentials are symmetric")
}

/// V⁰ = diag(0, 1) with an off-diagonal first harmonic (a = 0.6) and a diagonal second one.
pub fn coupling() -> PeriodicMatrixPotential {
    build(
        2,
        &[0.0, 0.0, 0.0, 1.0],
        &[&[0.0, 0.3, 0.3, 0.0], &[0.15, 0.0, 0.0, -0.1]],
        &[],
    )
}

/// V⁰ = diag(0, 1) and V̂⁽ⁿ⁾₁₂ = a/2 through the cosine coefficient of harmonic n.
pub fn resonance_probe(a: f64, n: usize) -> PeriodicMatrixPotential {
    let mut cos = vec![DMatrix::zeros(2, 2); n];
    cos[n - 1] = sym(2, &[0.0, a / 2.0, a / 2.0, 0.0]);
    PeriodicMatrixPotential::new(sym(2, &[0.0, 0.0, 0.0, 1.0]), cos, vec![]).expect("symmetric")
}

/// Five potentials with N ∈ {2, 3} and ‖V‖ ≤ 3.
pub fn corpus() -> Vec<(&'static str, PeriodicMatrixPotential)> {
    vec![
        (
            "two-level-cos",
            build(2, &[0.0, 0.0, 0.0, 1.0], &[&[0.3, 0.25, 0.25, -0.2]], &[]),
        ),
        (
            "two-level-mixed",
            build(
                2,
                &[0.5, 0.2, 0.2, -0.3],
                &[&[0.2, 0.0, 0.0, 0.1]],
                &[&[0.0, 0.0, 0.0, 0.0], &[0.0, 0.3, 0.3, 0.0]],
            ),
        ),
        (
            "two-scalar-blocks",
            build(2, &[0.0, 0.0, 0.0, 1.0], &[&[0.4, 0.0, 0.0, 0.0]], &[&[0.0, 0.0, 0.0, 0.3]]),
        ),
        (
            "three-level",
            build(
                3,
                &[0.0, 0.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.0, 1.5],
                &[&[0.2, 0.15, 0.0, 0.15, 0.0, 0.1, 0.0, 0.1, -0.2]],
                &[&[0.0, 0.0, 0.2, 0.0, 0.1, 0.0, 0.2, 0.0, 0.0]],
            ),
        ),
        (
            "three-level-dense",
            build(
                3,
                &[0.4, 0.3, -0.2, 0.3, -0.5, 0.1, -0.2, 0.1, 0.8],
                &[&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &[0.25, -0.1, 0.0, -0.1, 0.1, 0.2, 0.0, 0.2, -0.15]],
                &[&[0.1, 0.0, 0.15, 0.0, -0.2, 0.0, 0.15, 0.0, 0.1]],
            ),
        ),
    ]
}

/// Reproducible random potential: N ∈ {2, 3}, one or two harmonics, scaled
/// to ‖V‖ ≤ 2.
pub fn random_potential(seed: u64) -> PeriodicMatrixPotential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=3);
    let mut random_sym = |amp: f64| {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.gen_range(-amp..=amp);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    };
    let mean = random_sym(1.0);
    let harmonics = 2;
    let cos: Vec<_> = (0..harmonics).map(|_| random_sym(0.3)).collect();
    let sin: Vec<_> = (0..harmonics).map(|_| random_sym(0.3)).collect();
    let p = PeriodicMatrixPotential::new(mean, cos, sin).expect("symmetric by construction");
    let norm = p.hs_norm();
    if norm > 2.0 {
        p.scaled(2.0 / norm)
    } else {
        p
    }
}
