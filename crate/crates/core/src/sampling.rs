//! Deterministic sampling utilities: seed derivation, Latin hypercube
//! designs, digit-scrambled Halton sequences, and quasi-Monte Carlo normal
//! draw matrices.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::normal::std_normal_inv_cdf;

/// Bases for the Halton sequence, one prime per dimension.
const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derive a fresh seed from a base seed and a sequence of stream labels.
/// Distinct label sequences give statistically independent streams, and the
/// result depends on label order.
pub fn seed_mix(parts: &[u64]) -> u64 {
    let mut state = 0x853C49E6748FEA9B;
    for &p in parts {
        state = splitmix64(state ^ p);
    }
    state
}

/// Seeded Latin hypercube design on the unit cube: `n` points, each dimension
/// stratified into `n` equal slabs with one point placed uniformly in each.
pub fn latin_hypercube(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; dim]; n];
    for j in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (i, point) in points.iter_mut().enumerate() {
            point[j] = (strata[i] as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    points
}

/// Seeded digit-scrambled Halton sequence on the unit cube. Each dimension
/// uses the next prime base with a random digit permutation that fixes zero,
/// plus a random Cranley-Patterson rotation.
pub fn scrambled_halton(n: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if dim > PRIMES.len() {
        return Err(Error::InvalidConfig(format!(
            "scrambled Halton supports up to {} dimensions, requested {dim}",
            PRIMES.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perms: Vec<Vec<u64>> = Vec::with_capacity(dim);
    let mut shifts: Vec<f64> = Vec::with_capacity(dim);
    for &base in PRIMES.iter().take(dim) {
        let mut perm: Vec<u64> = (0..base).collect();
        // Keep zero fixed so trailing zero digits stay silent.
        perm[1..].shuffle(&mut rng);
        perms.push(perm);
        shifts.push(rng.gen::<f64>());
    }
    let points = (0..n)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let u = radical_inverse(i as u64 + 1, PRIMES[j], &perms[j]) + shifts[j];
                    u.fract()
                })
                .collect()
        })
        .collect();
    Ok(points)
}

fn radical_inverse(mut i: u64, base: u64, perm: &[u64]) -> f64 {
    let mut scale = 1.0;
    let mut out = 0.0;
    let b = base as f64;
    while i > 0 {
        scale /= b;
        out += scale * perm[(i % base) as usize] as f64;
        i /= base;
    }
    out
}

/// Sampling scheme for the quasi-Monte Carlo normal matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QmcScheme {
    /// Digit-scrambled Halton points mapped through the normal quantile.
    LowDiscrepancy,
    /// Latin hypercube points mapped through the normal quantile.
    Stratified,
}

impl Default for QmcScheme {
    fn default() -> Self {
        QmcScheme::LowDiscrepancy
    }
}

impl std::fmt::Display for QmcScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QmcScheme::LowDiscrepancy => write!(f, "low-discrepancy"),
            QmcScheme::Stratified => write!(f, "stratified"),
        }
    }
}

/// `n` rows of `dim` approximately standard normal draws, produced by mapping
/// a deterministic space-filling design through the normal quantile. Row `i`
/// is reproducible given `(scheme, seed)`, which is what lets rollout scoring
/// share draws across candidates.
pub fn qmc_normal_matrix(
    n: usize,
    dim: usize,
    scheme: QmcScheme,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let uniforms = match scheme {
        QmcScheme::LowDiscrepancy => scrambled_halton(n, dim, seed)?,
        QmcScheme::Stratified => latin_hypercube(n, dim, seed),
    };
    Ok(uniforms
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|u| std_normal_inv_cdf(u.clamp(1e-12, 1.0 - 1e-12)))
                .collect()
        })
        .collect())
}
