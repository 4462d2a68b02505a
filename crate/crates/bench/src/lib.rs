//! Shared fixtures for the benchmark targets.

use bures_core::gaussian::{compose_covariance, DecomposedCov, Gaussian3};
use bures_core::SpdMat3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_decomposed(rng: &mut ChaCha8Rng) -> DecomposedCov {
    let q = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    let s = [
        rng.gen_range(0.2..2.0),
        rng.gen_range(0.2..2.0),
        rng.gen_range(0.2..2.0),
    ];
    DecomposedCov::new(q, s).expect("valid")
}

pub fn random_spd(rng: &mut ChaCha8Rng) -> SpdMat3 {
    compose_covariance(&random_decomposed(rng))
}

pub fn random_gaussian(rng: &mut ChaCha8Rng) -> Gaussian3 {
    let mean = [
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
    ];
    Gaussian3::new(mean, random_spd(rng)).expect("valid")
}
