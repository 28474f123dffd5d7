//! Seeded sampling helpers shared by the certificates.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly distributed unit vector in `ℝⁿ`.
pub fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Uniformly distributed point of the closed ball of the given radius.
pub fn in_ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> DVector<f64> {
    let u: f64 = rng.random();
    unit_vector(rng, n) * (radius * u.powf(1.0 / n as f64))
}
