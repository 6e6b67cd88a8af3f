use rand::Rng;
use rand_distr::StandardNormal;

use crate::attacks::{check_budget, Perturbation};
use crate::error::Result;

/// One Gaussian draw with unit variance per entry, centered at `mean`.
pub fn jamming_draw<R: Rng + ?Sized>(mean: &[f32], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .map(|&m| m as f64 + rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Jamming baseline: a Gaussian draw around the data mean rescaled to norm `p_max`.
pub fn jamming_noise<R: Rng + ?Sized>(mean: &[f32], p_max: f64, rng: &mut R) -> Result<Perturbation> {
    check_budget(p_max)?;
    let z = jamming_draw(mean, rng);
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Perturbation::scaled(&z, p_max / norm))
}
