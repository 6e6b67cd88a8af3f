//! Brute-force minimum-norm perturbations for toy classifiers (input
//! dimension at most 3). Used to check the bisection attack, never by it.

use std::f64::consts::PI;

use crate::attacks::Classifier;
use crate::error::{Error, Result};

fn directions(dim: usize, grid_step: f64, p_max: f64) -> Result<Vec<Vec<f64>>> {
    // Angular spacing chosen so neighbouring rays are at most `grid_step` apart at radius p_max.
    let arcs = ((2.0 * PI * p_max / grid_step).ceil() as usize).max(8);
    match dim {
        1 => Ok(vec![vec![1.0], vec![-1.0]]),
        2 => Ok((0..arcs)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / arcs as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()),
        3 => {
            // Fibonacci sphere with roughly the planar density squared.
            let n = (arcs * arcs / 4).max(64);
            let golden = PI * (3.0 - 5f64.sqrt());
            Ok((0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect())
        }
        d => Err(Error::InvalidArgument(format!(
            "oracle search is limited to inputs of dimension <= 3, got {d}"
        ))),
    }
}

fn first_flip<C: Classifier + ?Sized>(
    model: &C,
    x: &[f32],
    l_true: usize,
    dir: &[f64],
    grid_step: f64,
    limit: f64,
) -> Result<Option<f64>> {
    let steps = (limit / grid_step).floor() as usize;
    let mut batch = Vec::with_capacity(steps * x.len());
    for k in 1..=steps {
        let eps = k as f64 * grid_step;
        batch.extend(x.iter().zip(dir).map(|(&a, &d)| (a as f64 + eps * d) as f32));
    }
    let pred = model.predict(&batch, steps)?;
    Ok(pred
        .iter()
        .position(|&p| p != l_true)
        .map(|k| (k + 1) as f64 * grid_step))
}

/// Smallest grid magnitude along `dir` (normalized here) that changes the label
/// away from `l_true`; `p_max` when nothing within the budget does.
pub fn oracle_min_along_direction<C: Classifier + ?Sized>(
    model: &C,
    x: &[f32],
    l_true: usize,
    dir: &[f64],
    grid_step: f64,
    p_max: f64,
) -> Result<f64> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidArgument("grid_step must be positive".into()));
    }
    if model.predict_one(x)? != l_true {
        return Ok(0.0);
    }
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("zero search direction".into()));
    }
    let unit: Vec<f64> = dir.iter().map(|d| d / norm).collect();
    Ok(first_flip(model, x, l_true, &unit, grid_step, p_max)?.unwrap_or(p_max))
}

/// Approximates `min ||r|| s.t. label(x + r) != label(x)` over a dense grid of
/// directions and magnitudes. Returns `p_max` when no grid point flips the label.
pub fn oracle_min_perturbation<C: Classifier + ?Sized>(
    model: &C,
    x: &[f32],
    l_true: usize,
    grid_step: f64,
    p_max: f64,
) -> Result<f64> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidArgument("grid_step must be positive".into()));
    }
    if model.predict_one(x)? != l_true {
        return Ok(0.0);
    }
    let mut best = p_max;
    for dir in directions(x.len(), grid_step, p_max)? {
        if let Some(eps) = first_flip(model, x, l_true, &dir, grid_step, best)? {
            best = best.min(eps);
        }
    }
    Ok(best)
}
