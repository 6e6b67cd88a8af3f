use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::attacks::{check_budget, clean_labels, fooling_rate, l2, Classifier, LabeledInput, Perturbation, UapSpec};
use crate::error::{Error, Result};
use crate::nn::LabelDist;

/// Power iteration settings for the top right-singular direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    /// Stop once successive iterates differ by less than this in L2.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seed of the Gaussian starting vector.
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            tolerance: 1e-8,
            max_iterations: 1000,
            seed: 0,
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

impl PowerIteration {
    /// Unit eigenvector of `XᵀX` for its largest eigenvalue, where `x` holds
    /// `rows` rows of length `cols` back to back.
    ///
    /// Iterates on whichever Gram matrix (`XXᵀ` or `XᵀX`) is smaller and maps
    /// the result back onto the row space.
    pub fn run(&self, x: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
        if rows == 0 || cols == 0 || x.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix of {} values does not have shape {rows}x{cols}",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument("principal direction of a zero matrix".into()));
        }
        let row_space = rows < cols;
        let d = if row_space { rows } else { cols };
        let mut gram = vec![0.0f64; d * d];
        if row_space {
            // gram = X Xᵀ
            for i in 0..rows {
                for j in i..rows {
                    let s: f64 = x[i * cols..(i + 1) * cols]
                        .iter()
                        .zip(&x[j * cols..(j + 1) * cols])
                        .map(|(a, b)| a * b)
                        .sum();
                    gram[i * d + j] = s;
                    gram[j * d + i] = s;
                }
            }
        } else {
            // gram = Xᵀ X
            for r in 0..rows {
                let row = &x[r * cols..(r + 1) * cols];
                for i in 0..cols {
                    for j in 0..cols {
                        gram[i * d + j] += row[i] * row[j];
                    }
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        normalize(&mut v);
        let mut next = vec![0.0f64; d];
        let mut converged = false;
        let mut delta = f64::INFINITY;
        for _ in 0..self.max_iterations {
            for i in 0..d {
                next[i] = gram[i * d..(i + 1) * d].iter().zip(&v).map(|(a, b)| a * b).sum();
            }
            if normalize(&mut next) == 0.0 {
                // Start landed in the null space; restart from a fresh draw.
                next.iter_mut().for_each(|e| *e = StandardNormal.sample(&mut rng));
                normalize(&mut next);
            }
            delta = v.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            std::mem::swap(&mut v, &mut next);
            if delta < self.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                iterations: self.max_iterations,
                residual: delta,
            });
        }
        if !row_space {
            return Ok(v);
        }
        let mut out = vec![0.0f64; cols];
        for (r, &u) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(&x[r * cols..(r + 1) * cols]) {
                *o += u * a;
            }
        }
        normalize(&mut out);
        Ok(out)
    }
}

/// First principal direction of the rows of `x` with the default settings.
pub fn first_principal_direction(x: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    PowerIteration::default().run(x, rows, cols)
}

/// PCA universal perturbation: stack the normalized true-label loss gradients
/// of the crafting samples, take their first principal direction `v` and
/// return whichever of `±p_max·v` fools more of the samples (`+` on ties).
pub fn craft_uap_pca<C: Classifier + ?Sized>(
    model: &C,
    samples: &[LabeledInput<'_>],
    p_max: f64,
) -> Result<(Perturbation, UapSpec)> {
    check_budget(p_max)?;
    let start = Instant::now();
    let classes = model.num_classes();
    let p = model.input_len();
    let mut rows = Vec::with_capacity(samples.len() * p);
    let mut kept = Vec::with_capacity(samples.len());
    for (i, &(x, y)) in samples.iter().enumerate() {
        let g = model.loss_gradients(x, &[LabelDist::one_hot(y, classes)?])?.remove(0);
        let norm = l2(&g);
        if norm > 0.0 && norm.is_finite() {
            rows.extend(g.iter().map(|&v| v as f64 / norm));
            kept.push((x, y));
        } else {
            log::warn!("crafting sample {i} has a degenerate gradient (norm {norm}); dropped");
        }
    }
    if kept.len() < 2 {
        return Err(Error::DegenerateGradient(format!(
            "{} of {} crafting samples have a usable gradient, need at least 2",
            kept.len(),
            samples.len()
        )));
    }
    let v = first_principal_direction(&rows, kept.len(), p)?;

    let plus = Perturbation::scaled(&v, p_max);
    let minus = Perturbation::scaled(&v, -p_max);
    let clean = clean_labels(model, samples)?;
    let fr_plus = fooling_rate(model, samples, &clean, plus.values())?;
    let fr_minus = fooling_rate(model, samples, &clean, minus.values())?;
    let r = if fr_minus > fr_plus { minus } else { plus };
    let spec = UapSpec {
        sample_count: samples.len(),
        p_max,
        crafting_time_seconds: start.elapsed().as_secs_f64(),
        source_model: None,
    };
    Ok((r, spec))
}
