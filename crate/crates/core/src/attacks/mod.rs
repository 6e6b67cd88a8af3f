//! Perturbation crafting: FGM, the per-input bisection attack, PCA-based
//! universal perturbations, an iterative universal baseline, jamming noise
//! and circular time shifts.

mod bisection;
mod fgm;
mod iterative;
mod jamming;
pub mod oracle;
mod pca;
mod shift;

use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::nn::{LabelDist, Model};

pub use bisection::craft_adversarial_bisection;
pub use fgm::{fgm, FgmMode};
pub use iterative::{craft_uap_iterative_baseline, IterativeUapConfig};
pub use jamming::{jamming_draw, jamming_noise};
pub use oracle::{oracle_min_along_direction, oracle_min_perturbation};
pub use pca::{craft_uap_pca, first_principal_direction, PowerIteration};
pub use shift::circular_shift;

/// What the attacks need from a classifier: batched labels and input gradients.
pub trait Classifier {
    fn input_len(&self) -> usize;

    fn num_classes(&self) -> usize;

    /// Labels for `batch` inputs stored back to back.
    fn predict(&self, xs: &[f32], batch: usize) -> Result<Vec<usize>>;

    /// `grad_x L(x, t)` for each target distribution `t`, in order.
    fn loss_gradients(&self, x: &[f32], targets: &[LabelDist]) -> Result<Vec<Vec<f32>>>;

    fn predict_one(&self, x: &[f32]) -> Result<usize> {
        Ok(self.predict(x, 1)?[0])
    }
}

impl Classifier for Model {
    fn input_len(&self) -> usize {
        Model::input_len(self)
    }

    fn num_classes(&self) -> usize {
        Model::num_classes(self)
    }

    fn predict(&self, xs: &[f32], batch: usize) -> Result<Vec<usize>> {
        self.predict_batch(xs, batch)
    }

    fn loss_gradients(&self, x: &[f32], targets: &[LabelDist]) -> Result<Vec<Vec<f32>>> {
        Ok(self
            .input_gradients(x, targets)?
            .into_iter()
            .map(|(g, _)| g)
            .collect())
    }
}

/// Slack allowed on `||values|| <= budget` for f32 rounding.
fn norm_slack(budget: f64) -> f64 {
    1e-6 * budget.max(1.0)
}

pub(crate) fn l2(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// An additive input perturbation with its L2 budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    values: Vec<f32>,
    budget: f64,
}

impl Perturbation {
    pub fn new(values: Vec<f32>, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) || !budget.is_finite() {
            return Err(Error::InvalidArgument(format!("perturbation budget must be finite and nonnegative, got {budget}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("perturbation has non-finite entries".into()));
        }
        let norm = l2(&values);
        if norm > budget + norm_slack(budget) {
            return Err(Error::InvalidArgument(format!(
                "perturbation norm {norm} exceeds budget {budget}"
            )));
        }
        Ok(Perturbation { values, budget })
    }

    pub fn zeros(len: usize, budget: f64) -> Self {
        Perturbation {
            values: vec![0.0; len],
            budget,
        }
    }

    /// `scale * direction`, with `budget = |scale| * ||direction||`.
    pub(crate) fn scaled(direction: &[f64], scale: f64) -> Self {
        let values: Vec<f32> = direction.iter().map(|d| (d * scale) as f32).collect();
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt() * scale.abs();
        let budget = norm.max(l2(&values));
        Perturbation { values, budget }
    }

    /// Trusted constructor for values already known to satisfy the budget.
    pub(crate) fn from_parts(values: Vec<f32>, budget: f64) -> Self {
        Perturbation { values, budget }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn norm(&self) -> f64 {
        l2(&self.values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `x + r`, elementwise.
    pub fn apply(&self, x: &[f32]) -> Vec<f32> {
        x.iter().zip(&self.values).map(|(a, b)| a + b).collect()
    }
}

/// Result of the per-input bisection attack.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub perturbation: Perturbation,
    /// Norm of the returned perturbation.
    pub epsilon_star: f64,
    pub target_class: Option<usize>,
    pub fooled: bool,
    /// Model evaluations spent (label queries plus gradient evaluations).
    pub queries: usize,
    /// Final `eps_max - eps_min` of the winning class' bisection, if any ran.
    pub bracket_width: Option<f64>,
}

/// Bookkeeping for a crafted universal perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct UapSpec {
    pub sample_count: usize,
    pub p_max: f64,
    pub crafting_time_seconds: f64,
    pub source_model: Option<ModelKind>,
}

/// Borrowed `(input, label)` pairs used for crafting.
pub type LabeledInput<'a> = (&'a [f32], usize);

pub(crate) fn check_budget(p_max: f64) -> Result<()> {
    if p_max > 0.0 && p_max.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p_max must be positive and finite, got {p_max}")))
    }
}

/// Fraction of `samples` whose label under `r` differs from `clean`.
pub(crate) fn fooling_rate<C: Classifier + ?Sized>(
    model: &C,
    samples: &[LabeledInput<'_>],
    clean: &[usize],
    r: &[f32],
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut batch = Vec::with_capacity(samples.len() * r.len());
    for (x, _) in samples {
        batch.extend(x.iter().zip(r).map(|(a, b)| a + b));
    }
    let pred = model.predict(&batch, samples.len())?;
    let fooled = pred.iter().zip(clean).filter(|(p, c)| p != c).count();
    Ok(fooled as f64 / samples.len() as f64)
}

pub(crate) fn clean_labels<C: Classifier + ?Sized>(model: &C, samples: &[LabeledInput<'_>]) -> Result<Vec<usize>> {
    let batch: Vec<f32> = samples.iter().flat_map(|(x, _)| x.iter().copied()).collect();
    model.predict(&batch, samples.len())
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbation_budget_enforced() {
        assert!(Perturbation::new(vec![3.0, 4.0], 5.0).is_ok());
        assert!(Perturbation::new(vec![3.0, 4.0], 4.9).is_err());
        assert!(Perturbation::new(vec![f32::NAN], 1.0).is_err());
    }

    #[test]
    fn scaled_norm_matches_budget() {
        let p = Perturbation::scaled(&[0.6, 0.8], -2.5);
        assert!((p.norm() - 2.5).abs() < 1e-6);
        assert!((p.budget() - 2.5).abs() < 1e-6);
        assert_eq!(p.values(), &[-1.5, -2.0]);
    }
}
