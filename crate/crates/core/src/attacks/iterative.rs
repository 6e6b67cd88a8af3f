use std::time::Instant;

use crate::attacks::{
    check_budget, clean_labels, craft_adversarial_bisection, fooling_rate, l2, Classifier, LabeledInput,
    Perturbation, UapSpec,
};
use crate::error::{Error, Result};

/// Settings for the iterative universal perturbation baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeUapConfig {
    pub p_max: f64,
    pub max_epochs: usize,
    /// Stop once this fraction of the crafting samples is fooled.
    pub target_fool_rate: f64,
    /// Bisection accuracy of the inner per-sample attack.
    pub eps_acc: f64,
}

impl IterativeUapConfig {
    pub fn new(p_max: f64) -> Self {
        IterativeUapConfig {
            p_max,
            max_epochs: 5,
            target_fool_rate: 0.8,
            eps_acc: 0.01,
        }
    }
}

fn project(r: &mut [f32], p_max: f64) {
    let norm = l2(r);
    if norm > p_max {
        let s = p_max / norm;
        // Scale in f64 and shave one ulp-scale factor so rounding never lands above p_max.
        r.iter_mut().for_each(|v| *v = (*v as f64 * s * (1.0 - 1e-7)) as f32);
    }
}

/// Iterative baseline: sweep the crafting samples, and for each one the
/// current `r` does not fool, add the minimum-power per-input perturbation of
/// `x + r` to `r` and project back onto the `p_max` ball.
///
/// The inner attack's own budget is `max(p_max, ||x + r||)`, so it can find
/// the flipping distance even when it exceeds `p_max`; the projection then
/// enforces the universal budget.
pub fn craft_uap_iterative_baseline<C: Classifier + ?Sized>(
    model: &C,
    samples: &[LabeledInput<'_>],
    config: &IterativeUapConfig,
) -> Result<(Perturbation, UapSpec)> {
    check_budget(config.p_max)?;
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 crafting samples, got {}",
            samples.len()
        )));
    }
    if !(0.0..=1.0).contains(&config.target_fool_rate) {
        return Err(Error::InvalidArgument(format!(
            "target fooling rate must lie in [0, 1], got {}",
            config.target_fool_rate
        )));
    }
    let start = Instant::now();
    let clean = clean_labels(model, samples)?;
    let mut r = vec![0.0f32; model.input_len()];
    for epoch in 0..config.max_epochs {
        let rate = fooling_rate(model, samples, &clean, &r)?;
        if rate >= config.target_fool_rate {
            log::debug!("iterative uap: target reached before epoch {epoch} (rate {rate:.3})");
            break;
        }
        for (&(x, _), &label) in samples.iter().zip(&clean) {
            let shifted: Vec<f32> = x.iter().zip(&r).map(|(a, b)| a + b).collect();
            if model.predict_one(&shifted)? != label {
                continue;
            }
            let inner_budget = config.p_max.max(l2(&shifted));
            let out = craft_adversarial_bisection(model, &shifted, label, config.eps_acc, inner_budget)?;
            for (a, b) in r.iter_mut().zip(out.perturbation.values()) {
                *a += b;
            }
            project(&mut r, config.p_max);
        }
        log::debug!("iterative uap: epoch {epoch} done, norm {:.4}", l2(&r));
    }
    let spec = UapSpec {
        sample_count: samples.len(),
        p_max: config.p_max,
        crafting_time_seconds: start.elapsed().as_secs_f64(),
        source_model: None,
    };
    Ok((Perturbation::new(r, config.p_max)?, spec))
}
