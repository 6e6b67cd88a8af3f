use crate::attacks::{check_budget, l2, AttackOutcome, Classifier, Perturbation};
use crate::error::{Error, Result};
use crate::nn::LabelDist;

/// `x - eps * dir`, rounded exactly as the returned perturbation is.
fn step<'a>(x: &'a [f32], dir: &'a [f64], eps: f64) -> impl Iterator<Item = f32> + 'a {
    x.iter().zip(dir).map(move |(&a, &d)| a + (-(eps * d)) as f32)
}

/// Minimum-power white-box attack.
///
/// For every class `c` the normalized loss gradient toward `e_c` gives a
/// descent direction. Classes whose direction cannot flip the label within
/// `p_max` are dropped; for the rest the flipping distance is bisected
/// down to `eps_acc`. The class with the smallest distance wins.
pub fn craft_adversarial_bisection<C: Classifier + ?Sized>(
    model: &C,
    x: &[f32],
    l_true: usize,
    eps_acc: f64,
    p_max: f64,
) -> Result<AttackOutcome> {
    check_budget(p_max)?;
    if !(eps_acc > 0.0) {
        return Err(Error::InvalidArgument(format!("eps_acc must be positive, got {eps_acc}")));
    }
    let classes = model.num_classes();
    if l_true >= classes {
        return Err(Error::InvalidArgument(format!("true label {l_true} out of range")));
    }
    let n = model.input_len();

    let mut queries = 1;
    if model.predict_one(x)? != l_true {
        return Ok(AttackOutcome {
            perturbation: Perturbation::zeros(n, p_max),
            epsilon_star: 0.0,
            target_class: None,
            fooled: true,
            queries,
            bracket_width: None,
        });
    }

    let targets: Vec<LabelDist> = (0..classes)
        .map(|c| LabelDist::one_hot(c, classes))
        .collect::<Result<_>>()?;
    let grads = model.loss_gradients(x, &targets)?;
    queries += classes;

    let mut dirs: Vec<(usize, Vec<f64>)> = Vec::new();
    for (c, g) in grads.iter().enumerate() {
        let norm = l2(g);
        if norm > 0.0 && norm.is_finite() {
            dirs.push((c, g.iter().map(|&v| v as f64 / norm).collect()));
        } else {
            log::debug!("class {c}: degenerate gradient (norm {norm}), skipped");
        }
    }
    if dirs.is_empty() {
        return Err(Error::DegenerateGradient("every class has a zero input gradient".into()));
    }

    let probe = |eps: &[f64], active: &[usize]| -> Result<Vec<bool>> {
        let mut batch = Vec::with_capacity(active.len() * n);
        for (&a, &e) in active.iter().zip(eps) {
            batch.extend(step(x, &dirs[a].1, e));
        }
        let pred = model.predict(&batch, active.len())?;
        Ok(pred.into_iter().map(|p| p != l_true).collect())
    };

    let everyone: Vec<usize> = (0..dirs.len()).collect();
    let at_max = probe(&vec![p_max; dirs.len()], &everyone)?;
    queries += dirs.len();
    let feasible: Vec<usize> = everyone.iter().copied().filter(|&a| at_max[a]).collect();

    if feasible.is_empty() {
        // No direction flips the label: report the budget-sized step along the
        // first non-true direction, which was just verified not to fool.
        let (_, dir) = dirs
            .iter()
            .find(|(c, _)| *c != l_true)
            .unwrap_or(&dirs[0]);
        let values: Vec<f32> = step(x, dir, p_max).zip(x).map(|(a, b)| a - b).collect();
        let perturbation = Perturbation::new(values, p_max)?;
        return Ok(AttackOutcome {
            epsilon_star: perturbation.norm(),
            perturbation,
            target_class: None,
            fooled: false,
            queries,
            bracket_width: None,
        });
    }

    let mut lo = vec![0.0; feasible.len()];
    let mut hi = vec![p_max; feasible.len()];
    // Brackets shrink in lockstep, so a single width test covers every class.
    while hi[0] - lo[0] > eps_acc {
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (a + b) / 2.0).collect();
        let fooled = probe(&mid, &feasible)?;
        queries += feasible.len();
        for (k, f) in fooled.into_iter().enumerate() {
            if f {
                hi[k] = mid[k];
            } else {
                lo[k] = mid[k];
            }
        }
    }

    let mut best = 0;
    for k in 1..feasible.len() {
        if hi[k] < hi[best] {
            best = k;
        }
    }
    let (target, dir) = &dirs[feasible[best]];
    let values: Vec<f32> = step(x, dir, hi[best]).zip(x).map(|(a, b)| a - b).collect();
    let norm = l2(&values);
    let perturbation = Perturbation::new(values, p_max.max(norm))?;
    Ok(AttackOutcome {
        epsilon_star: hi[best],
        perturbation,
        target_class: Some(*target),
        fooled: true,
        queries,
        bracket_width: Some(hi[best] - lo[best]),
    })
}
