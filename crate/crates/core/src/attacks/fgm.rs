use crate::attacks::{l2, Classifier, Perturbation};
use crate::error::{Error, Result};
use crate::nn::LabelDist;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgmMode {
    /// `r = -alpha * grad L(x, y_target)`: descend toward `y`.
    Targeted,
    /// `r = alpha * grad L(x, y_true)`: ascend away from `y`.
    NonTargeted,
}

/// Fast gradient method with a raw (unnormalized) gradient step.
pub fn fgm<C: Classifier + ?Sized>(
    model: &C,
    x: &[f32],
    y: &LabelDist,
    alpha: f64,
    mode: FgmMode,
) -> Result<Perturbation> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    let g = model.loss_gradients(x, std::slice::from_ref(y))?.remove(0);
    let norm = l2(&g);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateGradient(format!("input gradient norm is {norm}")));
    }
    let sign = match mode {
        FgmMode::Targeted => -1.0,
        FgmMode::NonTargeted => 1.0,
    };
    let g: Vec<f64> = g.iter().map(|&v| v as f64).collect();
    Ok(Perturbation::scaled(&g, sign * alpha))
}
