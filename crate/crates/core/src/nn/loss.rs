use crate::error::{Error, Result};
use crate::nn::Scalar;

/// Probabilities are clamped to this floor inside the log of the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// A distribution over classes: a softmax output or an (often one-hot) label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDist<S: Scalar = f32> {
    values: Vec<S>,
}

impl<S: Scalar> LabelDist<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty label distribution".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < S::zero()) {
            return Err(Error::InvalidArgument(
                "label distribution entries must be finite and nonnegative".into(),
            ));
        }
        Ok(LabelDist { values })
    }

    pub fn one_hot(class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::InvalidArgument(format!(
                "class {class} out of range for {classes} classes"
            )));
        }
        let mut values = vec![S::zero(); classes];
        values[class] = S::one();
        Ok(LabelDist { values })
    }

    pub(crate) fn from_vec_unchecked(values: Vec<S>) -> Self {
        LabelDist { values }
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

pub(crate) fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax of one row of logits.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Categorical cross-entropy `-sum_k target_k * ln(max(pred_k, 1e-12))`.
pub fn cross_entropy<S: Scalar>(pred: &LabelDist<S>, target: &LabelDist<S>) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::shape(
            "cross_entropy",
            &[target.len()],
            &[pred.len()],
        ));
    }
    Ok(cross_entropy_slice(pred.values(), target.values()))
}

pub(crate) fn cross_entropy_slice<S: Scalar>(pred: &[S], target: &[S]) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(p, t)| -t.as_f64() * p.as_f64().max(PROB_FLOOR).ln())
        .sum()
}
