use rand::seq::SliceRandom;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::nn::{optimizer_step, Model, Optimizer, OptimizerState, Scalar};

/// One pass of shuffled mini-batch training with dropout enabled.
///
/// `inputs` holds `labels.len()` samples back to back. Returns the mean
/// training loss over the epoch.
pub fn train_epoch<S: Scalar>(
    model: &mut Model<S>,
    inputs: &[S],
    labels: &[usize],
    batch_size: usize,
    hyper: &Optimizer,
    state: &mut OptimizerState,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let len = model.input_len();
    if inputs.len() != labels.len() * len {
        return Err(Error::shape("training inputs", &[labels.len(), len], &[inputs.len()]));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(rng);

    let mut total = 0.0;
    let mut buf = Vec::with_capacity(batch_size * len);
    let mut batch_labels = Vec::with_capacity(batch_size);
    for chunk in order.chunks(batch_size) {
        buf.clear();
        batch_labels.clear();
        for &i in chunk {
            buf.extend_from_slice(&inputs[i * len..(i + 1) * len]);
            batch_labels.push(labels[i]);
        }
        let (loss, grads) = model.batch_gradients(&buf, &batch_labels, Some(&mut *rng))?;
        if !loss.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "training diverged: non-finite loss after {} steps",
                state.steps()
            )));
        }
        optimizer_step(model, &grads, state, hyper)?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / labels.len() as f64)
}
