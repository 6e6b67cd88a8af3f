use crate::error::{Error, Result};
use crate::nn::{Model, Params, Scalar};

/// First-order update rule and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn lr(&self) -> f64 {
        match *self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => lr,
        }
    }
}

/// Moment estimates carried between Adam steps. Unused by SGD.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

fn tensors<S: Scalar>(p: &Params<S>) -> [&[S]; 2] {
    [p.kernel.data(), p.bias.data()]
}

/// Applies one update to `model`'s weights.
///
/// Fails without touching any weight if a gradient is non-finite or does not
/// match its layer's shape.
pub fn optimizer_step<S: Scalar>(
    model: &mut Model<S>,
    grads: &[Option<Params<S>>],
    state: &mut OptimizerState,
    hyper: &Optimizer,
) -> Result<()> {
    if !(hyper.lr() > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {}",
            hyper.lr()
        )));
    }
    if grads.len() != model.params().len() {
        return Err(Error::shape("gradient list", &[model.params().len()], &[grads.len()]));
    }
    for (i, (p, g)) in model.params().iter().zip(grads).enumerate() {
        match (p, g) {
            (None, None) => {}
            (Some(p), Some(g)) => {
                if p.kernel.shape() != g.kernel.shape() || p.bias.shape() != g.bias.shape() {
                    return Err(Error::shape(
                        format!("gradient of {}", model.layer_name(i)),
                        p.kernel.shape(),
                        g.kernel.shape(),
                    ));
                }
                if !g.kernel.is_finite() || !g.bias.is_finite() {
                    return Err(Error::NonFiniteGradient {
                        layer: model.layer_name(i),
                    });
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "gradient presence does not match parameters at {}",
                    model.layer_name(i)
                )))
            }
        }
    }

    state.step += 1;
    if let Optimizer::Adam { .. } = hyper {
        if state.first.is_empty() {
            for g in grads.iter().flatten() {
                for t in tensors(g) {
                    state.first.push(vec![0.0; t.len()]);
                    state.second.push(vec![0.0; t.len()]);
                }
            }
        }
    }

    let mut slot = 0;
    for (p, g) in model.params_mut().iter_mut().zip(grads) {
        let (Some(p), Some(g)) = (p.as_mut(), g.as_ref()) else {
            continue;
        };
        for (w, dw) in [
            (p.kernel.data_mut(), g.kernel.data()),
            (p.bias.data_mut(), g.bias.data()),
        ] {
            match *hyper {
                Optimizer::Sgd { lr } => {
                    for (w, dw) in w.iter_mut().zip(dw) {
                        *w = S::from_f64(w.as_f64() - lr * dw.as_f64());
                    }
                }
                Optimizer::Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                } => {
                    let m = &mut state.first[slot];
                    let v = &mut state.second[slot];
                    let t = state.step as i32;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for (((w, dw), m), v) in w.iter_mut().zip(dw).zip(m.iter_mut()).zip(v.iter_mut()) {
                        let g = dw.as_f64();
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        let mhat = *m / c1;
                        let vhat = *v / c2;
                        *w = S::from_f64(w.as_f64() - lr * mhat / (vhat.sqrt() + eps));
                    }
                }
            }
            slot += 1;
        }
    }
    Ok(())
}
