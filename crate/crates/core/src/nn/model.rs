use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::layer::ConvGeometry;
use crate::nn::loss::{argmax, cross_entropy_slice, softmax};
use crate::nn::{LabelDist, Layer, Params, Scalar, Tensor};

/// Largest batch pushed through one inference pass.
const INFERENCE_CHUNK: usize = 64;

/// Exact gradients of the cross-entropy loss for one input.
#[derive(Debug, Clone)]
pub struct GradientReport<S: Scalar = f32> {
    /// Aligned with [`Model::layers`]; `None` for parameter-free layers.
    pub param_grads: Vec<Option<Params<S>>>,
    pub input_grad: Tensor<S>,
    pub loss_value: f64,
}

/// A sequential network ending in a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S: Scalar = f32> {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    /// `shapes[i]` is the per-sample input shape of layer `i`; the last entry is the output.
    shapes: Vec<Vec<usize>>,
    params: Vec<Option<Params<S>>>,
}

/// Per-layer activations recorded by a forward pass.
struct Trace<S: Scalar> {
    batch: usize,
    inputs: Vec<Vec<S>>,
    masks: Vec<Option<Vec<S>>>,
    logits: Vec<S>,
    probs: Vec<S>,
}

impl<S: Scalar> Trace<S> {
    /// Repeats a single-sample trace `k` times so `k` different output
    /// gradients can be pulled back through one forward pass.
    fn tile(mut self, k: usize) -> Self {
        debug_assert_eq!(self.batch, 1);
        for a in &mut self.inputs {
            *a = a.repeat(k);
        }
        for m in self.masks.iter_mut().flatten() {
            *m = m.repeat(k);
        }
        self.logits = self.logits.repeat(k);
        self.probs = self.probs.repeat(k);
        self.batch = k;
        self
    }
}

fn add_bias<S: Scalar>(out: &mut [S], bias: &[S]) {
    for row in out.chunks_exact_mut(bias.len()) {
        for (o, b) in row.iter_mut().zip(bias) {
            *o += *b;
        }
    }
}

fn column_sums<S: Scalar>(grad: &[S], width: usize) -> Vec<S> {
    let mut sums = vec![S::zero(); width];
    for row in grad.chunks_exact(width) {
        for (s, g) in sums.iter_mut().zip(row) {
            *s += *g;
        }
    }
    sums
}

impl<S: Scalar> Model<S> {
    /// Builds a model and draws Glorot-uniform kernels from `seed`; biases start at zero.
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>, seed: u64) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "input shape must be nonempty and positive, got {input_shape:?}"
            )));
        }
        match layers.iter().position(|l| *l == Layer::Softmax) {
            Some(i) if i + 1 == layers.len() => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "model must contain exactly one Softmax, as its last layer".into(),
                ))
            }
        }
        let mut shapes = vec![input_shape.clone()];
        for layer in &layers {
            let next = layer.output_shape(shapes.last().expect("nonempty"))?;
            shapes.push(next);
        }
        let out = shapes.last().expect("nonempty");
        if out.len() != 1 || out[0] < 2 {
            return Err(Error::InvalidArgument(format!(
                "model output must be a flat vector of at least 2 classes, got {out:?}"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = layers
            .iter()
            .zip(&shapes)
            .map(|(layer, shape)| {
                layer.param_layout(shape).map(|(fan_in, fan_out, kshape, blen)| {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let n: usize = kshape.iter().product();
                    let data = (0..n)
                        .map(|_| S::from_f64(rng.random_range(-limit..limit)))
                        .collect();
                    Params {
                        kernel: Tensor::from_parts(kshape, data),
                        bias: Tensor::zeros(vec![blen]),
                    }
                })
            })
            .collect();
        Ok(Model {
            input_shape,
            layers,
            shapes,
            params,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn num_classes(&self) -> usize {
        self.shapes.last().expect("nonempty")[0]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Per-sample input shape of every layer, followed by the output shape.
    pub fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn params(&self) -> &[Option<Params<S>>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<Params<S>>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(Params::len).sum()
    }

    /// Name used for layer `i` in weight files and error messages.
    pub fn layer_name(&self, i: usize) -> String {
        format!("{}_{i}", self.layers[i].tag())
    }

    /// Conversion between precisions (e.g. `f32` weights into an `f64` checking model).
    pub fn cast<T: Scalar>(&self) -> Model<T> {
        Model {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            shapes: self.shapes.clone(),
            params: self
                .params
                .iter()
                .map(|p| p.as_ref().map(Params::cast))
                .collect(),
        }
    }

    fn check_tensor(&self, x: &Tensor<S>) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::shape("model input", &self.input_shape, x.shape()));
        }
        Ok(())
    }

    fn check_batch(&self, xs: &[S], batch: usize) -> Result<()> {
        if xs.len() != batch * self.input_len() {
            return Err(Error::shape(
                "model input batch",
                &[batch, self.input_len()],
                &[xs.len()],
            ));
        }
        Ok(())
    }

    fn check_target(&self, t: &LabelDist<S>) -> Result<()> {
        if t.len() != self.num_classes() {
            return Err(Error::shape("target", &[self.num_classes()], &[t.len()]));
        }
        Ok(())
    }

    fn run_forward(
        &self,
        xs: &[S],
        batch: usize,
        mut dropout_rng: Option<&mut dyn RngCore>,
        keep: bool,
    ) -> Trace<S> {
        let mut trace = Trace {
            batch,
            inputs: Vec::new(),
            masks: Vec::new(),
            logits: Vec::new(),
            probs: Vec::new(),
        };
        let mut cur = xs.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let in_shape = &self.shapes[i];
            let mut mask = None;
            let out = match layer {
                Layer::Conv2D {
                    filters,
                    kernel,
                    padding,
                } => {
                    let p = self.params[i].as_ref().expect("conv params");
                    let g = ConvGeometry::new(in_shape, *kernel, *padding);
                    let mut out = vec![S::zero(); batch * g.positions() * filters];
                    g.forward(&cur, p.kernel.data(), *filters, batch, &mut out);
                    add_bias(&mut out, p.bias.data());
                    out
                }
                Layer::Dense { units } => {
                    let p = self.params[i].as_ref().expect("dense params");
                    let mut out = vec![S::zero(); batch * units];
                    S::gemm(batch, in_shape[0], *units, &cur, false, p.kernel.data(), false, &mut out, false);
                    add_bias(&mut out, p.bias.data());
                    out
                }
                Layer::ReLU => cur.iter().map(|&v| v.max(S::zero())).collect(),
                Layer::Dropout { rate } => match dropout_rng.as_deref_mut() {
                    Some(rng) if *rate > 0.0 => {
                        let scale = S::from_f64(1.0 / (1.0 - rate));
                        // Drop when a uniform u32 falls below rate * 2^32.
                        let cut = (*rate * 4294967296.0) as u64;
                        let mut bytes = vec![0u8; cur.len() * 4];
                        rng.fill_bytes(&mut bytes);
                        let m: Vec<S> = bytes
                            .chunks_exact(4)
                            .map(|b| {
                                let u = u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as u64;
                                if u < cut {
                                    S::zero()
                                } else {
                                    scale
                                }
                            })
                            .collect();
                        let out = cur.iter().zip(&m).map(|(a, b)| *a * *b).collect();
                        mask = Some(m);
                        out
                    }
                    _ => cur.clone(),
                },
                Layer::Flatten | Layer::Reshape { .. } => cur.clone(),
                Layer::Softmax => {
                    let c = in_shape[0];
                    let probs = cur.chunks_exact(c).flat_map(softmax).collect();
                    trace.logits = cur.clone();
                    probs
                }
            };
            if keep {
                trace.inputs.push(std::mem::replace(&mut cur, out));
                trace.masks.push(mask);
            } else {
                cur = out;
            }
        }
        trace.probs = cur;
        trace
    }

    /// Pulls `dlogits` back through a recorded forward pass.
    fn run_backward(
        &self,
        trace: &Trace<S>,
        dlogits: Vec<S>,
        want_params: bool,
        want_input: bool,
    ) -> (Vec<Option<Params<S>>>, Vec<S>) {
        let batch = trace.batch;
        let mut grads: Vec<Option<Params<S>>> = vec![None; self.layers.len()];
        let mut grad = dlogits;
        let last = self.layers.len() - 1;
        for i in (0..last).rev() {
            let need_dx = i > 0 || want_input;
            let x = &trace.inputs[i];
            let in_shape = &self.shapes[i];
            match &self.layers[i] {
                Layer::Dense { units } => {
                    let p = self.params[i].as_ref().expect("dense params");
                    let n_in = in_shape[0];
                    if want_params {
                        let mut dk = vec![S::zero(); n_in * units];
                        S::gemm(n_in, batch, *units, x, true, &grad, false, &mut dk, false);
                        grads[i] = Some(Params {
                            kernel: Tensor::from_parts(p.kernel.shape().to_vec(), dk),
                            bias: Tensor::from_parts(vec![*units], column_sums(&grad, *units)),
                        });
                    }
                    if need_dx {
                        let mut dx = vec![S::zero(); batch * n_in];
                        S::gemm(batch, *units, n_in, &grad, false, p.kernel.data(), true, &mut dx, false);
                        grad = dx;
                    }
                }
                Layer::Conv2D {
                    filters,
                    kernel,
                    padding,
                } => {
                    let p = self.params[i].as_ref().expect("conv params");
                    let g = ConvGeometry::new(in_shape, *kernel, *padding);
                    let mut dk = want_params.then(|| vec![S::zero(); g.patch_len() * filters]);
                    let mut dx = need_dx.then(|| vec![S::zero(); x.len()]);
                    g.backward(x, p.kernel.data(), &grad, *filters, batch, dk.as_deref_mut(), dx.as_deref_mut());
                    if let Some(dk) = dk {
                        grads[i] = Some(Params {
                            kernel: Tensor::from_parts(p.kernel.shape().to_vec(), dk),
                            bias: Tensor::from_parts(vec![*filters], column_sums(&grad, *filters)),
                        });
                    }
                    if let Some(dx) = dx {
                        grad = dx;
                    }
                }
                Layer::ReLU => {
                    for (g, v) in grad.iter_mut().zip(x) {
                        if *v <= S::zero() {
                            *g = S::zero();
                        }
                    }
                }
                Layer::Dropout { .. } => {
                    if let Some(m) = &trace.masks[i] {
                        for (g, s) in grad.iter_mut().zip(m) {
                            *g *= *s;
                        }
                    }
                }
                Layer::Flatten | Layer::Reshape { .. } | Layer::Softmax => {}
            }
        }
        (grads, grad)
    }

    /// Softmax output for one input in inference mode.
    pub fn forward(&self, x: &Tensor<S>) -> Result<LabelDist<S>> {
        self.check_tensor(x)?;
        let trace = self.run_forward(x.data(), 1, None, false);
        Ok(LabelDist::from_vec_unchecked(trace.probs))
    }

    /// Softmax outputs for `batch` inputs stored back to back; returns `batch * C` values.
    pub fn forward_batch(&self, xs: &[S], batch: usize) -> Result<Vec<S>> {
        self.check_batch(xs, batch)?;
        Ok(self.chunked(xs, |t| t.probs))
    }

    /// Raw pre-softmax scores for `batch` inputs.
    pub fn logits_batch(&self, xs: &[S], batch: usize) -> Result<Vec<S>> {
        self.check_batch(xs, batch)?;
        Ok(self.chunked(xs, |t| t.logits))
    }

    /// Inference over bounded sub-batches so large evaluations stay within memory.
    fn chunked(&self, xs: &[S], pick: impl Fn(Trace<S>) -> Vec<S>) -> Vec<S> {
        let len = self.input_len();
        let mut out = Vec::with_capacity(xs.len() / len * self.num_classes());
        for chunk in xs.chunks(INFERENCE_CHUNK * len) {
            out.extend(pick(self.run_forward(chunk, chunk.len() / len, None, false)));
        }
        out
    }

    /// Arg-max class of the output, lowest index on ties.
    pub fn predict_label(&self, x: &Tensor<S>) -> Result<usize> {
        self.check_tensor(x)?;
        Ok(self.predict_batch(x.data(), 1)?[0])
    }

    pub fn predict_batch(&self, xs: &[S], batch: usize) -> Result<Vec<usize>> {
        let logits = self.logits_batch(xs, batch)?;
        Ok(logits.chunks_exact(self.num_classes()).map(argmax).collect())
    }

    /// Loss plus exact parameter and input gradients for one input (inference mode).
    pub fn backward(&self, x: &Tensor<S>, target: &LabelDist<S>) -> Result<GradientReport<S>> {
        self.check_tensor(x)?;
        self.check_target(target)?;
        let trace = self.run_forward(x.data(), 1, None, true);
        let loss_value = cross_entropy_slice(&trace.probs, target.values());
        let dlogits = softmax_ce_grad(&trace.probs, target.values());
        let (param_grads, dx) = self.run_backward(&trace, dlogits, true, true);
        Ok(GradientReport {
            param_grads,
            input_grad: Tensor::from_parts(self.input_shape.clone(), dx),
            loss_value,
        })
    }

    /// Input gradients of the loss against each target, sharing one forward pass.
    ///
    /// Returns `(gradient, loss)` per target, in target order.
    pub fn input_gradients(&self, x: &[S], targets: &[LabelDist<S>]) -> Result<Vec<(Vec<S>, f64)>> {
        self.check_batch(x, 1)?;
        for t in targets {
            self.check_target(t)?;
        }
        if targets.is_empty() {
            return Ok(Vec::new());
        }
        let trace = self.run_forward(x, 1, None, true);
        let losses: Vec<f64> = targets
            .iter()
            .map(|t| cross_entropy_slice(&trace.probs, t.values()))
            .collect();
        let dlogits: Vec<S> = targets
            .iter()
            .flat_map(|t| softmax_ce_grad(&trace.probs, t.values()))
            .collect();
        let trace = trace.tile(targets.len());
        let (_, dx) = self.run_backward(&trace, dlogits, false, true);
        Ok(dx
            .chunks_exact(self.input_len())
            .map(<[S]>::to_vec)
            .zip(losses)
            .collect())
    }

    /// Mean loss and mean parameter gradients over a mini-batch.
    ///
    /// Passing `dropout_rng` enables dropout (training mode).
    pub fn batch_gradients(
        &self,
        xs: &[S],
        labels: &[usize],
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<(f64, Vec<Option<Params<S>>>)> {
        let batch = labels.len();
        if batch == 0 {
            return Err(Error::InvalidArgument("empty mini-batch".into()));
        }
        self.check_batch(xs, batch)?;
        let c = self.num_classes();
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range")));
        }
        let trace = self.run_forward(xs, batch, dropout_rng, true);
        let scale = S::from_f64(1.0 / batch as f64);
        let mut loss = 0.0;
        let mut dlogits = trace.probs.clone();
        for (b, &l) in labels.iter().enumerate() {
            let row = &mut dlogits[b * c..(b + 1) * c];
            loss -= row[l].as_f64().max(crate::nn::loss::PROB_FLOOR).ln();
            row[l] -= S::one();
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        let (grads, _) = self.run_backward(&trace, dlogits, true, false);
        Ok((loss / batch as f64, grads))
    }
}

/// d(cross_entropy(softmax(z), t))/dz = p * sum(t) - t.
fn softmax_ce_grad<S: Scalar>(probs: &[S], target: &[S]) -> Vec<S> {
    let mass: S = target.iter().copied().sum();
    probs.iter().zip(target).map(|(p, t)| *p * mass - *t).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Padding;

    /// Dense(1 -> 2) with kernel [[1, -1]] and zero bias.
    pub(crate) fn toy() -> Model<f64> {
        let mut m = Model::new(vec![1], vec![Layer::Dense { units: 2 }, Layer::Softmax], 0).unwrap();
        m.params_mut()[0].as_mut().unwrap().kernel.data_mut().copy_from_slice(&[1.0, -1.0]);
        m
    }

    fn x1(v: f64) -> Tensor<f64> {
        Tensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn toy_forward_at_zero_is_uniform() {
        let p = toy().forward(&x1(0.0)).unwrap();
        assert_eq!(p.values(), &[0.5, 0.5]);
    }

    #[test]
    fn toy_forward_at_two() {
        let p = toy().forward(&x1(2.0)).unwrap();
        let want0 = 1.0 / (1.0 + (-4.0f64).exp());
        assert!((p.values()[0] - want0).abs() < 1e-12);
        assert!((p.values()[0] - 0.9820).abs() < 1e-4);
        assert!((p.values()[1] - 0.0180).abs() < 1e-4);
        assert_eq!(toy().predict_label(&x1(2.0)).unwrap(), 0);
    }

    #[test]
    fn toy_input_gradient_at_zero() {
        let r = toy().backward(&x1(0.0), &LabelDist::one_hot(0, 2).unwrap()).unwrap();
        assert!((r.input_grad.data()[0] + 1.0).abs() < 1e-6);
        assert!((r.loss_value - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_final_layer_gives_uniform_output() {
        let mut m = Model::<f32>::new(
            vec![4],
            vec![Layer::Dense { units: 6 }, Layer::ReLU, Layer::Dense { units: 11 }, Layer::Softmax],
            3,
        )
        .unwrap();
        let last = m.params_mut()[2].as_mut().unwrap();
        last.kernel.data_mut().fill(0.0);
        let x = Tensor::new(vec![4], vec![0.3, -1.0, 2.0, 0.1]).unwrap();
        let p = m.forward(&x).unwrap();
        for v in p.values() {
            assert!((v - 1.0 / 11.0).abs() < 1e-7);
        }
        assert_eq!(m.predict_label(&x).unwrap(), 0);
    }

    #[test]
    fn one_hot_logits_predict_their_index() {
        let mut m = Model::<f32>::new(vec![1], vec![Layer::Dense { units: 11 }, Layer::Softmax], 0).unwrap();
        let p = m.params_mut()[0].as_mut().unwrap();
        p.kernel.data_mut().fill(0.0);
        p.bias.data_mut()[7] = 1.0;
        assert_eq!(m.predict_label(&Tensor::new(vec![1], vec![0.4]).unwrap()).unwrap(), 7);
    }

    #[test]
    fn target_equal_to_output_has_zero_input_gradient() {
        let m = Model::<f64>::new(
            vec![3],
            vec![Layer::Dense { units: 5 }, Layer::ReLU, Layer::Dense { units: 4 }, Layer::Softmax],
            11,
        )
        .unwrap();
        let x = Tensor::new(vec![3], vec![0.2, -0.7, 1.1]).unwrap();
        let p = m.forward(&x).unwrap();
        let r = m.backward(&x, &p).unwrap();
        assert!(r.input_grad.data().iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let err = toy().forward(&Tensor::new(vec![2], vec![0.0, 1.0]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }), "{err}");
        assert!(err.to_string().contains("[1]"));
    }

    #[test]
    fn softmax_must_be_last() {
        assert!(Model::<f32>::new(vec![2], vec![Layer::Softmax, Layer::Dense { units: 2 }], 0).is_err());
        assert!(Model::<f32>::new(vec![2], vec![Layer::Dense { units: 2 }], 0).is_err());
    }

    #[test]
    fn equal_seeds_give_equal_weights() {
        let layers = vec![
            Layer::Conv2D { filters: 3, kernel: (1, 3), padding: Padding::Same },
            Layer::Flatten,
            Layer::Dense { units: 2 },
            Layer::Softmax,
        ];
        let a = Model::<f32>::new(vec![2, 8, 1], layers.clone(), 9).unwrap();
        let b = Model::<f32>::new(vec![2, 8, 1], layers.clone(), 9).unwrap();
        let c = Model::<f32>::new(vec![2, 8, 1], layers, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn shared_forward_gradients_match_single_backward() {
        let m = Model::<f64>::new(
            vec![2, 6, 1],
            vec![
                Layer::Conv2D { filters: 3, kernel: (2, 3), padding: Padding::Same },
                Layer::ReLU,
                Layer::Flatten,
                Layer::Dense { units: 4 },
                Layer::Softmax,
            ],
            5,
        )
        .unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.9).sin()).collect();
        let targets: Vec<_> = (0..4).map(|c| LabelDist::one_hot(c, 4).unwrap()).collect();
        let shared = m.input_gradients(&x, &targets).unwrap();
        let xt = Tensor::new(vec![2, 6, 1], x).unwrap();
        for (t, (g, loss)) in targets.iter().zip(&shared) {
            let single = m.backward(&xt, t).unwrap();
            assert!((single.loss_value - loss).abs() < 1e-12);
            for (a, b) in single.input_grad.data().iter().zip(g) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_gradients_average_single_gradients() {
        let m = Model::<f64>::new(
            vec![3],
            vec![Layer::Dense { units: 4 }, Layer::ReLU, Layer::Dense { units: 3 }, Layer::Softmax],
            2,
        )
        .unwrap();
        let xs = [0.5, -0.2, 0.9, -1.0, 0.3, 0.4];
        let labels = [2, 0];
        let (loss, grads) = m.batch_gradients(&xs, &labels, None).unwrap();
        let mut want_loss = 0.0;
        let mut want = vec![0.0; 3 * 4];
        for (b, &l) in labels.iter().enumerate() {
            let x = Tensor::new(vec![3], xs[b * 3..b * 3 + 3].to_vec()).unwrap();
            let r = m.backward(&x, &LabelDist::one_hot(l, 3).unwrap()).unwrap();
            want_loss += r.loss_value / 2.0;
            for (w, g) in want.iter_mut().zip(r.param_grads[0].as_ref().unwrap().kernel.data()) {
                *w += g / 2.0;
            }
        }
        assert!((loss - want_loss).abs() < 1e-12);
        for (a, b) in grads[0].as_ref().unwrap().kernel.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
