//! Central finite differences against the engine's backward pass, in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfadv::nn::{cross_entropy, LabelDist, Layer, Model, Padding, Tensor};

pub const STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-3;
/// Below this magnitude both derivatives count as zero.
const ABS_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2DSame,
    Conv2DValid,
    Dense,
    ReLU,
    Dropout,
    Reshape,
    Flatten,
    Softmax,
}

pub const ALL_KINDS: [LayerKind; 8] = [
    LayerKind::Conv2DSame,
    LayerKind::Conv2DValid,
    LayerKind::Dense,
    LayerKind::ReLU,
    LayerKind::Dropout,
    LayerKind::Reshape,
    LayerKind::Flatten,
    LayerKind::Softmax,
];

fn sample_model(kind: LayerKind, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<Layer>) {
    let classes = rng.random_range(2..5);
    let head = |mut v: Vec<Layer>| {
        v.push(Layer::Dense { units: classes });
        v.push(Layer::Softmax);
        v
    };
    match kind {
        LayerKind::Conv2DSame | LayerKind::Conv2DValid => {
            let h = rng.random_range(2..4);
            let w = rng.random_range(3..7);
            let c = rng.random_range(1..4);
            let padding = if kind == LayerKind::Conv2DSame { Padding::Same } else { Padding::Valid };
            let kh = rng.random_range(1..=h.min(2));
            let kw = rng.random_range(1..=3);
            (
                vec![h, w, c],
                head(vec![
                    Layer::Conv2D {
                        filters: rng.random_range(1..4),
                        kernel: (kh, kw),
                        padding,
                    },
                    Layer::Flatten,
                ]),
            )
        }
        LayerKind::Dense => (
            vec![rng.random_range(2..7)],
            head(vec![Layer::Dense {
                units: rng.random_range(2..6),
            }]),
        ),
        LayerKind::ReLU => (
            vec![rng.random_range(2..7)],
            head(vec![
                Layer::Dense {
                    units: rng.random_range(3..7),
                },
                Layer::ReLU,
            ]),
        ),
        LayerKind::Dropout => (
            vec![rng.random_range(2..7)],
            head(vec![
                Layer::Dense {
                    units: rng.random_range(3..7),
                },
                Layer::Dropout { rate: 0.5 },
            ]),
        ),
        LayerKind::Reshape => {
            let (a, b) = (rng.random_range(1..3), rng.random_range(2..4));
            (
                vec![a * b * 2],
                head(vec![
                    Layer::Reshape { shape: vec![a, b, 2] },
                    Layer::Conv2D {
                        filters: 2,
                        kernel: (1, 2),
                        padding: Padding::Same,
                    },
                    Layer::Flatten,
                ]),
            )
        }
        LayerKind::Flatten => (
            vec![rng.random_range(1..3), rng.random_range(2..4), rng.random_range(1..3)],
            head(vec![Layer::Flatten]),
        ),
        LayerKind::Softmax => (vec![rng.random_range(2..7)], head(Vec::new())),
    }
}

fn randomize(model: &mut Model<f64>, rng: &mut ChaCha8Rng) {
    for p in model.params_mut().iter_mut().flatten() {
        for v in p.kernel.data_mut().iter_mut().chain(p.bias.data_mut().iter_mut()) {
            *v = rng.random_range(-1.0..1.0);
        }
    }
}

fn random_target(classes: usize, rng: &mut ChaCha8Rng) -> LabelDist<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    LabelDist::new(raw.into_iter().map(|v| v / s).collect()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < ABS_FLOOR {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Smallest |pre-activation| at the ReLU, so kinks can be kept away from `x`.
fn min_relu_margin(model: &Model<f64>, x: &[f64]) -> f64 {
    let p = model.params()[0].as_ref().unwrap();
    let units = p.bias.len();
    (0..units)
        .map(|u| {
            let z: f64 = x
                .iter()
                .enumerate()
                .map(|(i, xi)| xi * p.kernel.data()[i * units + u])
                .sum::<f64>()
                + p.bias.data()[u];
            z.abs()
        })
        .fold(f64::INFINITY, f64::min)
}

/// One random instance of `kind`; returns the worst relative error over the
/// input gradient and every parameter gradient.
pub fn check_instance(kind: LayerKind, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (shape, layers) = sample_model(kind, &mut rng);
    let mut model: Model<f64> = Model::<f32>::new(shape.clone(), layers, seed).unwrap().cast();
    randomize(&mut model, &mut rng);
    let n: usize = shape.iter().product();
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    if kind == LayerKind::ReLU {
        while min_relu_margin(&model, &x) < 10.0 * STEP {
            x = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        }
    }
    let target = random_target(model.num_classes(), &mut rng);

    if kind == LayerKind::Dropout {
        return check_dropout(&mut model, &x, target.argmax(), rng.random());
    }

    let loss = |m: &Model<f64>, x: &[f64]| {
        let p = m.forward(&Tensor::new(shape.clone(), x.to_vec()).unwrap()).unwrap();
        cross_entropy(&p, &target).unwrap()
    };
    let report = model.backward(&Tensor::new(shape.clone(), x.clone()).unwrap(), &target).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut xp = x.clone();
        xp[i] += STEP;
        let mut xm = x.clone();
        xm[i] -= STEP;
        let fd = (loss(&model, &xp) - loss(&model, &xm)) / (2.0 * STEP);
        worst = worst.max(rel_err(fd, report.input_grad.data()[i]));
    }
    for li in 0..model.params().len() {
        let Some(g) = report.param_grads[li].clone() else {
            continue;
        };
        for (which, analytic) in [(0, g.kernel.data().to_vec()), (1, g.bias.data().to_vec())] {
            for (j, &a) in analytic.iter().enumerate() {
                let bump = |delta: f64| {
                    let mut m = model.clone();
                    let p = m.params_mut()[li].as_mut().unwrap();
                    let t = if which == 0 { &mut p.kernel } else { &mut p.bias };
                    t.data_mut()[j] += delta;
                    loss(&m, &x)
                };
                let fd = (bump(STEP) - bump(-STEP)) / (2.0 * STEP);
                worst = worst.max(rel_err(fd, a));
            }
        }
    }
    worst
}

/// Dropout in training mode: the mask is fixed by reseeding the same stream
/// for every evaluation, so finite differences see one fixed function.
fn check_dropout(model: &mut Model<f64>, x: &[f64], label: usize, stream: u64) -> f64 {
    let eval = |m: &Model<f64>| {
        let mut r = ChaCha8Rng::seed_from_u64(stream);
        m.batch_gradients(x, &[label], Some(&mut r)).unwrap()
    };
    let (_, grads) = eval(model);
    let mut worst: f64 = 0.0;
    for li in 0..model.params().len() {
        let Some(g) = grads[li].clone() else {
            continue;
        };
        for (which, analytic) in [(0, g.kernel.data().to_vec()), (1, g.bias.data().to_vec())] {
            for (j, &a) in analytic.iter().enumerate() {
                let bump = |delta: f64| {
                    let mut m = model.clone();
                    let p = m.params_mut()[li].as_mut().unwrap();
                    let t = if which == 0 { &mut p.kernel } else { &mut p.bias };
                    t.data_mut()[j] += delta;
                    eval(&m).0
                };
                let fd = (bump(STEP) - bump(-STEP)) / (2.0 * STEP);
                worst = worst.max(rel_err(fd, a));
            }
        }
    }
    worst
}
