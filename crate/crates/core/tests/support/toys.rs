//! Small classifiers with known geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfadv::attacks::Classifier;
use rfadv::nn::{softmax, LabelDist, Layer, Model};
use rfadv::Result;

/// Two classes over R^2 split by the circle of radius `r`: logits
/// `(r^2 - |x|^2, 0)`, so class 0 inside.
pub struct Radial {
    pub r: f64,
}

impl Radial {
    fn logits(&self, x: &[f32]) -> [f64; 2] {
        let n2: f64 = x.iter().map(|&v| (v as f64).powi(2)).sum();
        [self.r * self.r - n2, 0.0]
    }
}

impl Classifier for Radial {
    fn input_len(&self) -> usize {
        2
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn predict(&self, xs: &[f32], batch: usize) -> Result<Vec<usize>> {
        Ok(xs
            .chunks_exact(2)
            .take(batch)
            .map(|x| {
                let l = self.logits(x);
                usize::from(l[1] > l[0])
            })
            .collect())
    }

    fn loss_gradients(&self, x: &[f32], targets: &[LabelDist]) -> Result<Vec<Vec<f32>>> {
        let p = softmax(&self.logits(x));
        // dL/dl0 = p0 - t0 and dl0/dx = -2x.
        Ok(targets
            .iter()
            .map(|t| {
                let d0 = p[0] - t.values()[0] as f64;
                x.iter().map(|&v| (d0 * -2.0 * v as f64) as f32).collect()
            })
            .collect())
    }
}

/// Linear softmax classifier over R^2 with random weights.
pub fn random_planar(classes: usize, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Model::new(vec![2], vec![Layer::Dense { units: classes }, Layer::Softmax], seed).unwrap();
    let p = m.params_mut()[0].as_mut().unwrap();
    for v in p.kernel.data_mut() {
        *v = rng.random_range(-3.0..3.0);
    }
    for v in p.bias.data_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    m
}

/// Random points in the square `[-s, s]^2`.
pub fn points(count: usize, s: f32, seed: u64) -> Vec<[f32; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| [rng.random_range(-s..s), rng.random_range(-s..s)])
        .collect()
}
