//! RML2016.10a-shaped synthetic dataset: 11 modulations x 20 SNR levels of
//! 2 x 128 I/Q frames, with a stratified half/half train/test split.

mod io;
mod modulation;
pub mod synth;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub use io::{decode_dataset, encode_dataset, read_dataset, write_dataset, DATASET_HEADER_LEN, DATASET_MAGIC, DATASET_RECORD_LEN, DATASET_VERSION};
pub use modulation::Modulation;
pub use synth::{synthesize_components, synthesize_example};

/// Time samples per frame.
pub const FRAME_LEN: usize = 128;
/// Reals per frame: I row then Q row.
pub const FRAME_VALUES: usize = 2 * FRAME_LEN;
/// Split seed used unless a dataset is explicitly re-split.
pub const DEFAULT_SPLIT_SEED: u64 = 0;

/// -20, -18, ..., 18 dB.
pub fn snr_levels() -> impl Iterator<Item = i32> {
    (-20..=18).step_by(2)
}

pub fn validate_snr(snr_db: i32) -> Result<()> {
    if (-20..=18).contains(&snr_db) && snr_db % 2 == 0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "SNR {snr_db} dB is not on the -20..=18 dB grid (step 2)"
        )))
    }
}

/// One received frame: 128 in-phase samples followed by 128 quadrature samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    values: Vec<f32>,
}

impl IqFrame {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.len() != FRAME_VALUES {
            return Err(Error::shape("I/Q frame", &[FRAME_VALUES], &[values.len()]));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("I/Q frame has non-finite samples".into()));
        }
        Ok(IqFrame { values })
    }

    pub fn zeros() -> Self {
        IqFrame {
            values: vec![0.0; FRAME_VALUES],
        }
    }

    /// Builds a frame from a constant in-phase and quadrature level.
    pub fn constant(i: f32, q: f32) -> Self {
        let mut values = vec![i; FRAME_LEN];
        values.extend(std::iter::repeat_n(q, FRAME_LEN));
        IqFrame { values }
    }

    pub fn from_complex(samples: &[Complex64]) -> Self {
        assert_eq!(samples.len(), FRAME_LEN);
        let mut values: Vec<f32> = samples.iter().map(|z| z.re as f32).collect();
        values.extend(samples.iter().map(|z| z.im as f32));
        IqFrame { values }
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn in_phase(&self) -> &[f32] {
        &self.values[..FRAME_LEN]
    }

    pub fn quadrature(&self) -> &[f32] {
        &self.values[FRAME_LEN..]
    }

    /// The classifier input, shaped `(2, 128, 1)`.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![2, FRAME_LEN, 1], self.values.clone()).expect("frame values are finite")
    }
}

/// Mean squared magnitude per time sample: `(1/128) * sum(I^2 + Q^2)`.
pub fn measure_power(frame: &IqFrame) -> f64 {
    frame
        .as_slice()
        .iter()
        .map(|&v| (v as f64) * (v as f64))
        .sum::<f64>()
        / FRAME_LEN as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub frame: IqFrame,
    pub modulation: Modulation,
    pub snr_db: i32,
}

impl Example {
    pub fn label(&self) -> usize {
        self.modulation.id() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    split_seed: u64,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Dataset {
    /// Wraps `examples` with a split stratified by (modulation, SNR): within
    /// each group a seeded shuffle sends the first half to training.
    pub fn new(examples: Vec<Example>, split_seed: u64) -> Self {
        let mut groups: std::collections::BTreeMap<(u8, i32), Vec<usize>> = Default::default();
        for (i, e) in examples.iter().enumerate() {
            groups.entry((e.modulation.id(), e.snr_db)).or_default().push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (_, mut idx) in groups {
            idx.shuffle(&mut rng);
            let half = idx.len() / 2;
            train.extend_from_slice(&idx[..half]);
            test.extend_from_slice(&idx[half..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Dataset {
            examples,
            split_seed,
            train,
            test,
        }
    }

    pub fn resplit(self, split_seed: u64) -> Self {
        Dataset::new(self.examples, split_seed)
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn train(&self) -> impl Iterator<Item = &Example> + '_ {
        self.train.iter().map(|&i| &self.examples[i])
    }

    pub fn test(&self) -> impl Iterator<Item = &Example> + '_ {
        self.test.iter().map(|&i| &self.examples[i])
    }

    /// Example counts per modulation id.
    pub fn class_histogram(&self) -> [usize; 11] {
        let mut h = [0; 11];
        for e in &self.examples {
            h[e.label()] += 1;
        }
        h
    }
}

/// Independent per-example seed derived from a master seed (SplitMix64).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `11 * 20 * n` examples ordered by modulation, then SNR, then draw index.
pub fn generate_dataset(n_per_class_per_snr: usize, seed: u64) -> Result<Dataset> {
    if n_per_class_per_snr == 0 {
        return Err(Error::InvalidArgument(
            "examples per (class, SNR) pair must be at least 1".into(),
        ));
    }
    let mut examples = Vec::with_capacity(11 * 20 * n_per_class_per_snr);
    for m in Modulation::ALL {
        for snr in snr_levels() {
            for _ in 0..n_per_class_per_snr {
                let s = derive_seed(seed, examples.len() as u64);
                examples.push(synthesize_example(m, snr, s)?);
            }
        }
    }
    Ok(Dataset::new(examples, DEFAULT_SPLIT_SEED))
}
