//! The two concrete classifiers and their weight files.

pub mod arch;
mod weights;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{Layer, Model, Padding};

pub use weights::{
    assign_weights, decode_weights, encode_weights, load_weights, read_weights, save_weights,
    NamedTensor, WEIGHTS_MAGIC, WEIGHTS_VERSION,
};

use arch::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    VtCnn2,
    SubstituteMlp,
}

impl ModelKind {
    pub fn build(self, seed: u64) -> Model {
        match self {
            ModelKind::VtCnn2 => build_vtcnn2(seed),
            ModelKind::SubstituteMlp => build_substitute_mlp(seed),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::VtCnn2 => "vtcnn2",
            ModelKind::SubstituteMlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vtcnn2" | "vt-cnn2" | "cnn" => Ok(ModelKind::VtCnn2),
            "mlp" | "substitute" | "substitute-mlp" => Ok(ModelKind::SubstituteMlp),
            other => Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

/// The VT-CNN2 modulation classifier over `(2, 128, 1)` frames.
pub fn vtcnn2_layers() -> Vec<Layer> {
    vec![
        Layer::Conv2D {
            filters: VTCNN2_CONV1_FILTERS,
            kernel: VTCNN2_CONV1_KERNEL,
            padding: Padding::Same,
        },
        Layer::ReLU,
        Layer::Dropout { rate: VTCNN2_DROPOUT },
        Layer::Conv2D {
            filters: VTCNN2_CONV2_FILTERS,
            kernel: VTCNN2_CONV2_KERNEL,
            padding: Padding::Same,
        },
        Layer::ReLU,
        Layer::Dropout { rate: VTCNN2_DROPOUT },
        Layer::Flatten,
        Layer::Dense {
            units: VTCNN2_DENSE_UNITS,
        },
        Layer::ReLU,
        Layer::Dropout { rate: VTCNN2_DROPOUT },
        Layer::Dense { units: NUM_CLASSES },
        Layer::Softmax,
    ]
}

/// Fully connected substitute network; consumes the frame flattened I row first.
pub fn substitute_mlp_layers() -> Vec<Layer> {
    let mut layers = vec![Layer::Flatten];
    for units in MLP_HIDDEN {
        layers.push(Layer::Dense { units });
        layers.push(Layer::ReLU);
    }
    layers.push(Layer::Dense { units: NUM_CLASSES });
    layers.push(Layer::Softmax);
    layers
}

pub fn build_vtcnn2(seed: u64) -> Model {
    Model::new(FRAME_SHAPE.to_vec(), vtcnn2_layers(), seed).expect("VT-CNN2 layers are consistent")
}

pub fn build_substitute_mlp(seed: u64) -> Model {
    Model::new(FRAME_SHAPE.to_vec(), substitute_mlp_layers(), seed).expect("MLP layers are consistent")
}

/// Builds the architecture for `kind` and fills it from a weights file.
pub fn load_model(kind: ModelKind, path: impl AsRef<std::path::Path>) -> Result<Model> {
    let mut model = kind.build(0);
    load_weights(&mut model, path)?;
    Ok(model)
}
