//! Adversarial attacks on convolutional modulation classifiers.
//!
//! The crate synthesizes RML-style I/Q frames ([`dataset`]), trains the
//! VT-CNN2 classifier and a substitute MLP ([`models`]) on a small
//! from-scratch engine ([`nn`]), crafts white-box, universal, transferred,
//! shifted and jamming perturbations ([`attacks`]) and measures their effect
//! ([`eval`]), with CSV/SVG emission in [`report`].

pub mod attacks;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod report;

pub use error::{Error, Result};
