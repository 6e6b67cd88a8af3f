//! Shared oracles for the integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod bisection;
pub mod formats;
pub mod gradcheck;
pub mod jacobi;
pub mod toys;
