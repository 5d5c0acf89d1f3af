//! Finite-dimensional quantum tomography workbench.
//!
//! Sources are density operators, detectors are discrete quantum measures
//! with a scale, filters are completely positive maps. The crate simulates
//! detection statistics for all of them, reconstructs them from the
//! statistics, and evaluates the closed-system and dissipative dynamics and
//! uncertainty relations that follow from the same operator calculus.

pub mod dynamics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod ops;
pub mod optics;
pub mod random;
pub mod simulator;
pub mod superop;
pub mod tomography;
pub mod uncertainty;

pub use error::{Error, Result};
