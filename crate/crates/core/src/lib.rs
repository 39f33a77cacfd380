//! Harmonic state estimation by compressive sensing.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the experiment runner and CLI use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod artifacts;
pub mod cli;
pub mod design;
pub mod error;
pub mod experiment;
pub mod hse;
pub mod linalg;
pub mod measurement;
pub mod network;
pub mod recovery;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex64 = nalgebra::Complex<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
pub type CMatrix = nalgebra::DMatrix<Complex64>;
pub type CVector = nalgebra::DVector<Complex64>;

pub type HarmonicModel = network::HarmonicOrderModel<f64>;
pub type Candidates = measurement::CandidateMatrix<f64>;
pub type Measurements = measurement::MeasurementSet<f64>;
pub type Scenario = measurement::InjectionScenario<f64>;
pub type Design = design::SensingDesign<f64>;
pub type Recovery = recovery::RecoveryResult<f64>;
pub type Config = recovery::SolverConfig<f64>;
pub type Estimate = hse::HseEstimate<f64>;
pub type Truth = hse::GroundTruth<f64>;
