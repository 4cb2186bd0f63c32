//! Cubatures on Grassmannians.
//!
//! Construction of cubatures by fusion-frame-potential minimization with an
//! exact certificate, moment reconstruction from one-dimensional projections,
//! covering and integration diagnostics, and phase retrieval from projection
//! magnitudes.
//!
//! Numerical code is generic over [`Scalar`] (`f32`, `f64`); the closed-form
//! combinatorics in [`zonal`] are generic over [`zonal::CombScalar`] and run
//! exactly over [`Rational`]. Double-precision aliases are re-exported here.

pub mod cubature;
pub mod error;
pub mod grassmann;
pub mod io;
mod linalg;
pub mod moments;
pub mod phase;
pub mod quality;
pub mod rng;
pub mod scalar;
pub mod zonal;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact rational arithmetic for the combinatorial closed forms.
pub type Rational = num::BigRational;

pub type SymMatrix64 = grassmann::SymMatrix<f64>;
pub type Projector64 = grassmann::Projector<f64>;
pub type StiefelFrame64 = grassmann::StiefelFrame<f64>;
pub type WeightedCubature64 = cubature::WeightedCubature<f64>;
pub type FrameFamily64 = moments::FrameFamily<f64>;
pub type MeasurementSet64 = phase::MeasurementSet<f64>;
pub type SparseMeasure1D64 = moments::SparseMeasure1D<f64>;
