//! Fourier phase retrieval with an additive learned reference.
//!
//! The library solves y = |A(x + u)| for x with a fixed number of unrolled
//! gradient-descent layers, where A is a unitary 2D Fourier transform on a
//! 4x-oversampled canvas, and learns the reference u by differentiating the
//! reconstruction error through the entire unroll. Baselines (hybrid
//! input-output, flat and random references), quality metrics, image and
//! reference persistence, and synthetic toy datasets round out the toolkit.
//!
//! All numerics are generic over the scalar type through [`Scalar`]
//! (`f32`/`f64`); the stated tolerances assume `f64`. Concrete aliases for
//! the common types live at the crate root.

pub mod dataio;
pub mod error;
pub mod fft;
pub mod grid;
pub mod measurement;
pub mod metrics;
pub mod seed;
pub mod solver;
pub mod synth;
pub mod trainer;

mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type RealGrid32 = grid::RealGrid<f32>;
pub type RealGrid64 = grid::RealGrid<f64>;
pub type ComplexGrid32 = grid::ComplexGrid<f32>;
pub type ComplexGrid64 = grid::ComplexGrid<f64>;
pub type MeasurementOperator32 = measurement::MeasurementOperator<f32>;
pub type MeasurementOperator64 = measurement::MeasurementOperator<f64>;
pub type ReferenceSignal32 = trainer::ReferenceSignal<f32>;
pub type ReferenceSignal64 = trainer::ReferenceSignal<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type TrainConfig64 = trainer::TrainConfig<f64>;
