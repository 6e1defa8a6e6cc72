//! Group counterfactual explanations as optimal-transport maps for linear classifiers.

pub mod classifier;
pub mod dataio;
pub mod error;
pub mod gmm;
pub mod maps;
pub mod methods;
pub mod metrics;
pub mod moo;
pub mod numerics;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = numerics::Matrix<f64>;
pub type SymMatrix64 = numerics::SymMatrix<f64>;
pub type LinearModel64 = classifier::LinearModel<f64>;
pub type Halfspace64 = classifier::Halfspace<f64>;
pub type AffineMap64 = maps::AffineMap<f64>;
pub type GaussianMoments64 = maps::GaussianMoments<f64>;
pub type TransportMap64 = maps::TransportMap<f64>;
pub type SolveReport64 = solvers::SolveReport<f64>;
pub type Bounds64 = solvers::Bounds<f64>;
pub type FitConfig64 = methods::FitConfig<f64>;
pub type MetricsRecord64 = metrics::MetricsRecord<f64>;

pub type Matrix32 = numerics::Matrix<f32>;
pub type AffineMap32 = maps::AffineMap<f32>;
pub type SolveReport32 = solvers::SolveReport<f32>;
