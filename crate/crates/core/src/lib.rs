//! Pseudospectral simulation of the fifth-order KdV-BBM equation on a
//! periodic domain, with Gevrey-norm diagnostics, an analyticity-radius
//! estimator and numerical checks of the almost-conservation machinery.
//!
//! The numerical core is generic over [`Real`] (`f32`/`f64`); the symbol
//! evaluation in [`params`] also runs on exact rationals. Concrete aliases
//! for the common instantiations live at the crate root.

pub mod config;
pub mod conservation;
pub mod dynamics;
pub mod error;
pub mod gevrey;
pub mod params;
pub mod scalar;
pub mod snapshot;
pub mod spectral;
pub mod tracker;
pub mod verify;

pub use config::RunConfig;
pub use dynamics::{EvolutionState, Model, Scheme, StepperConfig};
pub use error::{Error, Result};
pub use gevrey::{GevreyPair, RadiusEstimate, RadiusOptions};
pub use params::{Parameters, SymbolKind};
pub use scalar::Real;
pub use spectral::{Grid, Parity, RealField, SpectralField};
pub use tracker::{RadiusTrajectory, TrajectoryRow};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type RealField64 = RealField<f64>;
pub type SpectralField64 = SpectralField<f64>;
pub type Parameters64 = Parameters<f64>;
pub type Model64 = Model<f64>;
pub type EvolutionState64 = EvolutionState<f64>;
/// Exact rational parameters for symbol arithmetic.
pub type ParametersQ = Parameters<num_rational::Ratio<i64>>;
