//! Lasso-based nuisance estimation and average-treatment-effect estimators.
//!
//! The crate is `no_std` and only needs `alloc`. It contains the numerical
//! core: the simulation designs ([`dgp`]), penalized regression solvers
//! ([`lasso`]), nuisance construction ([`nuisance`]) and the eight ATE
//! estimators ([`estimators`]). File formats, the Monte Carlo driver and
//! the command line live in the `ate-sim` companion crate.

#![no_std]

extern crate alloc;

pub mod dgp;
pub mod estimators;
pub mod lasso;
pub mod math;
pub mod matrix;
pub mod nuisance;
pub mod rng;

pub use dgp::{
    CalibratedDesign, ClusterParams, CoefficientPattern, CovarianceSpec, DesignSpec, DgpError,
    SimulatedSample,
};
pub use estimators::{Decomposition, EstimatorId, EstimatorResult, EstimatorStatus};
pub use lasso::{CvResult, Family, LassoError, LassoFit};
pub use matrix::Matrix;
pub use nuisance::{NuisanceSet, TuningRule};

