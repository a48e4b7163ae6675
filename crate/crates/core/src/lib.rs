//! Nonparametric estimation of compactly supported distribution functions
//! and densities with iterated function systems (IFS).
//!
//! The estimate is the fixed point of the Markov operator of an affine IFS
//! whose probabilities are chosen by matching sample moments. The workflow:
//!
//! 1. compute sample moments ([`moments::empirical_moments`]);
//! 2. pick a family of maps ([`affine_maps`]);
//! 3. assemble and solve the collage quadratic program ([`inverse_problem`]);
//! 4. iterate `T` from the uniform CDF ([`ifs_operator::fixed_point_cdf`]).
//!
//! [`spectral`] adds the characteristic function and a Fourier density
//! estimate, [`baselines`] the classical reference estimators and
//! [`experiments`] the Monte Carlo comparison harness.

pub mod affine_maps;
pub mod baselines;
pub mod error;
pub mod experiments;
pub mod ifs_operator;
pub mod inverse_problem;
pub mod moments;
pub mod spectral;

pub use affine_maps::{AffineMap, MapFamily, MapKind, SupportInterval};
pub use error::{IfsError, Result};
pub use ifs_operator::{IfsModel, PiecewiseCdf};
pub use inverse_problem::{ProbabilityVector, QuadraticProblem, SolverConfig, SolverReport};
pub use moments::{MomentVector, Sample, TransferMatrix};
