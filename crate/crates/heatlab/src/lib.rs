//! heatlab: heat flow on discrete metric-measure spaces.
//!
//! The crate realizes both constructions of the heat flow on a finite
//! weighted graph equipped with a shortest-path metric and a reference
//! measure:
//!
//! * the L2 gradient flow of the graph Dirichlet energy, via spectral
//!   calculus on the graph Laplacian ([`dirichlet`]);
//! * the minimizing-movement (JKO) scheme for the relative entropy in the
//!   Wasserstein geometry ([`jko`]), built on exact optimal transport
//!   ([`wasserstein`]).
//!
//! The [`verify`] module turns the relationship between the two flows, and
//! the curvature inequalities that connect them (contraction, gradient
//! estimates, the Gamma2 condition, heat-kernel bounds), into reproducible
//! numerical checks. [`space`] and [`generate`] provide the test geometries,
//! [`entropy`] the entropy/Fisher functionals, and [`drift`] the weighted
//! (Fokker-Planck) extension.

pub mod comparison;
pub mod dirichlet;
pub mod drift;
pub mod entropy;
pub mod error;
pub mod generate;
pub mod jko;
pub mod measure;
pub mod space;
pub mod verify;
pub mod wasserstein;

pub use dirichlet::{Field, SpectralData};
pub use error::{Error, Result};
pub use measure::ProbMeasure;
pub use space::DiscreteMMSpace;
