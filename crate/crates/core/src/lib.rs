//! Numerical laboratory for the Gauss-Codazzi system of negatively curved
//! 2-d isometric immersions, treated as a hyperbolic balance law
//!
//!   dU/dt + d/dx f(U;b) + P(U;b) = 0,     U = (ell, m),
//!
//! in geodesic coordinates g = dt^2 + b(t)^2 dx^2 with Gauss curvature K < 0.
//!
//! The crate provides:
//!
//! * [`geometry`] — metric/curvature profiles b(t), K(t) (helicoid family,
//!   curvature-decay family, tabulated) with their log-derivatives,
//! * [`gauss_codazzi`] — scaled states, flux, source, eigenstructure and
//!   Riemann invariants of the balance law,
//! * [`entropy`] — the entropy pair, its Hessian, and all relative
//!   quantities used in the stability estimates,
//! * [`solver`] — a viscous (Lax-Friedrichs / explicit-viscosity) finite
//!   volume integrator with invariant-region monitoring,
//! * [`stability`] — hypothesis checks, phi/psi weights, relative-entropy
//!   time series and the Gronwall bound verdict,
//! * [`reconstruction`] — frame integration rebuilding the immersion
//!   y : Omega -> R^3 from the fundamental forms, plus rigid alignment
//!   and mesh export.

pub mod entropy;
pub mod error;
pub mod fixtures;
pub mod gauss_codazzi;
pub mod geometry;
pub mod numeric;
pub mod reconstruction;
pub mod solver;
pub mod stability;

pub use error::Error;
pub use gauss_codazzi::{Boundary, FundamentalForm, Grid, InvariantBox, ScaledState, StateField};
pub use geometry::{MetricProfile, MetricSample};
pub use solver::{SolverConfig, Trajectory};
pub use stability::StabilityReport;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
