//! Well-balanced high-order finite volume methods for the Euler equations
//! with gravity.
//!
//! The crate provides third-order CWENO reconstruction on one- and
//! two-dimensional Cartesian grids, a local hydrostatic equilibrium
//! recovery that makes the scheme exactly well-balanced for arbitrary
//! equilibria, HLLC fluxes, SSP-RK3 time stepping, the test problems used
//! for validation and error metrics.

pub mod eos;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod flux;
pub mod mesh;
pub mod metrics;
pub mod problems;
pub mod reconstruction;
pub mod refsolver;
pub mod solver;
pub mod timeint;

pub use eos::{EquationOfState, IdealGas};
pub use equilibrium::{GravityField, LocalEquilibrium, NoGravity, UniformGravity};
pub use error::{Error, Result};
pub use mesh::{Axis, Grid1D, Grid2D, QuadratureRule};
pub use solver::{BoundaryCondition, Boundaries2D, SchemeMode, Solver1D, Solver2D};
