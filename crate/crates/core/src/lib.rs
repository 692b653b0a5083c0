//! Galerkin solver for the evolution Boussinesq system with nonmonotone
//! friction and heat-flux boundary laws.
//!
//! The scheme mollifies the boundary potentials, retards the coupling terms by
//! a lag of whole time steps and adds a vanishing p-Laplacian regularizer to
//! the heat equation. Each step solves a Taylor-Hood saddle system for the
//! velocity and a P1 system for the temperature.

pub mod element;
pub mod error;
pub mod forms;
pub mod laws;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod integrator;
pub mod spaces;
pub mod scenario;
pub mod harness;

pub use error::{Error, Result};
