//! Eulerian cut finite elements for the non-stationary Stokes equations on
//! moving domains.
//!
//! The velocity lives on a fixed background triangulation restricted to a
//! δ-enlargement of the current domain; a ghost penalty extends it implicitly
//! so the BDF history can be evaluated on the next domain. Dirichlet data is
//! imposed with Nitsche's method and equal-order pressures are stabilized with
//! continuous interior penalty.

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod linsolve;
pub mod mesh;
pub mod quadrature;
pub mod space;
pub mod stabilization;
pub mod timestepper;
pub mod verification;
pub mod vtk;

pub use error::{Error, Result};
