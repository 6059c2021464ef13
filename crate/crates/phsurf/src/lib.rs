//! Geometry of surfaces in pseudohermitian 3-manifolds: model spaces with
//! explicit adapted frames, Legendrian surface frames with their invariants
//! (rotation mean curvature, Reeb angle, curvature-corrected mean curvature),
//! two bending energies with their Euler-Lagrange residuals, first-variation
//! probes, and a battery of closed-form verification checks.

pub mod chart;
pub mod error;
pub mod models;
pub mod num;
pub mod functionals;
pub mod surface;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
