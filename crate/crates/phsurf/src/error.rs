//! Error type shared by every module of the crate.

use std::fmt;

/// Everything that can go wrong when evaluating geometry numerically.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A chart point lies outside the model's declared coordinate domain.
    OutOfChart { model: String, coords: [f64; 3] },
    /// A point handed to a surface operation does not lie on the surface.
    NotOnSurface { residual: f64 },
    /// The requested quantity is undefined at a singular point
    /// (tangent plane coincides with the contact plane).
    SingularPoint { detail: String },
    /// The Euler-Lagrange residual for E1 divides by |H_cr|; below the
    /// cutoff it is reported as undefined rather than regularized.
    ResidualUndefined { h_cr: f64 },
    /// A specialized formula was applied to a model that does not satisfy
    /// its hypotheses (e.g. non-constant Webster curvature).
    InapplicableModel { reason: String },
    /// Bad user-facing input: spec strings, domain guards, grid sizes.
    InvalidParameter { what: String },
    /// Integration gave up because most of the surface is flagged singular.
    MostlySingular { fraction: f64 },
    /// Root bracketing failed: no sign change on the given interval.
    NoBracket { a: f64, b: f64 },
    /// Generic numerical failure (non-convergence, degenerate solve).
    Numeric { what: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfChart { model, coords } => {
                write!(f, "point ({}, {}, {}) outside the {} chart domain", coords[0], coords[1], coords[2], model)
            }
            Error::NotOnSurface { residual } => {
                write!(f, "point not on surface (defining function residual {residual:.3e})")
            }
            Error::SingularPoint { detail } => write!(f, "singular point: {detail}"),
            Error::ResidualUndefined { h_cr } => {
                write!(f, "residual undefined (H_cr vanishes): |H_cr| = {:.3e}", h_cr.abs())
            }
            Error::InapplicableModel { reason } => write!(f, "formula inapplicable to this model: {reason}"),
            Error::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
            Error::MostlySingular { fraction } => {
                write!(f, "surface mostly singular ({:.1}% of nodes excluded)", fraction * 100.0)
            }
            Error::NoBracket { a, b } => write!(f, "no sign change on [{a}, {b}]"),
            Error::Numeric { what } => write!(f, "numerical failure: {what}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
