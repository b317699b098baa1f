use thiserror::Error;

use crate::bellman::RegionTag;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("point ({u}, {v}) lies on the singular set (tag {tag:?}); Q is only C^1 there")]
    SingularSet { u: f64, v: f64, tag: RegionTag },

    #[error(
        "quadrature did not converge for {what}: successive rules differ by {diff:e} > {tol:e}"
    )]
    Quadrature { what: String, diff: f64, tol: f64 },

    #[error("tau table does not cover ({u}, {v}); table box is [0, {u_max}] x [0, {v_max}]")]
    TableCoverage {
        u: f64,
        v: f64,
        u_max: f64,
        v_max: f64,
    },

    #[error(
        "field has a component of relative size {size:e} in the null space of the shifted operator"
    )]
    NullComponent { size: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("spectral truncation too small: top-mode mass {mass:e} exceeds {tol:e}")]
    Truncation { mass: f64, tol: f64 },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
