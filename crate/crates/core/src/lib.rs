//! Certification of the Bellman function behind dimension-free bilinear
//! embeddings and Riesz transform bounds, with numerical verification on
//! discrete weighted circles and truncated Ornstein-Uhlenbeck models.
//!
//! The Bellman, mollifier and quadrature layers are generic over [`Real`];
//! the aliases below fix them to `f64`, which is what the models, the
//! verification campaigns and the reports use.

pub mod bellman;
pub mod campaign;
pub mod error;
pub mod models;
pub mod mollify;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod scalar;
pub mod verify;

pub use campaign::{run, Campaign, CampaignConfig, CampaignOutcome};
pub use error::{Error, Result};
pub use report::{CertificationReport, CheckRecord, Status};
pub use scalar::Real;

pub type BellmanParams = bellman::BellmanParams<f64>;
pub type BellmanPoint = bellman::BellmanPoint<f64>;
pub type MollifiedBellman = mollify::MollifiedBellman<f64>;
pub type ConvolutionRule = mollify::ConvolutionRule<f64>;
