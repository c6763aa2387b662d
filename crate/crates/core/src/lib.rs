//! Simulation and spectral toolkit for symmetric stable processes killed on
//! leaving a domain: exact-marginal path sampling, exit-time Monte Carlo,
//! restricted fractional Laplacian eigenvalues, closed-form survival and heat
//! kernel envelopes, and a verification harness tying them together.

pub mod bounds;
pub mod domain;
pub mod error;
pub mod exit;
pub mod harness;
pub mod sampler;
pub mod spectral;
pub mod stats;

pub use domain::{CrossSection, Domain, HornProfile};
pub use error::{Error, Result};
pub use sampler::{PathSample, RngStream, StableParams};
pub use spectral::{DiscreteOperator, Method, SpectralEstimate};

