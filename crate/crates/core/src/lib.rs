//! Latent directed-network inference from undirected observations.
//!
//! An undirected tie between two actors reveals only that both directed
//! decisions behind it were favorable; its absence reveals that at least
//! one was not. This crate implements the generalized bilinear mixed-effects
//! regression for that partially observable regime: a Gibbs sampler over
//! truncated bivariate-normal latent utilities with additive sender/receiver
//! effects and a low-rank multiplicative latent space, plus a synthetic-data
//! recovery harness and a predictive-evaluation suite with directed-baseline
//! (GBME) and pooled-probit comparisons.
//!
//! The numerical core is generic over the scalar type through
//! [`scalar::Real`] (`f32` or `f64`); the aliases at the crate root fix the
//! common double-precision instantiations.

pub mod error;
pub mod eval;
pub mod gibbs;
pub mod linalg;
pub mod model;
pub mod samplers;
pub mod scalar;
pub mod special;
pub mod synthdata;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instantiations of the main types.
pub type CovariateSet64 = model::CovariateSet<f64>;
pub type ImputedCovariates64 = model::ImputedCovariates<f64>;
pub type FitConfig64 = gibbs::FitConfig<f64>;
pub type ModelState64 = gibbs::ModelState<f64>;
pub type PosteriorDraws64 = gibbs::PosteriorDraws<f64>;
pub type SimSpec64 = synthdata::SimSpec<f64>;
pub type SimResult64 = synthdata::SimResult<f64>;
pub type PredictionSurface64 = eval::PredictionSurface<f64>;
pub type PerfReport64 = eval::PerfReport<f64>;
