//! Coresets for clustering panel time series drawn from Gaussian mixtures
//! with AR(1) errors.
//!
//! The crate covers the whole pipeline: exact likelihood evaluation
//! ([`objective`]), k-means over entity means ([`kmeans`]), the two-stage
//! sensitivity sampler and its baselines ([`coreset`]), a weighted
//! generalized-EM solver ([`em`]), a synthetic data generator ([`datagen`])
//! and an experiment harness ([`eval`]).

pub mod coreset;
pub mod datagen;
pub mod em;
pub mod eval;
pub mod error;
pub mod kmeans;
pub mod model;
pub mod objective;
pub mod rng;

mod par;
mod timing;

pub use error::{Error, Result};
pub use model::{
    Component, Coreset, CoresetEntity, EntitySeries, MixtureParams, ModelBounds, TimeSeriesDataset,
};
