//! Generative design of concrete mixes with reduced environmental impact.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: UCI concrete data ingestion, linear impact labelling, age
//!   buckets, `[0, 1]` scaling and stratified splits.
//! - [`nn`]: a small dense network engine with manual backpropagation, Adam
//!   and a finite-difference gradient oracle.
//! - [`cvae`]: the conditional variational autoencoder over mix formulas.
//! - [`predictors`]: neural regressors for impacts and per-age strength.
//! - [`discovery`]: mass generation, dominance filtering, reduction reports,
//!   archetypal hulls, strength spectra and strength progression.
//! - [`pipeline`]: the file-level workflow driven by the command line tool.

pub mod cvae;
pub mod dataset;
pub mod discovery;
pub mod error;
pub mod nn;
pub mod pipeline;
pub mod predictors;
pub mod rng;

pub use error::{Error, Result};

#[cfg(test)]
mod testutil;
