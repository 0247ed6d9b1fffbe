//! Attribution of a binary outcome to two interacting binary exposures.
//!
//! Units are classified by their joint potential-outcome pattern under the
//! four exposure combinations. The crate identifies the distribution of
//! these latent classes and answers retrospective "what caused this
//! outcome" queries:
//!
//! - [`latent`]: class enumeration, monotonicity filtering, and evidence
//!   compatibility.
//! - [`rates`]: per-cell outcome rates from summary counts and the two
//!   point-identified class masses.
//! - [`bounds`]: nonparametric interval identification of the six monotone
//!   class probabilities and their posteriors.
//! - [`maxent`]: the maximum-entropy point estimate inside those bounds.
//! - [`em`]: full point identification with a secondary outcome via a
//!   latent-class Gaussian mixture fitted by EM, with or without the
//!   monotonicity restriction, plus AIC model comparison.
//! - [`attribution`]: posterior class probabilities given evidence,
//!   secondary-outcome refinements and curves, and responsibility shares.
//! - [`datagen`]: seeded generators for the simulation design and the
//!   smoking/asbestos summary-data replica.
//! - [`bootstrap`]: nonparametric bootstrap intervals for any pipeline.

pub mod attribution;
pub mod bootstrap;
pub mod bounds;
pub mod data;
pub mod datagen;
pub mod em;
pub mod error;
pub mod latent;
pub mod maxent;
pub mod rates;

pub use error::{Error, Result};

/// Version tag stamped into every machine-readable output.
pub const SCHEMA_VERSION: u32 = 1;
