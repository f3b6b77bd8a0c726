//! Latent-word densification, low rank alignment and stability metrics for
//! word-embedding models.
//!
//! - [`embedding_io`]: word2vec text I/O and a seeded synthetic generator of
//!   "retrained" model pairs.
//! - [`geometry`]: cosine similarity, ε-neighborhoods, k-NN and rank tables.
//! - [`latent`]: latent words, ±1 sums of neighborhood members kept only when
//!   they stay inside the neighborhood.
//! - [`align`]: low rank alignment of two point sets into a joint space.
//! - [`metrics`]: trustworthiness, continuity and neighborhood overlap.
//! - [`harness`]: the experiment drivers behind the `latent-align` CLI.

pub mod align;
pub mod embedding_io;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod latent;
pub mod metrics;

pub use error::{Error, Result};
