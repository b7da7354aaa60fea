//! Neural automated text scoring.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] tokenises and ingests ASAP-style TSV files, builds the
//!   vocabulary, splits essays and extracts training windows.
//! * [`sswe`] learns score-specific word embeddings with a window network
//!   that ranks true n-grams above corrupted ones while regressing the
//!   essay score.
//! * [`seqmodel`] scores essays with stacked, optionally bidirectional,
//!   peephole LSTMs trained with RMSprop.
//! * [`saliency`] estimates per-token quality from input gradients under
//!   pseudo-scores and renders it as colour maps.
//! * [`metrics`] computes Spearman, Pearson, RMSE and quadratic weighted kappa.
//! * [`cli`] wires everything into the `ats` command line tool.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod saliency;
pub mod seqmodel;
pub mod sswe;

mod binio;
mod linalg;

pub use error::{Error, Result};
