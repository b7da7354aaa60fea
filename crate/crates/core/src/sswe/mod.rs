//! Score-specific word embeddings.
//!
//! A window network embeds an `n`-token context, passes it through a hard
//! tanh hidden layer and feeds two linear heads: a context head trained with
//! a ranking hinge against centre-corrupted windows, and a score head trained
//! with squared error against the essay score. The two losses are mixed by
//! `alpha` and backpropagated into the embedding matrix.

mod io;
mod network;
mod train;

pub use io::{export_text, import_text, load_embeddings, save_embeddings, EmbeddingFile};
pub(crate) use io::{decode_metadata, encode_metadata};
pub use network::{
    htanh, htanh_grad, loss_context, loss_overall, loss_score, HeadOutputs, LossParts,
    SsweGradients, SsweParams,
};
pub use train::{nearest_neighbors, train_sswe, train_sswe_from, EpochLoss, SsweHyper};
