//! Peephole LSTM essay scorer.
//!
//! An essay is read one embedding per timestep by one or two stacked layers,
//! optionally bidirectional. The representation is the top layer's output at
//! the last real token; a linear head maps it to a score. Training minimises
//! squared error with RMSprop, updating the embeddings as well.

mod io;
mod lstm;
mod model;
mod rmsprop;
mod train;

pub use io::{load_model, save_model, ModelFile};
pub use lstm::{LstmLayer, Peephole, StepCache, FORGET_BIAS, INIT_SCALE};
pub use model::{Architecture, ForwardCache, LayerStack, SeqGradients, SeqModel};
pub use rmsprop::{rmsprop_scalar, RmsProp, DEFAULT_DECAY, DEFAULT_EPSILON};
pub use train::{
    predict, predict_one, train_scorer, train_scorer_with, EpochRecord, ScorerHyper,
    TrainOutcome, HISTORY_HEADER,
};
