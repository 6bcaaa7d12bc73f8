//! Discrete-emission acoustic model, forced alignment, Viterbi-EM training
//! and the word n-gram language model.

mod align;
mod hmm;
mod lm;
mod train;

pub use align::{expand_transcript, forced_align, Alignment};
pub use hmm::{
    flat_start, training_fingerprint, AcousticModel, HmmState, LabelSource, MODEL_FORMAT_VERSION, UNTRAINED,
};
pub use lm::{estimate_lm, LanguageModel};
pub use train::{corpus_loglik, label_sources, train_supervised, Labeled, TrainConfig};
