//! Confidence-binned self-training and active learning for small discrete
//! HMM recognizers, on synthetic speech-like data.
//!
//! The crate generates a corpus with known ground truth, trains per-phone
//! HMM acoustic models with Viterbi-EM, decodes with exact k-best search to
//! get N-best word posteriors, and runs the retraining protocols that use
//! those posteriors to pick which unlabeled utterances to learn from.

pub mod am;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod io;
pub mod protocols;
pub mod rng;

pub use am::{AcousticModel, LabelSource, LanguageModel, TrainConfig};
pub use corpus::{Corpus, DataSplits, GeneratorConfig, Lexicon, Oracle, SplitRatios, Utterance, WordId};
pub use decoder::{DecodeConfig, DecodedPool, DecodedUtterance, Decoder, Hypothesis};
pub use error::{Error, Result};
pub use protocols::{Bin, BinSpec, Interval, ProfilePoint, ProtocolConfig, ProtocolContext, WerProfile};
