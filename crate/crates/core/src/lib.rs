//! Character-based word segmentation with DAG-structured LSTMs.
//!
//! Sentences are tagged with BMES labels by a bidirectional encoder. Besides
//! the plain uni-gram and bi-gram Bi-LSTM baselines, two DAG-LSTM encoders
//! read a lattice of every vocabulary word in the sentence, built with an
//! Aho-Corasick automaton. Models are trained with a max-margin structured
//! loss and decoded with Viterbi.

pub mod corpus;
pub mod encoders;
pub mod error;
pub mod inference;
pub mod lattice;
pub mod model;
pub mod model_io;
pub mod numeric;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
pub use model::Model;
