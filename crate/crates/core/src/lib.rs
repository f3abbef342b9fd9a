//! Training a denoising sequence autoencoder on unlabeled text and using it
//! to verbalize structured slot data.
//!
//! The pipeline, end to end:
//!
//! * [`data`] — tokenization, length filtering, byte-pair encoding and
//!   frequency-counted vocabularies, plus parsing of slot-based meaning
//!   representations.
//! * [`corruption`] — turning clean sentences into corrupted training inputs
//!   (random deletion, frequency-thresholded deletion, bigram-preserving
//!   shuffling) and linearizing meaning representations into the same
//!   surface form.
//! * [`model`] — a bidirectional GRU encoder with a two-GRU attention
//!   decoder, written directly against `ndarray` with hand-derived
//!   gradients.
//! * [`training`] — the SGD loop with a halving learning-rate schedule,
//!   per-epoch corruption resampling and checkpointing.
//! * [`decode`] — greedy and beam-search generation.
//! * [`eval`] — corpus BLEU, ROUGE-L and NIST scorers with multi-reference
//!   support and an approximate-randomization significance test.

pub mod corruption;
pub mod data;
pub mod decode;
pub mod eval;
pub mod model;
pub mod seed;
pub mod training;

pub use data::{
    BpeModel, LabeledExample, MeaningRepresentation, SlotPair, TokenSequence, Vocabulary,
};
