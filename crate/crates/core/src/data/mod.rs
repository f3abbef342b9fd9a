//! Corpus ingestion: tokenization, length filtering, byte-pair encoding,
//! frequency-counted vocabularies, and slot-data parsing.

mod bpe;
mod mr;
mod sequence;
mod tokenize;
mod vocab;

pub use bpe::{bpe_apply, bpe_decode, bpe_train, BpeModel};
pub use mr::{parse_mr, read_labeled_csv, LabeledExample, MeaningRepresentation, SlotPair};
pub use sequence::TokenSequence;
pub use tokenize::{detokenize, tokenize};
pub use vocab::{build_vocabulary, Vocabulary, BOS_ID, BOS_TOKEN, EOS_ID, EOS_TOKEN, PAD_ID,
    PAD_TOKEN, RESERVED_TOKENS, UNK_ID, UNK_TOKEN};

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

/// Errors arising while ingesting or validating data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("duplicate slot name: {0}")]
    DuplicateSlot(String),
    #[error("invalid data: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad file format: {0}")]
    Format(String),
}

/// Reads a corpus file (UTF-8, one sentence per line) and tokenizes each
/// line. Blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<TokenSequence>, DataError> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|line| !line.trim().is_empty())
        .map(tokenize)
        .collect())
}

/// Keeps exactly the sequences of length at most `max_len`, preserving
/// order. Idempotent.
pub fn filter_by_length(corpus: Vec<TokenSequence>, max_len: usize) -> Vec<TokenSequence> {
    assert!(max_len >= 1, "max_len must be at least 1");
    corpus.into_iter().filter(|s| s.len() <= max_len).collect()
}
