use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{DataError, TokenSequence};

/// Marker fused onto a word's final symbol so that word boundaries survive
/// subword segmentation. Input tokens must not contain this string; the
/// corpus tokenizer cannot produce it because it splits on `<`.
pub const END_OF_WORD: &str = "</w>";

const FILE_VERSION: &str = "daegen-bpe-v1";

/// An ordered list of symbol-pair merges learned from a corpus. Applying
/// the merges is deterministic, and decoding inverts encoding exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
}

impl BpeModel {
    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        let mut out = String::from(FILE_VERSION);
        out.push('\n');
        for (left, right) in &self.merges {
            out.push_str(left);
            out.push('\t');
            out.push_str(right);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some(v) if v == FILE_VERSION => {}
            other => {
                return Err(DataError::Format(format!(
                    "bad BPE model version line: {other:?}, expected {FILE_VERSION}"
                )))
            }
        }
        let mut merges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let (left, right) = line.split_once('\t').ok_or_else(|| {
                DataError::Format(format!("BPE merge line {} lacks a tab", lineno + 2))
            })?;
            merges.push((left.to_owned(), right.to_owned()));
        }
        Ok(BpeModel { merges })
    }
}

fn word_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut symbols: Vec<String> = chars.iter().map(|c| c.to_string()).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END_OF_WORD);
    }
    symbols
}

fn apply_merge(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            let merged = format!("{}{}", symbols[i], symbols[i + 1]);
            symbols[i] = merged;
            symbols.remove(i + 1);
        } else {
            i += 1;
        }
    }
}

/// Learns `num_merges` merges from the corpus, greedily taking the symbol
/// pair with the highest frequency at each step; ties break toward the
/// lexicographically smaller pair. Stops early when no pair remains.
pub fn bpe_train(corpus: &[TokenSequence], num_merges: usize) -> BpeModel {
    assert!(!corpus.is_empty(), "bpe_train needs a non-empty corpus");
    let mut word_counts: HashMap<&str, u64> = HashMap::new();
    for seq in corpus {
        for token in seq.iter() {
            *word_counts.entry(token).or_insert(0) += 1;
        }
    }
    let mut words: Vec<(Vec<String>, u64)> = {
        let mut entries: Vec<(&str, u64)> = word_counts.into_iter().collect();
        entries.sort_unstable();
        entries
            .into_iter()
            .map(|(word, count)| (word_symbols(word), count))
            .collect()
    };

    let mut merges = Vec::with_capacity(num_merges);
    for _ in 0..num_merges {
        let mut pair_counts: HashMap<(&str, &str), u64> = HashMap::new();
        for (symbols, count) in &words {
            for pair in symbols.windows(2) {
                *pair_counts.entry((&pair[0], &pair[1])).or_insert(0) += count;
            }
        }
        let best = pair_counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        let Some(((left, right), _)) = best else {
            break;
        };
        let (left, right) = (left.to_owned(), right.to_owned());
        for (symbols, _) in &mut words {
            apply_merge(symbols, &left, &right);
        }
        merges.push((left, right));
    }
    BpeModel { merges }
}

/// Segments every token of `seq` into subword pieces by replaying the
/// model's merges. Unseen characters pass through as their own pieces;
/// nothing is ever dropped.
pub fn bpe_apply(model: &BpeModel, seq: &TokenSequence) -> TokenSequence {
    let mut out = Vec::new();
    for token in seq.iter() {
        let mut symbols = word_symbols(token);
        for (left, right) in &model.merges {
            if symbols.len() < 2 {
                break;
            }
            apply_merge(&mut symbols, left, right);
        }
        out.extend(symbols);
    }
    TokenSequence::new(out)
}

/// Reassembles subword pieces into words by concatenating up to each
/// end-of-word marker. Inverse of [`bpe_apply`] for any input sequence.
pub fn bpe_decode(seq: &TokenSequence) -> TokenSequence {
    let mut out = Vec::new();
    let mut word = String::new();
    for piece in seq.iter() {
        if let Some(stem) = piece.strip_suffix(END_OF_WORD) {
            word.push_str(stem);
            out.push(std::mem::take(&mut word));
        } else {
            word.push_str(piece);
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    TokenSequence::new(out)
}
