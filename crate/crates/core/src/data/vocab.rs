use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{DataError, TokenSequence};

pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

/// Reserved tokens, in id order.
pub const RESERVED_TOKENS: [&str; 4] = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN];

pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const UNK_ID: usize = 3;

/// A token inventory with dense ids `0..len` and exact corpus counts.
/// Ids 0..=3 are reserved (padding, sentence start/end, unknown); corpus
/// tokens follow in rank order. Lookups of unknown tokens yield [`UNK_ID`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_ranked(ranked: Vec<(String, u64)>) -> Self {
        let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|t| t.to_string()).collect();
        let mut counts: Vec<u64> = vec![0; RESERVED_TOKENS.len()];
        for (token, count) in ranked {
            tokens.push(token);
            counts.push(count);
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(id, t)| (t.clone(), id))
            .collect();
        Vocabulary { tokens, counts, index }
    }

    /// Number of entries, reserved tokens included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved tokens are always present
    }

    /// The id for `token`, or [`UNK_ID`] when absent.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// The exact corpus count of `token`; 0 when absent.
    pub fn count(&self, token: &str) -> u64 {
        self.index.get(token).map_or(0, |&id| self.counts[id])
    }

    pub fn count_of_id(&self, id: usize) -> u64 {
        self.counts[id]
    }

    /// Sum of all counts (reserved entries count 0).
    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Maps a token sequence to ids, unknowns to [`UNK_ID`].
    pub fn ids(&self, seq: &[String]) -> Vec<usize> {
        seq.iter().map(|t| self.id(t)).collect()
    }

    /// The canonical file form: one `token<TAB>count` line per entry in id
    /// order, reserved tokens first.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (token, count) in self.tokens.iter().zip(&self.counts) {
            out.push_str(token);
            out.push('\t');
            out.push_str(&count.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path)?;
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let (token, count) = line.split_once('\t').ok_or_else(|| {
                DataError::Format(format!("vocabulary line {} lacks a tab", lineno + 1))
            })?;
            let count: u64 = count.trim().parse().map_err(|_| {
                DataError::Format(format!("vocabulary line {} has a bad count", lineno + 1))
            })?;
            tokens.push(token.to_owned());
            counts.push(count);
        }
        for (id, reserved) in RESERVED_TOKENS.iter().enumerate() {
            if tokens.get(id).map(String::as_str) != Some(*reserved) {
                return Err(DataError::Format(format!(
                    "vocabulary file does not start with the reserved tokens {RESERVED_TOKENS:?}"
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if index.insert(token.clone(), id).is_some() {
                return Err(DataError::Format(format!(
                    "vocabulary file repeats the token '{token}'"
                )));
            }
        }
        Ok(Vocabulary { tokens, counts, index })
    }
}

/// Counts every token of `corpus` and builds a vocabulary. With
/// `max_size`, only the `max_size` most frequent tokens are kept (ties
/// broken lexicographically); everything else maps to the unknown id at
/// lookup time. Tokens that collide with a reserved token are ignored.
pub fn build_vocabulary(corpus: &[TokenSequence], max_size: Option<usize>) -> Vocabulary {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for seq in corpus {
        for token in seq.iter() {
            if RESERVED_TOKENS.contains(&token.as_str()) {
                continue;
            }
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts
        .into_iter()
        .map(|(t, c)| (t.to_owned(), c))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(max) = max_size {
        ranked.truncate(max);
    }
    Vocabulary::from_ranked(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;

    #[test]
    fn counts_are_exact() {
        let corpus = vec![tokenize("a b a")];
        let vocab = build_vocabulary(&corpus, None);
        assert_eq!(vocab.count("a"), 2);
        assert_eq!(vocab.count("b"), 1);
        assert_eq!(vocab.total_count(), 3);
    }

    #[test]
    fn truncated_vocabulary_maps_rare_tokens_to_unk() {
        let corpus = vec![tokenize("x x x y y z")];
        let vocab = build_vocabulary(&corpus, Some(2));
        assert_eq!(vocab.len(), RESERVED_TOKENS.len() + 2);
        assert_ne!(vocab.id("x"), UNK_ID);
        assert_ne!(vocab.id("y"), UNK_ID);
        assert_eq!(vocab.id("z"), UNK_ID);
        assert_eq!(vocab.count("z"), 0);
    }

    #[test]
    fn rank_ties_break_lexicographically() {
        let corpus = vec![tokenize("b a b a c")];
        let vocab = build_vocabulary(&corpus, None);
        // a and b both occur twice; a ranks first.
        assert!(vocab.id("a") < vocab.id("b"));
        assert!(vocab.id("b") < vocab.id("c"));
    }

    #[test]
    fn ids_are_dense_and_reserved_are_fixed() {
        let corpus = vec![tokenize("q w e r t y")];
        let vocab = build_vocabulary(&corpus, None);
        assert_eq!(vocab.id(PAD_TOKEN), PAD_ID);
        assert_eq!(vocab.id(BOS_TOKEN), BOS_ID);
        assert_eq!(vocab.id(EOS_TOKEN), EOS_ID);
        assert_eq!(vocab.id(UNK_TOKEN), UNK_ID);
        let mut seen = vec![false; vocab.len()];
        for id in 0..vocab.len() {
            assert_eq!(vocab.id(vocab.token(id)), id);
            seen[id] = true;
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn file_round_trip() {
        let corpus = vec![tokenize("a b a c . .")];
        let vocab = build_vocabulary(&corpus, None);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        vocab.write(&path).unwrap();
        let back = Vocabulary::read(&path).unwrap();
        assert_eq!(vocab, back);
    }

    #[test]
    fn duplicate_tokens_in_a_file_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        std::fs::write(
            &path,
            "<pad>\t0\n<s>\t0\n</s>\t0\n<unk>\t0\na\t2\na\t1\n",
        )
        .unwrap();
        assert!(matches!(Vocabulary::read(&path), Err(DataError::Format(_))));
    }

    #[test]
    fn count_source_can_differ_from_training_corpus() {
        let in_domain = vec![tokenize("Fitzbillies serves coffee")];
        let out_of_domain = vec![tokenize("the market fell as the index dropped")];
        let ind = build_vocabulary(&in_domain, None);
        let ood = build_vocabulary(&out_of_domain, None);
        // Domain content words are frequent in-domain but absent from the
        // out-of-domain counts.
        assert_eq!(ind.count("Fitzbillies"), 1);
        assert_eq!(ood.count("Fitzbillies"), 0);
        assert_eq!(ood.count("the"), 2);
    }
}
