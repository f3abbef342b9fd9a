//! Generating text from a trained model: greedy decoding, beam search,
//! and the full meaning-representation-to-text path.

use ndarray::Array1;
use thiserror::Error;

use crate::corruption::{linearize_mr_with, BooleanNoPolicy, CorruptionError};
use crate::data::{bpe_apply, bpe_decode, detokenize, tokenize, BpeModel, MeaningRepresentation,
    TokenSequence, Vocabulary, BOS_ID, EOS_ID, PAD_ID};
use crate::model::{self, EncoderStates, ModelError, ModelParams, SourceIds};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linearize(#[from] CorruptionError),
}

#[derive(Debug, Clone)]
pub struct DecodeConfig {
    pub beam_size: usize,
    pub max_len: usize,
    /// Rank final hypotheses by log-probability per emitted token instead
    /// of raw log-probability.
    pub length_normalization: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam_size: 5, max_len: 60, length_normalization: false }
    }
}

/// Anything that scores next-token continuations. The trained model is
/// the production implementation; tests drive the search with hand-set
/// tables.
pub trait SequenceScorer {
    type State: Clone;

    fn start_state(&self) -> Self::State;

    /// Consumes the previous token and returns log-probabilities over the
    /// target vocabulary together with the successor state.
    fn step(&self, state: &Self::State, prev_id: usize) -> (Array1<f64>, Self::State);

    fn vocab_size(&self) -> usize;
}

/// The trained model plus the encoded source, ready for decoding.
pub struct ModelScorer<'a> {
    params: &'a ModelParams,
    enc: EncoderStates,
}

impl<'a> ModelScorer<'a> {
    pub fn new(params: &'a ModelParams, src: &SourceIds) -> Result<Self, ModelError> {
        let enc = model::encode(params, src)?;
        Ok(ModelScorer { params, enc })
    }
}

impl SequenceScorer for ModelScorer<'_> {
    type State = Array1<f64>;

    fn start_state(&self) -> Array1<f64> {
        model::initial_state(self.params, &self.enc)
    }

    fn step(&self, state: &Array1<f64>, prev_id: usize) -> (Array1<f64>, Array1<f64>) {
        let cache = model::forward::decode_step_cached(self.params, state, prev_id, &self.enc)
            .expect("in-range ids during decoding");
        (cache.log_dist.clone(), cache.context_gru.h)
    }

    fn vocab_size(&self) -> usize {
        self.params.dims.vocab_tgt
    }
}

/// One partial or finished beam hypothesis.
#[derive(Debug, Clone)]
pub struct Hypothesis<S> {
    /// Emitted token ids (start/end markers excluded).
    pub ids: Vec<usize>,
    /// Sum of per-step log-probabilities of every chosen token, the
    /// end-of-sentence choice included.
    pub log_prob: f64,
    pub state: S,
    pub finished: bool,
}

/// A finished (or fallback) decode with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedHypothesis {
    pub ids: Vec<usize>,
    pub log_prob: f64,
    pub finished: bool,
}

fn ranking_score(hyp: &DecodedHypothesis, length_normalization: bool) -> f64 {
    if length_normalization {
        let steps = hyp.ids.len() + usize::from(hyp.finished);
        hyp.log_prob / steps.max(1) as f64
    } else {
        hyp.log_prob
    }
}

/// Token ids the search never emits.
fn banned(id: usize) -> bool {
    id == PAD_ID || id == BOS_ID
}

/// Picks the argmax token at every step until the end marker or
/// `max_len`. Equivalent to beam search with beam size 1.
pub fn greedy<S: SequenceScorer>(scorer: &S, max_len: usize) -> DecodedHypothesis {
    assert!(
        scorer.vocab_size() > EOS_ID,
        "vocabulary must cover the reserved ids"
    );
    let mut state = scorer.start_state();
    let mut prev = BOS_ID;
    let mut ids = Vec::new();
    let mut log_prob = 0.0;
    for _ in 0..max_len {
        let (log_dist, next_state) = scorer.step(&state, prev);
        let mut best = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for (id, &score) in log_dist.iter().enumerate() {
            if !banned(id) && score > best_score {
                best = id;
                best_score = score;
            }
        }
        log_prob += best_score;
        if best == EOS_ID {
            return DecodedHypothesis { ids, log_prob, finished: true };
        }
        ids.push(best);
        state = next_state;
        prev = best;
    }
    DecodedHypothesis { ids, log_prob, finished: false }
}

/// Standard beam expansion: keep the `beam_size` best partial hypotheses
/// per step by cumulative log-probability, retire hypotheses that emit
/// the end marker, and return the best finished hypothesis (falling back
/// to the best unfinished one at `max_len`). Also returns the n-best
/// list, sorted by score with duplicate token sequences removed.
pub fn beam_search<S: SequenceScorer>(
    scorer: &S,
    config: &DecodeConfig,
) -> (DecodedHypothesis, Vec<DecodedHypothesis>) {
    assert!(config.beam_size >= 1, "beam size must be at least 1");
    assert!(config.max_len >= 1, "max_len must be at least 1");
    assert!(
        scorer.vocab_size() > EOS_ID,
        "vocabulary must cover the reserved ids"
    );
    let mut live = vec![Hypothesis {
        ids: Vec::new(),
        log_prob: 0.0,
        state: scorer.start_state(),
        finished: false,
    }];
    let mut finished: Vec<DecodedHypothesis> = Vec::new();

    for _ in 0..config.max_len {
        if live.is_empty() {
            break;
        }
        // Without length normalization scores only decrease, so nothing
        // live can overtake an already-finished hypothesis that outscores
        // every live one.
        if !config.length_normalization {
            let best_finished = finished.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            let best_live = live.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            if best_finished >= best_live {
                break;
            }
        }
        let expansions: Vec<(Array1<f64>, S::State)> = live
            .iter()
            .map(|hyp| {
                let prev = hyp.ids.last().copied().unwrap_or(BOS_ID);
                scorer.step(&hyp.state, prev)
            })
            .collect();
        // A hypothesis whose best continuation is the end marker has no
        // better way forward than to stop: it retires right away and
        // never competes for a slot. This is also what makes a beam of
        // width one follow greedy decoding exactly.
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (hyp_ix, (log_dist, _)) in expansions.iter().enumerate() {
            let mut best_tok = usize::MAX;
            let mut best_lp = f64::NEG_INFINITY;
            for (tok, &lp) in log_dist.iter().enumerate() {
                if !banned(tok) && lp > best_lp {
                    best_tok = tok;
                    best_lp = lp;
                }
            }
            if best_tok == EOS_ID {
                finished.push(DecodedHypothesis {
                    ids: live[hyp_ix].ids.clone(),
                    log_prob: live[hyp_ix].log_prob + best_lp,
                    finished: true,
                });
                continue;
            }
            for (tok, &lp) in log_dist.iter().enumerate() {
                if !banned(tok) {
                    candidates.push((live[hyp_ix].log_prob + lp, hyp_ix, tok));
                }
            }
        }
        // Candidate order (score desc, hypothesis index asc, token asc)
        // keeps selection deterministic.
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut next_live = Vec::with_capacity(config.beam_size);
        for &(score, hyp_ix, tok) in candidates.iter().take(config.beam_size) {
            if tok == EOS_ID {
                finished.push(DecodedHypothesis {
                    ids: live[hyp_ix].ids.clone(),
                    log_prob: score,
                    finished: true,
                });
            } else {
                let mut ids = live[hyp_ix].ids.clone();
                ids.push(tok);
                next_live.push(Hypothesis {
                    ids,
                    log_prob: score,
                    state: expansions[hyp_ix].1.clone(),
                    finished: false,
                });
            }
        }
        live = next_live;
    }

    let mut pool = finished;
    pool.extend(live.into_iter().map(|h| DecodedHypothesis {
        ids: h.ids,
        log_prob: h.log_prob,
        finished: false,
    }));
    debug_assert!(!pool.is_empty());
    pool.sort_by(|a, b| {
        ranking_score(b, config.length_normalization)
            .partial_cmp(&ranking_score(a, config.length_normalization))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut nbest: Vec<DecodedHypothesis> = Vec::new();
    for hyp in pool {
        if !nbest.iter().any(|h| h.ids == hyp.ids) {
            nbest.push(hyp);
        }
    }
    let best = nbest
        .iter()
        .find(|h| h.finished)
        .unwrap_or(&nbest[0])
        .clone();
    (best, nbest)
}

/// A trained model bundled with everything needed to map a meaning
/// representation to text: vocabularies, optional subword model, and the
/// decoding configuration.
pub struct Generator {
    pub params: ModelParams,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    /// Slot-name vocabulary for the split-embedding mode.
    pub name_vocab: Option<Vocabulary>,
    pub bpe: Option<BpeModel>,
    pub config: DecodeConfig,
    /// How boolean "no" slots verbalize during linearization.
    pub boolean_no: BooleanNoPolicy,
}

impl Generator {
    /// Maps surface tokens to model input ids (applying the subword model
    /// when present; unknown tokens map to the unknown id).
    pub fn source_ids(&self, tokens: &TokenSequence) -> SourceIds {
        let pieces = match &self.bpe {
            Some(model) => bpe_apply(model, tokens),
            None => tokens.clone(),
        };
        SourceIds::Words(self.src_vocab.ids(&pieces))
    }

    /// Slot-tagged input ids for the split-embedding mode.
    pub fn slot_tagged_ids(&self, mr: &MeaningRepresentation) -> Result<SourceIds, DecodeError> {
        let name_vocab = self.name_vocab.as_ref().ok_or(ModelError::InputMode)?;
        let mut pairs = Vec::new();
        for slot in &mr.slots {
            let name_id = name_vocab.id(&slot.name);
            for word in tokenize(&slot.value).iter() {
                pairs.push((name_id, self.src_vocab.id(word)));
            }
        }
        if pairs.is_empty() {
            return Err(CorruptionError::EmptyMr.into());
        }
        Ok(SourceIds::SlotTagged(pairs))
    }

    fn ids_to_text(&self, ids: &[usize]) -> String {
        let pieces: TokenSequence = ids
            .iter()
            .map(|&id| self.tgt_vocab.token(id).to_owned())
            .collect();
        let words = match &self.bpe {
            Some(_) => bpe_decode(&pieces),
            None => pieces,
        };
        detokenize(&words)
    }

    /// Linearizes the meaning representation, decodes with beam search,
    /// and detokenizes (undoing the subword segmentation when active).
    pub fn generate(&self, mr: &MeaningRepresentation) -> Result<String, DecodeError> {
        self.generate_with_flag(mr).map(|(text, _)| text)
    }

    /// Like [`Self::generate`], also reporting whether the returned
    /// hypothesis finished before the length limit.
    pub fn generate_with_flag(
        &self,
        mr: &MeaningRepresentation,
    ) -> Result<(String, bool), DecodeError> {
        let src = if self.params.dims.split_embedding {
            self.slot_tagged_ids(mr)?
        } else {
            self.source_ids(&linearize_mr_with(mr, self.boolean_no)?)
        };
        self.generate_from_source(&src)
    }

    /// Decodes directly from surface tokens (the reconstruction path).
    pub fn generate_from_tokens(&self, tokens: &TokenSequence) -> Result<String, DecodeError> {
        self.generate_from_source(&self.source_ids(tokens))
            .map(|(text, _)| text)
    }

    fn generate_from_source(&self, src: &SourceIds) -> Result<(String, bool), DecodeError> {
        let scorer = ModelScorer::new(&self.params, src)?;
        let (best, _) = beam_search(&scorer, &self.config);
        Ok((self.ids_to_text(&best.ids), best.finished))
    }

    /// The n-best list as (log-probability, finished, text) rows, best
    /// first.
    pub fn nbest(
        &self,
        mr: &MeaningRepresentation,
        k: usize,
    ) -> Result<Vec<(f64, bool, String)>, DecodeError> {
        let src = if self.params.dims.split_embedding {
            self.slot_tagged_ids(mr)?
        } else {
            self.source_ids(&linearize_mr_with(mr, self.boolean_no)?)
        };
        let scorer = ModelScorer::new(&self.params, &src)?;
        let mut config = self.config.clone();
        config.beam_size = config.beam_size.max(k);
        let (_, nbest) = beam_search(&scorer, &config);
        Ok(nbest
            .into_iter()
            .take(k)
            .map(|h| (h.log_prob, h.finished, self.ids_to_text(&h.ids)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UNK_ID;

    /// A fixed two-step distribution table. Vocabulary layout: the four
    /// reserved ids, then word ids 4..8 ("a", "b", "c", "d").
    struct TableScorer {
        /// log-probs for the first step.
        first: Vec<f64>,
        /// log-probs after emitting token `key`.
        after: std::collections::HashMap<usize, Vec<f64>>,
        /// distribution once two tokens were emitted: end-of-sentence.
        terminal: Vec<f64>,
    }

    impl SequenceScorer for TableScorer {
        type State = usize; // tokens emitted so far

        fn start_state(&self) -> usize {
            0
        }

        fn step(&self, state: &usize, prev_id: usize) -> (Array1<f64>, usize) {
            let row = match *state {
                0 => &self.first,
                1 => self.after.get(&prev_id).unwrap_or(&self.terminal),
                _ => &self.terminal,
            };
            (Array1::from_vec(row.clone()), state + 1)
        }

        fn vocab_size(&self) -> usize {
            8
        }
    }

    const NEG_INF: f64 = -1e30;

    fn logs(probs: &[(usize, f64)], vocab: usize) -> Vec<f64> {
        let mut row = vec![NEG_INF; vocab];
        for &(id, p) in probs {
            row[id] = p.ln();
        }
        row
    }

    /// Greedy takes "a" (0.6) then its best continuation (0.35); the
    /// sequence "b d" (0.39 * 0.9) scores higher.
    fn trap_scorer() -> TableScorer {
        let a = 4;
        let b = 5;
        let c = 6;
        let d = 7;
        let mut after = std::collections::HashMap::new();
        after.insert(a, logs(&[(c, 0.35), (d, 0.33), (EOS_ID, 0.32)], 8));
        after.insert(b, logs(&[(d, 0.9), (c, 0.05), (EOS_ID, 0.05)], 8));
        TableScorer {
            first: logs(&[(a, 0.6), (b, 0.39), (EOS_ID, 0.01)], 8),
            after,
            terminal: logs(&[(EOS_ID, 1.0)], 8),
        }
    }

    /// Every candidate sequence of length <= 2 with its exact
    /// log-probability (sequence probability times the end-marker step).
    fn enumerate_sequences(scorer: &TableScorer) -> Vec<(Vec<usize>, f64)> {
        let vocab = scorer.vocab_size();
        let mut out = Vec::new();
        let start = scorer.start_state();
        let (first, s1) = scorer.step(&start, BOS_ID);
        out.push((vec![], first[EOS_ID]));
        for t1 in 0..vocab {
            if banned(t1) || t1 == EOS_ID {
                continue;
            }
            let (second, s2) = scorer.step(&s1, t1);
            out.push((vec![t1], first[t1] + second[EOS_ID]));
            for t2 in 0..vocab {
                if banned(t2) || t2 == EOS_ID {
                    continue;
                }
                let (third, _) = scorer.step(&s2, t2);
                out.push((vec![t1, t2], first[t1] + second[t2] + third[EOS_ID]));
            }
        }
        out
    }

    #[test]
    fn beam_beats_greedy_on_the_trap_table() {
        let scorer = trap_scorer();
        let greedy_out = greedy(&scorer, 4);
        assert_eq!(greedy_out.ids, vec![4, 6]); // "a c"

        let config = DecodeConfig { beam_size: 2, max_len: 4, ..Default::default() };
        let (best, _) = beam_search(&scorer, &config);
        assert_eq!(best.ids, vec![5, 7]); // "b d"
        assert!(best.log_prob > greedy_out.log_prob + 1e-9);

        // Exhaustive enumeration confirms beam found the global optimum.
        let mut all = enumerate_sequences(&scorer);
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        assert_eq!(all[0].0, best.ids);
        assert!((all[0].1 - best.log_prob).abs() < 1e-9);
    }

    #[test]
    fn wide_beam_equals_exhaustive_argmax() {
        let scorer = trap_scorer();
        // Beam wider than the whole candidate space; max_len 3 leaves room
        // for the end-marker step of every length-2 sequence.
        let config = DecodeConfig { beam_size: 64, max_len: 3, ..Default::default() };
        let (best, _) = beam_search(&scorer, &config);
        let mut all = enumerate_sequences(&scorer);
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        assert_eq!(best.ids, all[0].0);
    }

    #[test]
    fn beam_one_equals_greedy() {
        let scorer = trap_scorer();
        let config = DecodeConfig { beam_size: 1, max_len: 4, ..Default::default() };
        let (best, _) = beam_search(&scorer, &config);
        let greedy_out = greedy(&scorer, 4);
        assert_eq!(best.ids, greedy_out.ids);
        assert!((best.log_prob - greedy_out.log_prob).abs() < 1e-12);
    }

    #[test]
    fn nbest_is_sorted_and_duplicate_free() {
        let scorer = trap_scorer();
        let config = DecodeConfig { beam_size: 5, max_len: 4, ..Default::default() };
        let (_, nbest) = beam_search(&scorer, &config);
        for pair in nbest.windows(2) {
            assert!(pair[0].log_prob >= pair[1].log_prob - 1e-12);
        }
        for (i, a) in nbest.iter().enumerate() {
            for b in &nbest[i + 1..] {
                assert_ne!(a.ids, b.ids);
            }
        }
    }

    #[test]
    fn no_emitted_id_is_reserved_padding() {
        let scorer = trap_scorer();
        let config = DecodeConfig { beam_size: 5, max_len: 4, ..Default::default() };
        let (best, nbest) = beam_search(&scorer, &config);
        for hyp in std::iter::once(&best).chain(&nbest) {
            assert!(hyp.ids.iter().all(|&id| id != PAD_ID && id != BOS_ID));
        }
        // The unknown id is a legitimate emission.
        let _ = UNK_ID;
    }
}
