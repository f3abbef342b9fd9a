use ndarray::{s, Array1};

use super::gru::GruCache;
use super::math::{concat, log_softmax, softmax, tanh};
use super::{ModelError, ModelParams, SourceIds};
use crate::data::{BOS_ID, EOS_ID};

/// Encoder hidden states: one vector per source position, each the
/// concatenation of the right-to-left and left-to-right GRU states (in
/// that order), length `2 * hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates {
    pub h: Vec<Array1<f64>>,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// The right-to-left state at the first position, which seeds the
    /// decoder's initial state.
    pub(crate) fn final_backward_state(&self, hidden: usize) -> Array1<f64> {
        self.h[0].slice(s![0..hidden]).to_owned()
    }
}

/// One decoder step's observable quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStep {
    pub state_prev: Array1<f64>,
    /// The intermediate state after folding in the previous word.
    pub state_intermediate: Array1<f64>,
    /// The new decoder state after folding in the context.
    pub state: Array1<f64>,
    /// Attention weights over source positions; non-negative, sum 1.
    pub alpha: Array1<f64>,
    /// The attention-weighted context vector, length `2 * hidden`.
    pub context: Array1<f64>,
    /// Probability distribution over the target vocabulary.
    pub dist: Array1<f64>,
}

pub(crate) struct EncodeCache {
    pub fwd: Vec<GruCache>,
    pub bwd: Vec<GruCache>,
}

pub(crate) struct AttnCache {
    /// tanh layer of the scorer at each source position.
    pub hidden: Vec<Array1<f64>>,
    pub alpha: Array1<f64>,
    pub context: Array1<f64>,
}

pub(crate) struct StepCache {
    pub prev_id: usize,
    pub prev_embedding: Array1<f64>,
    pub word_gru: GruCache,
    pub attn: AttnCache,
    pub context_gru: GruCache,
    /// tanh layer of the output net.
    pub out_hidden: Array1<f64>,
    pub log_dist: Array1<f64>,
}

pub(crate) struct ForwardCache {
    pub enc: EncodeCache,
    pub states: EncoderStates,
    pub s0: Array1<f64>,
    pub steps: Vec<StepCache>,
    /// Gold ids, one per step (the target wrapped with the end marker).
    pub gold: Vec<usize>,
    pub loss: f64,
}

/// The embedding of one source position in split mode: slot name in the
/// upper half, value word in the lower half. Value words of a multi-word
/// slot each get their own vector, all sharing the same upper half.
pub fn split_embedding_lookup(
    params: &ModelParams,
    name_id: usize,
    value_id: usize,
) -> Result<Array1<f64>, ModelError> {
    if !params.dims.split_embedding {
        return Err(ModelError::InputMode);
    }
    if name_id >= params.dims.vocab_names {
        return Err(ModelError::IdOutOfRange { id: name_id, vocab: params.dims.vocab_names });
    }
    if value_id >= params.dims.vocab_src {
        return Err(ModelError::IdOutOfRange { id: value_id, vocab: params.dims.vocab_src });
    }
    let name = params.emb_names.row(name_id).to_owned();
    let value = params.emb_src.row(value_id).to_owned();
    Ok(concat(&[&name, &value]))
}

pub(crate) fn embed_source(
    params: &ModelParams,
    src: &SourceIds,
    position: usize,
) -> Result<Array1<f64>, ModelError> {
    match src {
        SourceIds::Words(ids) => {
            if params.dims.split_embedding {
                return Err(ModelError::InputMode);
            }
            let id = ids[position];
            if id >= params.dims.vocab_src {
                return Err(ModelError::IdOutOfRange { id, vocab: params.dims.vocab_src });
            }
            Ok(params.emb_src.row(id).to_owned())
        }
        SourceIds::SlotTagged(pairs) => {
            let (name_id, value_id) = pairs[position];
            split_embedding_lookup(params, name_id, value_id)
        }
    }
}

pub(crate) fn embed_target(params: &ModelParams, id: usize) -> Result<Array1<f64>, ModelError> {
    if id >= params.dims.vocab_tgt {
        return Err(ModelError::IdOutOfRange { id, vocab: params.dims.vocab_tgt });
    }
    Ok(params.target_embedding().row(id).to_owned())
}

pub(crate) fn encode_cached(
    params: &ModelParams,
    src: &SourceIds,
) -> Result<(EncoderStates, EncodeCache), ModelError> {
    if src.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let len = src.len();
    let hidden = params.dims.hidden;
    let inputs: Vec<Array1<f64>> = (0..len)
        .map(|i| embed_source(params, src, i))
        .collect::<Result<_, _>>()?;

    let mut fwd = Vec::with_capacity(len);
    let mut state = Array1::zeros(hidden);
    for x in &inputs {
        let cache = params.enc_fwd.step(x, &state);
        state = cache.h.clone();
        fwd.push(cache);
    }

    let mut bwd_rev = Vec::with_capacity(len);
    let mut state = Array1::zeros(hidden);
    for x in inputs.iter().rev() {
        let cache = params.enc_bwd.step(x, &state);
        state = cache.h.clone();
        bwd_rev.push(cache);
    }
    bwd_rev.reverse();
    let bwd = bwd_rev;

    let h = (0..len)
        .map(|i| concat(&[&bwd[i].h, &fwd[i].h]))
        .collect();
    Ok((EncoderStates { h }, EncodeCache { fwd, bwd }))
}

/// Runs the bidirectional encoder over the source ids.
pub fn encode(params: &ModelParams, src: &SourceIds) -> Result<EncoderStates, ModelError> {
    encode_cached(params, src).map(|(states, _)| states)
}

/// The decoder's initial state: a learned affine map of the final
/// right-to-left encoder state through tanh.
pub fn initial_state(params: &ModelParams, enc: &EncoderStates) -> Array1<f64> {
    let back = enc.final_backward_state(params.dims.hidden);
    tanh(&(params.init_w.dot(&back) + &params.init_b))
}

pub(crate) fn attend_cached(
    params: &ModelParams,
    state_intermediate: &Array1<f64>,
    enc: &EncoderStates,
) -> AttnCache {
    let len = enc.len();
    let mut hidden = Vec::with_capacity(len);
    let mut scores = Array1::zeros(len);
    for (i, h_i) in enc.h.iter().enumerate() {
        let input = concat(&[state_intermediate, h_i]);
        let layer = tanh(&(params.attn.w_hidden.dot(&input) + &params.attn.b_hidden));
        scores[i] = params.attn.w_score.dot(&layer)[0] + params.attn.b_score[0];
        hidden.push(layer);
    }
    let alpha = softmax(&scores);
    let mut context = Array1::zeros(enc.h[0].len());
    for (i, h_i) in enc.h.iter().enumerate() {
        context.scaled_add(alpha[i], h_i);
    }
    AttnCache { hidden, alpha, context }
}

/// Attention weights and context vector for one intermediate decoder
/// state: weights are the normalized exponentials of the feed-forward
/// scores, the context the weight-summed encoder states.
pub fn attend(
    params: &ModelParams,
    state_intermediate: &Array1<f64>,
    enc: &EncoderStates,
) -> (Array1<f64>, Array1<f64>) {
    let cache = attend_cached(params, state_intermediate, enc);
    (cache.alpha, cache.context)
}

pub(crate) fn decode_step_cached(
    params: &ModelParams,
    state_prev: &Array1<f64>,
    prev_id: usize,
    enc: &EncoderStates,
) -> Result<StepCache, ModelError> {
    let prev_embedding = embed_target(params, prev_id)?;
    let word_gru = params.dec_word.step(&prev_embedding, state_prev);
    let attn = attend_cached(params, &word_gru.h, enc);
    let context_gru = params.dec_context.step(&attn.context, &word_gru.h);
    let out_input = concat(&[&context_gru.h, &prev_embedding, &attn.context]);
    let out_hidden = tanh(&(params.out.w_hidden.dot(&out_input) + &params.out.b_hidden));
    let logits = params.out.w_vocab.dot(&out_hidden) + &params.out.b_vocab;
    let log_dist = log_softmax(&logits);
    Ok(StepCache {
        prev_id,
        prev_embedding,
        word_gru,
        attn,
        context_gru,
        out_hidden,
        log_dist,
    })
}

/// One teacher-forced decoder step: folds the previous target word into
/// the state, attends over the encoder states, folds the context in, and
/// produces the distribution over the next target word.
pub fn decode_step(
    params: &ModelParams,
    state_prev: &Array1<f64>,
    prev_id: usize,
    enc: &EncoderStates,
) -> Result<DecoderStep, ModelError> {
    let cache = decode_step_cached(params, state_prev, prev_id, enc)?;
    Ok(DecoderStep {
        state_prev: state_prev.clone(),
        state_intermediate: cache.word_gru.h.clone(),
        state: cache.context_gru.h.clone(),
        alpha: cache.attn.alpha.clone(),
        context: cache.attn.context.clone(),
        dist: cache.log_dist.mapv(f64::exp),
    })
}

pub(crate) fn forward_cached(
    params: &ModelParams,
    src: &SourceIds,
    tgt: &[usize],
) -> Result<ForwardCache, ModelError> {
    if tgt.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let vocab_tgt = params.dims.vocab_tgt;
    if vocab_tgt <= EOS_ID {
        return Err(ModelError::BadDims(format!(
            "target vocabulary of size {vocab_tgt} lacks the reserved ids"
        )));
    }
    for &id in tgt {
        if id >= vocab_tgt {
            return Err(ModelError::IdOutOfRange { id, vocab: vocab_tgt });
        }
    }
    let (states, enc) = encode_cached(params, src)?;
    let s0 = initial_state(params, &states);

    // Teacher forcing: condition on the gold previous token, predict the
    // target wrapped with the end-of-sentence id.
    let prev_ids = std::iter::once(BOS_ID).chain(tgt.iter().copied());
    let gold: Vec<usize> = tgt.iter().copied().chain(std::iter::once(EOS_ID)).collect();

    let mut steps = Vec::with_capacity(gold.len());
    let mut state = s0.clone();
    let mut loss = 0.0;
    for (prev_id, &gold_id) in prev_ids.zip(&gold) {
        let step = decode_step_cached(params, &state, prev_id, &states)?;
        loss -= step.log_dist[gold_id];
        state = step.context_gru.h.clone();
        steps.push(step);
    }
    loss /= gold.len() as f64;
    Ok(ForwardCache { enc, states, s0, steps, gold, loss })
}

/// Mean negative log-likelihood per target position (teacher-forced),
/// with the target wrapped in start/end markers.
pub fn forward_loss(
    params: &ModelParams,
    src: &SourceIds,
    tgt: &[usize],
) -> Result<f64, ModelError> {
    forward_cached(params, src, tgt).map(|c| c.loss)
}
