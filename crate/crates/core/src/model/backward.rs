use ndarray::{s, Array1};

use super::forward::forward_cached;
use super::math::{add_outer, concat, softmax_backward};
use super::{Gradients, ModelError, ModelParams, SourceIds};

/// Accumulates a gradient into one row of the target embedding table,
/// honoring tied mode.
fn add_target_embedding_grad(grads: &mut Gradients, id: usize, d: &Array1<f64>) {
    if grads.dims.tie_embeddings {
        let mut row = grads.emb_src.row_mut(id);
        row += d;
    } else {
        let mut row = grads.emb_tgt.row_mut(id);
        row += d;
    }
}

fn add_source_embedding_grad(grads: &mut Gradients, src: &SourceIds, position: usize, d: &Array1<f64>) {
    match src {
        SourceIds::Words(ids) => {
            let mut row = grads.emb_src.row_mut(ids[position]);
            row += d;
        }
        SourceIds::SlotTagged(pairs) => {
            let half = grads.dims.embed / 2;
            let (name_id, value_id) = pairs[position];
            let mut name_row = grads.emb_names.row_mut(name_id);
            name_row += &d.slice(s![0..half]);
            let mut value_row = grads.emb_src.row_mut(value_id);
            value_row += &d.slice(s![half..]);
        }
    }
}

/// Exact gradients of [`super::forward_loss`] with respect to every
/// parameter tensor, computed by backpropagation through time. Returns
/// the loss alongside the gradients.
pub fn backward(
    params: &ModelParams,
    src: &SourceIds,
    tgt: &[usize],
) -> Result<(f64, Gradients), ModelError> {
    let cache = forward_cached(params, src, tgt)?;
    let hidden = params.dims.hidden;
    let embed = params.dims.embed;
    let len = src.len();
    let scale = 1.0 / cache.gold.len() as f64;

    let mut grads = Gradients::zeros(&params.dims);
    // Gradient flowing into each encoder state from all decoder steps.
    let mut d_enc: Vec<Array1<f64>> = vec![Array1::zeros(2 * hidden); len];
    // Gradient flowing into s_t from step t+1.
    let mut d_state_next: Array1<f64> = Array1::zeros(hidden);

    for (step, &gold_id) in cache.steps.iter().zip(&cache.gold).rev() {
        // Output distribution: d loss / d logits = scale * (softmax - onehot).
        let mut d_logits = step.log_dist.mapv(f64::exp);
        d_logits[gold_id] -= 1.0;
        d_logits.mapv_inplace(|v| v * scale);

        add_outer(&mut grads.out.w_vocab, &d_logits, &step.out_hidden);
        grads.out.b_vocab += &d_logits;
        let d_out_hidden = params.out.w_vocab.t().dot(&d_logits);
        let d_out_pre = &d_out_hidden * &step.out_hidden.mapv(|v| 1.0 - v * v);
        let out_input = concat(&[&step.context_gru.h, &step.prev_embedding, &step.attn.context]);
        add_outer(&mut grads.out.w_hidden, &d_out_pre, &out_input);
        grads.out.b_hidden += &d_out_pre;
        let d_out_input = params.out.w_hidden.t().dot(&d_out_pre);

        let d_state =
            d_out_input.slice(s![0..hidden]).to_owned() + &d_state_next;
        let mut d_prev_embedding = d_out_input.slice(s![hidden..hidden + embed]).to_owned();
        let mut d_context = d_out_input.slice(s![hidden + embed..]).to_owned();

        // Context GRU: state = gru(input: context, state: intermediate).
        let (d_ctx_in, mut d_intermediate) =
            params.dec_context.backward(&step.context_gru, &d_state, &mut grads.dec_context);
        d_context += &d_ctx_in;

        // Attention: context = sum_i alpha_i * h_i with feed-forward scores.
        let states = &cache.states.h;
        let mut d_alpha = Array1::zeros(len);
        for i in 0..len {
            d_alpha[i] = states[i].dot(&d_context);
        }
        let d_scores = softmax_backward(&step.attn.alpha, &d_alpha);
        for i in 0..len {
            let layer = &step.attn.hidden[i];
            grads
                .attn
                .w_score
                .row_mut(0)
                .zip_mut_with(layer, |g, &a| *g += d_scores[i] * a);
            grads.attn.b_score[0] += d_scores[i];
            let d_layer = params.attn.w_score.row(0).mapv(|w| w * d_scores[i]);
            let d_layer_pre = &d_layer * &layer.mapv(|v| 1.0 - v * v);
            let attn_input = concat(&[&step.word_gru.h, &states[i]]);
            add_outer(&mut grads.attn.w_hidden, &d_layer_pre, &attn_input);
            grads.attn.b_hidden += &d_layer_pre;
            let d_attn_input = params.attn.w_hidden.t().dot(&d_layer_pre);
            d_intermediate += &d_attn_input.slice(s![0..hidden]);
            let mut d_h = d_attn_input.slice(s![hidden..]).to_owned();
            // Direct path through the weighted sum.
            d_h.scaled_add(step.attn.alpha[i], &d_context);
            d_enc[i] += &d_h;
        }

        // Word GRU: intermediate = gru(input: prev embedding, state: s_{t-1}).
        let (d_word_in, d_state_prev) =
            params.dec_word.backward(&step.word_gru, &d_intermediate, &mut grads.dec_word);
        d_prev_embedding += &d_word_in;
        add_target_embedding_grad(&mut grads, step.prev_id, &d_prev_embedding);
        d_state_next = d_state_prev;
    }

    // Initial decoder state: s0 = tanh(W * bh_1 + b).
    let d_s0 = d_state_next;
    let d_s0_pre = &d_s0 * &cache.s0.mapv(|v| 1.0 - v * v);
    let final_backward = cache.states.final_backward_state(hidden);
    add_outer(&mut grads.init_w, &d_s0_pre, &final_backward);
    grads.init_b += &d_s0_pre;
    let d_bh_first = params.init_w.t().dot(&d_s0_pre);

    // Forward-direction encoder GRU, right to left.
    let mut d_inputs: Vec<Array1<f64>> = vec![Array1::zeros(0); len];
    let mut carry = Array1::zeros(hidden);
    for i in (0..len).rev() {
        let d = d_enc[i].slice(s![hidden..]).to_owned() + &carry;
        let (d_x, d_prev) = params.enc_fwd.backward(&cache.enc.fwd[i], &d, &mut grads.enc_fwd);
        d_inputs[i] = d_x;
        carry = d_prev;
    }

    // Backward-direction encoder GRU; its "previous" state lives at i+1,
    // so the recurrence unwinds left to right.
    let mut carry = Array1::zeros(hidden);
    for i in 0..len {
        let mut d = d_enc[i].slice(s![0..hidden]).to_owned() + &carry;
        if i == 0 {
            d += &d_bh_first;
        }
        let (d_x, d_prev) = params.enc_bwd.backward(&cache.enc.bwd[i], &d, &mut grads.enc_bwd);
        d_inputs[i] += &d_x;
        carry = d_prev;
    }

    for (i, d_x) in d_inputs.iter().enumerate() {
        add_source_embedding_grad(&mut grads, src, i, d_x);
    }

    Ok((cache.loss, grads))
}
