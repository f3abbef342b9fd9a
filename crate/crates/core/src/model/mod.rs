//! The attention encoder-decoder: a bidirectional GRU encoder, a two-GRU
//! decoder with feed-forward attention, the output distribution, the
//! teacher-forced loss, and exact hand-derived gradients.
//!
//! All tensors are `f64` and every shape is determined by [`Dims`]. The
//! split-embedding input mode represents each source position as a slot
//! name / value-word pair whose embeddings occupy the upper and lower
//! halves of the input vector.

mod backward;
mod checkpoint;
pub(crate) mod forward;
mod gru;
pub(crate) mod math;

pub use backward::backward;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use forward::{
    attend, decode_step, encode, forward_loss, initial_state, split_embedding_lookup,
    DecoderStep, EncoderStates,
};
pub use gru::{GruCache, GruParams};

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty input sequence")]
    EmptyInput,
    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    IdOutOfRange { id: usize, vocab: usize },
    #[error("source input does not match the model's embedding mode")]
    InputMode,
    #[error("invalid dims: {0}")]
    BadDims(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Every learnable shape in one place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab_src: usize,
    pub vocab_tgt: usize,
    /// Number of distinct slot names; only used in split-embedding mode.
    #[serde(default)]
    pub vocab_names: usize,
    pub embed: usize,
    pub hidden: usize,
    pub attn_hidden: usize,
    pub out_hidden: usize,
    /// Source positions are (slot name, value word) pairs embedded in the
    /// upper/lower halves of the input vector.
    #[serde(default)]
    pub split_embedding: bool,
    /// Share one embedding table between source and target.
    #[serde(default)]
    pub tie_embeddings: bool,
}

impl Dims {
    /// `attn_hidden` defaults to `hidden`, `out_hidden` to `embed`.
    pub fn new(vocab_src: usize, vocab_tgt: usize, embed: usize, hidden: usize) -> Self {
        Dims {
            vocab_src,
            vocab_tgt,
            vocab_names: 0,
            embed,
            hidden,
            attn_hidden: hidden,
            out_hidden: embed,
            split_embedding: false,
            tie_embeddings: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("vocab_src", self.vocab_src),
            ("vocab_tgt", self.vocab_tgt),
            ("embed", self.embed),
            ("hidden", self.hidden),
            ("attn_hidden", self.attn_hidden),
            ("out_hidden", self.out_hidden),
        ] {
            if v == 0 {
                return Err(ModelError::BadDims(format!("{name} must be positive")));
            }
        }
        if self.split_embedding {
            if !self.embed.is_multiple_of(2) {
                return Err(ModelError::BadDims(
                    "split-embedding mode needs an even embedding size".into(),
                ));
            }
            if self.vocab_names == 0 {
                return Err(ModelError::BadDims(
                    "split-embedding mode needs a slot-name vocabulary".into(),
                ));
            }
            if self.tie_embeddings {
                return Err(ModelError::BadDims(
                    "split-embedding mode cannot tie source and target tables".into(),
                ));
            }
        }
        if self.tie_embeddings && self.vocab_src != self.vocab_tgt {
            return Err(ModelError::BadDims(
                "tied embeddings need vocab_src == vocab_tgt".into(),
            ));
        }
        Ok(())
    }

    /// Width of one source embedding table row.
    pub fn src_embed_width(&self) -> usize {
        if self.split_embedding {
            self.embed / 2
        } else {
            self.embed
        }
    }
}

/// A source sequence in id space. `Words` is the ordinary mode;
/// `SlotTagged` pairs each value word with its slot name for the
/// split-embedding mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceIds {
    Words(Vec<usize>),
    SlotTagged(Vec<(usize, usize)>),
}

impl SourceIds {
    pub fn len(&self) -> usize {
        match self {
            SourceIds::Words(v) => v.len(),
            SourceIds::SlotTagged(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Attention net: a two-layer feed-forward scorer over the concatenation
/// of the intermediate decoder state and one encoder state.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_hidden: Array2<f64>,
    pub b_hidden: Array1<f64>,
    pub w_score: Array2<f64>,
    pub b_score: Array1<f64>,
}

/// Output net: a two-layer feed-forward network over the decoder state,
/// the previous target embedding and the context vector, followed by the
/// vocabulary projection.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputParams {
    pub w_hidden: Array2<f64>,
    pub b_hidden: Array1<f64>,
    pub w_vocab: Array2<f64>,
    pub b_vocab: Array1<f64>,
}

/// All learnable tensors. Gradients use the same container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    /// Source embedding table; value-word table in split mode.
    pub emb_src: Array2<f64>,
    /// Slot-name embedding table (rows only in split mode).
    pub emb_names: Array2<f64>,
    /// Target embedding table (empty when tied to `emb_src`).
    pub emb_tgt: Array2<f64>,
    pub enc_fwd: GruParams,
    pub enc_bwd: GruParams,
    /// Decoder GRU folding the previous target word into the state.
    pub dec_word: GruParams,
    /// Decoder GRU folding the attention context into the state.
    pub dec_context: GruParams,
    pub attn: AttentionParams,
    pub out: OutputParams,
    /// Affine map from the final backward encoder state to the initial
    /// decoder state (through tanh).
    pub init_w: Array2<f64>,
    pub init_b: Array1<f64>,
}

/// Gradients share the parameter container.
pub type Gradients = ModelParams;

pub(crate) enum TensorView<'a> {
    M(&'a Array2<f64>),
    V(&'a Array1<f64>),
}

pub(crate) enum TensorViewMut<'a> {
    M(&'a mut Array2<f64>),
    V(&'a mut Array1<f64>),
}

impl TensorView<'_> {
    pub(crate) fn as_slice(&self) -> &[f64] {
        match self {
            TensorView::M(a) => a.as_slice().expect("standard layout"),
            TensorView::V(a) => a.as_slice().expect("standard layout"),
        }
    }

    pub(crate) fn shape(&self) -> Vec<usize> {
        match self {
            TensorView::M(a) => a.shape().to_vec(),
            TensorView::V(a) => a.shape().to_vec(),
        }
    }
}

impl TensorViewMut<'_> {
    pub(crate) fn as_slice_mut(&mut self) -> &mut [f64] {
        match self {
            TensorViewMut::M(a) => a.as_slice_mut().expect("standard layout"),
            TensorViewMut::V(a) => a.as_slice_mut().expect("standard layout"),
        }
    }
}

fn gru_views<'a>(prefix: &str, gru: &'a GruParams) -> Vec<(String, TensorView<'a>)> {
    vec![
        (format!("{prefix}.update.w_input"), TensorView::M(&gru.w_update)),
        (format!("{prefix}.update.w_state"), TensorView::M(&gru.u_update)),
        (format!("{prefix}.update.bias"), TensorView::V(&gru.b_update)),
        (format!("{prefix}.reset.w_input"), TensorView::M(&gru.w_reset)),
        (format!("{prefix}.reset.w_state"), TensorView::M(&gru.u_reset)),
        (format!("{prefix}.reset.bias"), TensorView::V(&gru.b_reset)),
        (format!("{prefix}.cand.w_input"), TensorView::M(&gru.w_cand)),
        (format!("{prefix}.cand.w_state"), TensorView::M(&gru.u_cand)),
        (format!("{prefix}.cand.bias"), TensorView::V(&gru.b_cand)),
    ]
}

fn gru_views_mut(gru: &mut GruParams) -> Vec<TensorViewMut<'_>> {
    vec![
        TensorViewMut::M(&mut gru.w_update),
        TensorViewMut::M(&mut gru.u_update),
        TensorViewMut::V(&mut gru.b_update),
        TensorViewMut::M(&mut gru.w_reset),
        TensorViewMut::M(&mut gru.u_reset),
        TensorViewMut::V(&mut gru.b_reset),
        TensorViewMut::M(&mut gru.w_cand),
        TensorViewMut::M(&mut gru.u_cand),
        TensorViewMut::V(&mut gru.b_cand),
    ]
}

impl ModelParams {
    /// All tensors zeroed; also the gradient accumulator.
    pub fn zeros(dims: &Dims) -> Self {
        let e = dims.embed;
        let h = dims.hidden;
        let src_w = dims.src_embed_width();
        let name_rows = if dims.split_embedding { dims.vocab_names } else { 0 };
        let name_cols = if dims.split_embedding { e / 2 } else { 0 };
        let tgt_rows = if dims.tie_embeddings { 0 } else { dims.vocab_tgt };
        ModelParams {
            dims: dims.clone(),
            emb_src: Array2::zeros((dims.vocab_src, src_w)),
            emb_names: Array2::zeros((name_rows, name_cols)),
            emb_tgt: Array2::zeros((tgt_rows, e)),
            enc_fwd: GruParams::zeros(h, e),
            enc_bwd: GruParams::zeros(h, e),
            dec_word: GruParams::zeros(h, e),
            dec_context: GruParams::zeros(h, 2 * h),
            attn: AttentionParams {
                w_hidden: Array2::zeros((dims.attn_hidden, 3 * h)),
                b_hidden: Array1::zeros(dims.attn_hidden),
                w_score: Array2::zeros((1, dims.attn_hidden)),
                b_score: Array1::zeros(1),
            },
            out: OutputParams {
                w_hidden: Array2::zeros((dims.out_hidden, h + e + 2 * h)),
                b_hidden: Array1::zeros(dims.out_hidden),
                w_vocab: Array2::zeros((dims.vocab_tgt, dims.out_hidden)),
                b_vocab: Array1::zeros(dims.vocab_tgt),
            },
            init_w: Array2::zeros((h, h)),
            init_b: Array1::zeros(h),
        }
    }

    /// The target embedding table, honoring tied mode.
    pub fn target_embedding(&self) -> &Array2<f64> {
        if self.dims.tie_embeddings {
            &self.emb_src
        } else {
            &self.emb_tgt
        }
    }

    /// Named tensors in checkpoint order. Tables the mode disables (the
    /// name table outside split mode, the target table when tied) are
    /// omitted.
    pub(crate) fn named_views(&self) -> Vec<(String, TensorView<'_>)> {
        let mut views = vec![("emb_src".to_owned(), TensorView::M(&self.emb_src))];
        if self.dims.split_embedding {
            views.push(("emb_names".to_owned(), TensorView::M(&self.emb_names)));
        }
        if !self.dims.tie_embeddings {
            views.push(("emb_tgt".to_owned(), TensorView::M(&self.emb_tgt)));
        }
        views.extend(gru_views("enc_fwd", &self.enc_fwd));
        views.extend(gru_views("enc_bwd", &self.enc_bwd));
        views.extend(gru_views("dec_word", &self.dec_word));
        views.extend(gru_views("dec_context", &self.dec_context));
        views.push(("attn.w_hidden".to_owned(), TensorView::M(&self.attn.w_hidden)));
        views.push(("attn.b_hidden".to_owned(), TensorView::V(&self.attn.b_hidden)));
        views.push(("attn.w_score".to_owned(), TensorView::M(&self.attn.w_score)));
        views.push(("attn.b_score".to_owned(), TensorView::V(&self.attn.b_score)));
        views.push(("out.w_hidden".to_owned(), TensorView::M(&self.out.w_hidden)));
        views.push(("out.b_hidden".to_owned(), TensorView::V(&self.out.b_hidden)));
        views.push(("out.w_vocab".to_owned(), TensorView::M(&self.out.w_vocab)));
        views.push(("out.b_vocab".to_owned(), TensorView::V(&self.out.b_vocab)));
        views.push(("init.w".to_owned(), TensorView::M(&self.init_w)));
        views.push(("init.b".to_owned(), TensorView::V(&self.init_b)));
        views
    }

    /// Mutable views in exactly the order of [`Self::named_views`].
    pub(crate) fn views_mut(&mut self) -> Vec<TensorViewMut<'_>> {
        let mut views = vec![TensorViewMut::M(&mut self.emb_src)];
        if self.dims.split_embedding {
            views.push(TensorViewMut::M(&mut self.emb_names));
        }
        if !self.dims.tie_embeddings {
            views.push(TensorViewMut::M(&mut self.emb_tgt));
        }
        views.extend(gru_views_mut(&mut self.enc_fwd));
        views.extend(gru_views_mut(&mut self.enc_bwd));
        views.extend(gru_views_mut(&mut self.dec_word));
        views.extend(gru_views_mut(&mut self.dec_context));
        views.push(TensorViewMut::M(&mut self.attn.w_hidden));
        views.push(TensorViewMut::V(&mut self.attn.b_hidden));
        views.push(TensorViewMut::M(&mut self.attn.w_score));
        views.push(TensorViewMut::V(&mut self.attn.b_score));
        views.push(TensorViewMut::M(&mut self.out.w_hidden));
        views.push(TensorViewMut::V(&mut self.out.b_hidden));
        views.push(TensorViewMut::M(&mut self.out.w_vocab));
        views.push(TensorViewMut::V(&mut self.out.b_vocab));
        views.push(TensorViewMut::M(&mut self.init_w));
        views.push(TensorViewMut::V(&mut self.init_b));
        views
    }

    /// Total number of learnable coordinates.
    pub fn flat_len(&self) -> usize {
        self.named_views().iter().map(|(_, v)| v.as_slice().len()).sum()
    }

    /// All coordinates concatenated in tensor order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for (_, view) in self.named_views() {
            out.extend_from_slice(view.as_slice());
        }
        out
    }

    /// Inverse of [`Self::flatten`].
    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for mut view in self.views_mut() {
            let slice = view.as_slice_mut();
            slice.copy_from_slice(&flat[offset..offset + slice.len()]);
            offset += slice.len();
        }
        assert_eq!(offset, flat.len(), "flat length mismatch");
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn scaled_add(&mut self, alpha: f64, other: &ModelParams) {
        let other_views = other.named_views();
        for (mut view, (_, other_view)) in self.views_mut().into_iter().zip(other_views) {
            let dst = view.as_slice_mut();
            let src = other_view.as_slice();
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for mut view in self.views_mut() {
            for v in view.as_slice_mut() {
                *v *= alpha;
            }
        }
    }

    /// Euclidean norm over all coordinates.
    pub fn norm(&self) -> f64 {
        self.named_views()
            .iter()
            .map(|(_, v)| v.as_slice().iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.named_views()
            .iter()
            .all(|(_, v)| v.as_slice().iter().all(|x| x.is_finite()))
    }
}

/// Fresh parameters: matrices drawn uniform in ±sqrt(6 / (fan_in +
/// fan_out)), all bias vectors zero. Deterministic given the seed.
pub fn init_params(dims: &Dims, seed: u64) -> Result<ModelParams, ModelError> {
    dims.validate()?;
    let mut params = ModelParams::zeros(dims);
    let mut rng = crate::seed::rng(seed);
    for mut view in params.views_mut() {
        if let TensorViewMut::M(m) = &mut view {
            let (rows, cols) = m.dim();
            if rows == 0 || cols == 0 {
                continue;
            }
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            m.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
    }
    Ok(params)
}
