//! The SGD training loop: halving learning-rate schedule, per-epoch
//! corruption resampling, out-of-domain mixing, and the labeled/unlabeled
//! combinations for the supervised and semi-supervised setups.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::corruption::{corrupt, linearize_mr, CorruptionConfig, CorruptionError};
use crate::data::{bpe_apply, tokenize, BpeModel, LabeledExample, TokenSequence, Vocabulary};
use crate::model::{
    backward, init_params, save_checkpoint, CheckpointMeta, Dims, Gradients, ModelError,
    ModelParams, SourceIds,
};
use crate::seed;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Diverged { epoch: u32, batch: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Denoising reconstruction of unlabeled sentences.
    Unsupervised,
    /// Labeled slot data with split name/value embeddings.
    Supervised,
    /// Unlabeled reconstruction plus labeled pairs whose input is the
    /// concatenated slot values.
    SemiSupervised,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub initial_lr: f64,
    /// First epoch (1-based) that trains at a halved rate.
    pub lr_halving_start_epoch: u32,
    /// Epochs between successive halvings.
    pub lr_halving_period: u32,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
    pub corruption: CorruptionConfig,
    pub mode: TrainMode,
    /// Gradients are rescaled when their global norm exceeds this.
    pub grad_clip: f64,
    /// Worker threads for in-batch gradient evaluation. Results are
    /// reduced in a fixed order, so any value is bit-reproducible.
    pub jobs: usize,
    /// Optional cap on out-of-domain sentences mixed in per epoch.
    pub ood_cap_per_epoch: Option<usize>,
}

impl TrainConfig {
    pub fn new(corruption: CorruptionConfig, mode: TrainMode, epochs: u32) -> Self {
        TrainConfig {
            initial_lr: 0.5,
            lr_halving_start_epoch: 5,
            lr_halving_period: 2,
            epochs,
            batch_size: 1,
            seed: corruption.seed,
            corruption,
            mode,
            grad_clip: 5.0,
            jobs: 1,
            ood_cap_per_epoch: None,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if self.initial_lr <= 0.0 || self.initial_lr.is_nan() {
            return Err(TrainError::Config("initial_lr must be positive".into()));
        }
        self.corruption.validate()?;
        Ok(())
    }
}

/// Where training ended up: final parameters, last learning rate, and the
/// mean loss of every epoch.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub epoch: u32,
    pub params: ModelParams,
    pub lr: f64,
    pub loss_trace: Vec<f64>,
}

/// The learning rate for a 1-based epoch:
/// `initial * 2^-max(0, floor((epoch - start) / period) + 1)`.
/// Non-increasing; constant `initial` before `start`.
pub fn lr_schedule(config: &TrainConfig, epoch: u32) -> f64 {
    assert!(epoch >= 1, "epochs are 1-based");
    let start = i64::from(config.lr_halving_start_epoch);
    let period = i64::from(config.lr_halving_period.max(1));
    let halvings = ((i64::from(epoch) - start).div_euclid(period) + 1).max(0);
    config.initial_lr * 0.5f64.powi(halvings as i32)
}

/// A training input before id lookup: either plain words or slot-tagged
/// (name, value word) pairs for the split-embedding mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceTokens {
    Words(TokenSequence),
    SlotTagged(Vec<(String, String)>),
}

pub type TrainPair = (SourceTokens, TokenSequence);

/// Corrupts every sentence freshly for one epoch: input is the corrupted
/// sentence, target the clean one. The per-sentence RNG seed derives from
/// (global seed, epoch, sentence index), so epochs resample independently
/// and order is immaterial. Pairs whose corrupted input ends up empty
/// (possible only with a clamp allowing rates at 1) are dropped.
pub fn make_epoch_corpus(
    unlabeled: &[TokenSequence],
    corruption: &CorruptionConfig,
    epoch: u32,
    global_seed: u64,
) -> Vec<(TokenSequence, TokenSequence)> {
    unlabeled
        .iter()
        .enumerate()
        .filter_map(|(index, sentence)| {
            let mut rng = seed::rng(seed::derive_indexed(
                global_seed,
                "corrupt",
                &[u64::from(epoch), index as u64],
            ));
            let sample = corrupt(sentence, corruption, &mut rng);
            if sample.corrupted.is_empty() {
                None
            } else {
                Some((sample.corrupted, sentence.clone()))
            }
        })
        .collect()
}

/// Expands labeled examples into training pairs, one per (meaning
/// representation, reference) combination. Semi-supervised inputs are the
/// concatenated slot values (slot names dropped, boolean slots via the
/// linearization rule); supervised inputs keep the slot name on every
/// value word for the split embeddings.
pub fn make_labeled_pairs(
    labeled: &[LabeledExample],
    mode: TrainMode,
) -> Result<Vec<TrainPair>, TrainError> {
    let mut pairs = Vec::new();
    for example in labeled {
        let input = match mode {
            TrainMode::Unsupervised => {
                return Err(TrainError::Config(
                    "unsupervised mode takes no labeled pairs".into(),
                ))
            }
            TrainMode::SemiSupervised => SourceTokens::Words(linearize_mr(&example.mr)?),
            TrainMode::Supervised => {
                let mut tagged = Vec::new();
                for slot in &example.mr.slots {
                    for word in tokenize(&slot.value).iter() {
                        tagged.push((slot.name.clone(), word.clone()));
                    }
                }
                SourceTokens::SlotTagged(tagged)
            }
        };
        for reference in &example.references {
            pairs.push((input.clone(), reference.clone()));
        }
    }
    Ok(pairs)
}

/// The corpora and lookup tables training consumes. Vocabularies are over
/// subword pieces when `bpe` is present (corruption still operates on
/// surface words).
pub struct TrainData {
    pub in_domain: Vec<TokenSequence>,
    pub out_of_domain: Vec<TokenSequence>,
    pub labeled: Vec<LabeledExample>,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub name_vocab: Option<Vocabulary>,
    pub bpe: Option<BpeModel>,
}

fn encode_words(
    tokens: &TokenSequence,
    vocab: &Vocabulary,
    bpe: Option<&BpeModel>,
) -> Vec<usize> {
    match bpe {
        Some(model) => vocab.ids(&bpe_apply(model, tokens)),
        None => vocab.ids(tokens),
    }
}

fn to_id_pair(
    pair: &TrainPair,
    data: &TrainData,
) -> Result<(SourceIds, Vec<usize>), TrainError> {
    let src = match &pair.0 {
        SourceTokens::Words(tokens) => {
            SourceIds::Words(encode_words(tokens, &data.src_vocab, data.bpe.as_ref()))
        }
        SourceTokens::SlotTagged(tagged) => {
            let names = data
                .name_vocab
                .as_ref()
                .ok_or_else(|| TrainError::Config("supervised mode needs a name vocabulary".into()))?;
            SourceIds::SlotTagged(
                tagged
                    .iter()
                    .map(|(name, word)| (names.id(name), data.src_vocab.id(word)))
                    .collect(),
            )
        }
    };
    let tgt = encode_words(&pair.1, &data.tgt_vocab, data.bpe.as_ref());
    Ok((src, tgt))
}

fn epoch_pairs(
    config: &TrainConfig,
    data: &TrainData,
    epoch: u32,
) -> Result<Vec<TrainPair>, TrainError> {
    let mut pairs: Vec<TrainPair> = Vec::new();
    if matches!(config.mode, TrainMode::Unsupervised | TrainMode::SemiSupervised) {
        let mut unlabeled: Vec<TokenSequence> = data.in_domain.clone();
        let mut ood: Vec<TokenSequence> = data.out_of_domain.clone();
        if let Some(cap) = config.ood_cap_per_epoch {
            if ood.len() > cap {
                let mut rng =
                    seed::rng(seed::derive_indexed(config.seed, "ood-cap", &[u64::from(epoch)]));
                ood.shuffle(&mut rng);
                ood.truncate(cap);
            }
        }
        unlabeled.extend(ood);
        pairs.extend(
            make_epoch_corpus(&unlabeled, &config.corruption, epoch, config.seed)
                .into_iter()
                .map(|(input, target)| (SourceTokens::Words(input), target)),
        );
    }
    if matches!(config.mode, TrainMode::Supervised | TrainMode::SemiSupervised) {
        // A meaning representation of omitted boolean slots can linearize
        // to nothing; such pairs carry no input signal and are dropped.
        pairs.extend(
            make_labeled_pairs(&data.labeled, config.mode)?
                .into_iter()
                .filter(|(input, _)| match input {
                    SourceTokens::Words(t) => !t.is_empty(),
                    SourceTokens::SlotTagged(t) => !t.is_empty(),
                }),
        );
    }
    let mut rng = seed::rng(seed::derive_indexed(config.seed, "order", &[u64::from(epoch)]));
    pairs.shuffle(&mut rng);
    Ok(pairs)
}

fn batch_gradients(
    params: &ModelParams,
    batch: &[(SourceIds, Vec<usize>)],
    jobs: usize,
) -> Result<(f64, Gradients), ModelError> {
    let results: Vec<Result<(f64, Gradients), ModelError>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| {
            batch
                .par_iter()
                .map(|(src, tgt)| backward(params, src, tgt))
                .collect()
        })
    } else {
        batch.iter().map(|(src, tgt)| backward(params, src, tgt)).collect()
    };
    // Reduce in batch order regardless of worker scheduling.
    let mut total = Gradients::zeros(&params.dims);
    let mut loss = 0.0;
    for result in results {
        let (pair_loss, grads) = result?;
        loss += pair_loss;
        total.scaled_add(1.0, &grads);
    }
    let scale = 1.0 / batch.len() as f64;
    total.scale(scale);
    Ok((loss * scale, total))
}

/// Runs the full training loop. Parameters are initialized from the
/// config seed; each epoch rebuilds the corpus (resampling corruption),
/// shuffles it, sweeps minibatches with plain SGD, records the mean loss,
/// and writes a checkpoint when a directory is given. `on_epoch` receives
/// (epoch, learning rate, mean loss) as epochs finish.
pub fn train(
    config: &TrainConfig,
    dims: &Dims,
    data: &TrainData,
    checkpoint_dir: Option<&Path>,
    checkpoint_meta: &CheckpointMeta,
    mut on_epoch: impl FnMut(u32, f64, f64),
) -> Result<TrainState, TrainError> {
    config.validate()?;
    dims.validate().map_err(TrainError::Model)?;
    if dims.vocab_src != data.src_vocab.len() {
        return Err(TrainError::Config(format!(
            "dims.vocab_src = {} but the source vocabulary has {} entries",
            dims.vocab_src,
            data.src_vocab.len()
        )));
    }
    if dims.vocab_tgt != data.tgt_vocab.len() {
        return Err(TrainError::Config(format!(
            "dims.vocab_tgt = {} but the target vocabulary has {} entries",
            dims.vocab_tgt,
            data.tgt_vocab.len()
        )));
    }
    match config.mode {
        TrainMode::Unsupervised | TrainMode::SemiSupervised => {
            if data.in_domain.is_empty() {
                return Err(TrainError::Config(
                    "unsupervised training needs an in-domain corpus".into(),
                ));
            }
        }
        TrainMode::Supervised => {}
    }
    if matches!(config.mode, TrainMode::Supervised | TrainMode::SemiSupervised)
        && data.labeled.is_empty()
    {
        return Err(TrainError::Config("this mode needs labeled examples".into()));
    }

    let mut params = init_params(dims, seed::derive(config.seed, "init"))?;
    let mut loss_trace = Vec::with_capacity(config.epochs as usize);
    let mut lr = config.initial_lr;

    for epoch in 1..=config.epochs {
        lr = lr_schedule(config, epoch);
        let pairs = epoch_pairs(config, data, epoch)?;
        let id_pairs: Vec<(SourceIds, Vec<usize>)> = pairs
            .iter()
            .map(|pair| to_id_pair(pair, data))
            .collect::<Result<_, _>>()?;

        let mut epoch_loss = 0.0;
        for (batch_ix, batch) in id_pairs.chunks(config.batch_size).enumerate() {
            let (batch_loss, mut grads) = batch_gradients(&params, batch, config.jobs)?;
            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged { epoch, batch: batch_ix });
            }
            let norm = grads.norm();
            if norm > config.grad_clip {
                grads.scale(config.grad_clip / norm);
            }
            params.scaled_add(-lr, &grads);
            epoch_loss += batch_loss * batch.len() as f64;
        }
        let mean_loss = epoch_loss / id_pairs.len().max(1) as f64;
        loss_trace.push(mean_loss);
        on_epoch(epoch, lr, mean_loss);

        if let Some(dir) = checkpoint_dir {
            let path = dir.join(format!("checkpoint-epoch-{epoch:03}.ckpt"));
            save_checkpoint(&params, checkpoint_meta, &path)?;
        }
    }

    Ok(TrainState { epoch: config.epochs, params, lr, loss_trace })
}
