use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use daegen_core::corruption::{corrupt, BooleanNoPolicy, CorruptionConfig};
use daegen_core::data::{
    build_vocabulary, bpe_apply, bpe_train, filter_by_length, read_corpus, read_labeled_csv,
    tokenize, BpeModel, LabeledExample, TokenSequence, Vocabulary,
};
use daegen_core::decode::{DecodeConfig, Generator};
use daegen_core::eval::{
    approximate_randomization, per_instance_scores, score_corpus, EvalInstance, PairedMetric,
};
use daegen_core::model::{load_checkpoint, CheckpointMeta, Dims};
use daegen_core::seed;
use daegen_core::training::{train, TrainConfig, TrainData, TrainMode};

use crate::config::{pick, pick_opt, FileConfig};
use crate::errors::CliError;

#[derive(Parser)]
#[command(
    name = "daegen",
    version,
    about = "Denoising-autoencoder text generation from structured slot data"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize and length-filter a corpus, learn subword merges, and
    /// write vocabulary and count tables
    Prepare(PrepareArgs),
    /// Show corrupted training inputs for a corpus (TSV: original,
    /// corrupted, sampled rate)
    Corrupt(CorruptArgs),
    /// Train the sequence autoencoder
    Train(TrainArgs),
    /// Generate text from meaning representations with a trained model
    Generate(GenerateArgs),
    /// Score hypotheses against multi-reference sets (BLEU, ROUGE-L, NIST)
    Evaluate(EvaluateArgs),
    /// Approximate-randomization significance test between two systems
    Significance(SignificanceArgs),
    /// prepare + train + generate + evaluate in one run
    Pipeline(PipelineArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare(args) => prepare(&args),
        Command::Corrupt(args) => corrupt_cmd(&args),
        Command::Train(args) => train_cmd(&args),
        Command::Generate(args) => generate_cmd(&args),
        Command::Evaluate(args) => evaluate_cmd(&args),
        Command::Significance(args) => significance_cmd(&args),
        Command::Pipeline(args) => pipeline_cmd(&args),
    }
}

// ---------------------------------------------------------------- shared

#[derive(Args, Clone, Default)]
struct CorruptionFlags {
    /// Mean of the Gaussian deletion-rate distribution [default: 0.6]
    #[arg(long)]
    rate_mean: Option<f64>,
    /// Variance of the deletion-rate distribution [default: 0.1]
    #[arg(long)]
    rate_variance: Option<f64>,
    /// Lower clamp for sampled deletion rates [default: 0.05]
    #[arg(long)]
    clamp_low: Option<f64>,
    /// Upper clamp for sampled deletion rates [default: 0.95]
    #[arg(long)]
    clamp_high: Option<f64>,
    /// Only words with corpus count above this may be deleted
    /// [default: 100]
    #[arg(long)]
    threshold: Option<u64>,
    /// Disable the bigram-preserving shuffle heuristic [default: enabled]
    #[arg(long)]
    no_shuffle: bool,
    /// Disable the frequency-threshold heuristic (delete any word)
    /// [default: enabled]
    #[arg(long)]
    no_freq_filter: bool,
}

impl CorruptionFlags {
    fn build(&self, file: &FileConfig, counts: Arc<Vocabulary>, root_seed: u64) -> CorruptionConfig {
        let mut config = CorruptionConfig::new(counts);
        config.rate_mean = pick(self.rate_mean, file.rate_mean, 0.6);
        config.rate_variance = pick(self.rate_variance, file.rate_variance, 0.1);
        config.rate_clamp = (
            pick(self.clamp_low, file.clamp_low, 0.05),
            pick(self.clamp_high, file.clamp_high, 0.95),
        );
        config.count_threshold = pick(self.threshold, file.threshold, 100);
        config.enable_shuffle = !(self.no_shuffle || file.no_shuffle.unwrap_or(false));
        config.enable_frequency_filter =
            !(self.no_freq_filter || file.no_freq_filter.unwrap_or(false));
        config.seed = seed::derive(root_seed, "corruption");
        config
    }
}

#[derive(Args, Clone, Default)]
struct DecodeFlags {
    /// Beam width [default: 5]
    #[arg(long)]
    beam: Option<usize>,
    /// Maximum generated length in tokens [default: 60]
    #[arg(long)]
    max_len: Option<usize>,
    /// Rank hypotheses by per-token log-probability [default: off]
    #[arg(long)]
    length_normalization: bool,
}

impl DecodeFlags {
    fn build(&self, file: &FileConfig) -> DecodeConfig {
        DecodeConfig {
            beam_size: pick(self.beam, file.beam_size, 5),
            max_len: pick(self.max_len, file.max_len, 60),
            length_normalization: self.length_normalization
                || file.length_normalization.unwrap_or(false),
        }
    }
}

fn parse_boolean_no(flag: Option<&str>, file: &FileConfig) -> Result<BooleanNoPolicy, CliError> {
    let value = flag.map(str::to_owned).or_else(|| file.boolean_no.clone());
    match value.as_deref() {
        None | Some("omit") => Ok(BooleanNoPolicy::Omit),
        Some("negated-name") => Ok(BooleanNoPolicy::NegatedName),
        Some(other) => Err(CliError::Usage(format!(
            "--boolean-no must be 'omit' or 'negated-name', got '{other}'"
        ))),
    }
}

fn sha256_hex(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn read_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    Vocabulary::read(path)
        .map_err(|e| CliError::Data(format!("vocabulary {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

// --------------------------------------------------------------- prepare

#[derive(Args)]
struct PrepareArgs {
    /// Raw corpus: UTF-8, one sentence per line
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for the prepared artifacts
    #[arg(long)]
    out_dir: PathBuf,
    /// Drop sentences longer than this many tokens [default: 60]
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Learn this many byte-pair merges and emit a subword corpus
    /// (0 = character-level; bare flag = 2000; omit to skip subword
    /// encoding entirely)
    #[arg(long, num_args = 0..=1, default_missing_value = "2000")]
    bpe_merges: Option<usize>,
    /// Keep only the most frequent tokens in the model vocabulary
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Labeled CSV (header mr,ref) to validate and copy alongside
    #[arg(long)]
    labeled: Option<PathBuf>,
    /// Root random seed recorded in the manifest [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config file (flags override its values)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct Manifest {
    tool_version: String,
    seed: u64,
    options: ManifestOptions,
    input_hashes: BTreeMap<String, String>,
    output_hashes: BTreeMap<String, String>,
}

#[derive(serde::Serialize)]
struct ManifestOptions {
    max_tokens: usize,
    bpe_merges: Option<usize>,
    vocab_size: Option<usize>,
}

fn prepare(args: &PrepareArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let max_tokens = pick(args.max_tokens, file.max_tokens, 60);
    let bpe_merges = pick_opt(args.bpe_merges, file.bpe_merges);
    let vocab_size = pick_opt(args.vocab_size, file.vocab_size);
    let root_seed = pick(args.seed, file.seed, 0);
    if max_tokens == 0 {
        return Err(CliError::Usage("--max-tokens must be at least 1".into()));
    }

    fs::create_dir_all(&args.out_dir)?;
    let word_corpus = filter_by_length(read_corpus(&args.corpus)?, max_tokens);
    if word_corpus.is_empty() {
        return Err(CliError::Data(format!(
            "corpus {} has no sentences within the length limit",
            args.corpus.display()
        )));
    }

    let corpus_path = args.out_dir.join("corpus.txt");
    let mut corpus_text = String::new();
    for sentence in &word_corpus {
        corpus_text.push_str(&sentence.joined());
        corpus_text.push('\n');
    }
    write_text(&corpus_path, &corpus_text)?;

    // Word-level counts drive the deletion threshold even when the model
    // vocabulary is over subword pieces.
    let counts = build_vocabulary(&word_corpus, None);
    let counts_path = args.out_dir.join("counts.tsv");
    counts.write(&counts_path)?;

    let mut outputs: Vec<PathBuf> = vec![corpus_path.clone(), counts_path.clone()];
    let vocab_path = args.out_dir.join("vocab.tsv");
    match bpe_merges {
        Some(merges) => {
            let bpe = bpe_train(&word_corpus, merges);
            let bpe_path = args.out_dir.join("bpe.txt");
            bpe.write(&bpe_path)?;
            let piece_corpus: Vec<TokenSequence> =
                word_corpus.iter().map(|s| bpe_apply(&bpe, s)).collect();
            let pieces_path = args.out_dir.join("corpus.bpe.txt");
            let mut text = String::new();
            for sentence in &piece_corpus {
                text.push_str(&sentence.joined());
                text.push('\n');
            }
            write_text(&pieces_path, &text)?;
            build_vocabulary(&piece_corpus, vocab_size).write(&vocab_path)?;
            outputs.push(bpe_path);
            outputs.push(pieces_path);
        }
        None => {
            build_vocabulary(&word_corpus, vocab_size).write(&vocab_path)?;
        }
    }
    outputs.push(vocab_path);

    let mut input_hashes = BTreeMap::new();
    input_hashes.insert("corpus".to_owned(), sha256_hex(&args.corpus)?);
    if let Some(labeled) = &args.labeled {
        // Validate every row before copying it along.
        read_labeled_csv(labeled)?;
        let dest = args.out_dir.join("labeled.csv");
        fs::copy(labeled, &dest)?;
        input_hashes.insert("labeled".to_owned(), sha256_hex(labeled)?);
        outputs.push(dest);
    }

    let mut output_hashes = BTreeMap::new();
    for path in &outputs {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        output_hashes.insert(name, sha256_hex(path)?);
    }

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: root_seed,
        options: ManifestOptions { max_tokens, bpe_merges, vocab_size },
        input_hashes,
        output_hashes,
    };
    write_text(
        &args.out_dir.join("manifest.json"),
        &format!("{}\n", serde_json::to_string_pretty(&manifest)?),
    )?;
    Ok(())
}

// --------------------------------------------------------------- corrupt

#[derive(Args)]
struct CorruptArgs {
    /// Corpus to corrupt (one sentence per line)
    #[arg(long)]
    corpus: PathBuf,
    /// Word-count table (vocabulary file) for the frequency threshold
    #[arg(long)]
    counts: PathBuf,
    /// Output TSV path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    corruption: CorruptionFlags,
    /// TOML config file (flags override its values)
    #[arg(long)]
    config: Option<PathBuf>,
}

fn corrupt_cmd(args: &CorruptArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let root_seed = pick(args.seed, file.seed, 0);
    let counts = Arc::new(read_vocab(&args.counts)?);
    let config = args.corruption.build(&file, counts, root_seed);
    config.validate()?;

    let corpus = read_corpus(&args.corpus)?;
    let mut out = String::new();
    for (index, sentence) in corpus.iter().enumerate() {
        let mut rng = seed::rng(seed::derive_indexed(config.seed, "corrupt", &[0, index as u64]));
        let sample = corrupt(sentence, &config, &mut rng);
        out.push_str(&format!(
            "{}\t{}\t{:.6}\n",
            sample.original.joined(),
            sample.corrupted.joined(),
            sample.sampled_rate
        ));
    }
    match &args.out {
        Some(path) => write_text(path, &out)?,
        None => {
            std::io::stdout().write_all(out.as_bytes())?;
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- train

#[derive(Args)]
struct TrainArgs {
    /// Training objective: unsupervised, supervised, or semi-supervised
    /// [default: unsupervised]
    #[arg(long)]
    mode: Option<String>,
    /// In-domain unlabeled corpus (tokenized, from `prepare`)
    #[arg(long)]
    ind_corpus: Option<PathBuf>,
    /// Out-of-domain unlabeled corpus, mixed in as extra examples
    #[arg(long)]
    ood_corpus: Option<PathBuf>,
    /// Labeled CSV (header mr,ref) for the supervised modes
    #[arg(long)]
    labeled: Option<PathBuf>,
    /// Model vocabulary file (source and target)
    #[arg(long)]
    vocab: PathBuf,
    /// Where deletion-threshold counts come from: ind, ood, or file
    /// [default: ind]
    #[arg(long)]
    counts_from: Option<String>,
    /// Count table when --counts-from file
    #[arg(long)]
    counts_file: Option<PathBuf>,
    /// Subword merges file from `prepare` (when the corpus was encoded)
    #[arg(long)]
    bpe: Option<PathBuf>,
    /// Number of epochs [default: 10]
    #[arg(long)]
    epochs: Option<u32>,
    /// Sentences per SGD update [default: 1]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Root random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for per-epoch checkpoints
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Hidden state size [default: 64; published setup: 1024]
    #[arg(long)]
    hidden: Option<usize>,
    /// Word embedding size [default: 32; published setup: 620]
    #[arg(long)]
    embed: Option<usize>,
    /// Attention net hidden width [default: same as --hidden]
    #[arg(long)]
    attn_hidden: Option<usize>,
    /// Output net hidden width [default: same as --embed]
    #[arg(long)]
    out_hidden: Option<usize>,
    /// Share one embedding table between source and target [default: off]
    #[arg(long)]
    tie_embeddings: bool,
    /// Initial SGD learning rate [default: 0.5]
    #[arg(long)]
    lr: Option<f64>,
    /// First epoch trained at a halved rate [default: 5]
    #[arg(long)]
    lr_halving_start: Option<u32>,
    /// Epochs between halvings [default: 2]
    #[arg(long)]
    lr_halving_period: Option<u32>,
    /// Clip gradients to this global norm [default: 5]
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Cap on out-of-domain sentences mixed in per epoch
    #[arg(long)]
    ood_cap: Option<usize>,
    /// Worker threads per batch [default: 1]
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    corruption: CorruptionFlags,
    /// TOML config file (flags override its values)
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_mode(flag: Option<&str>, file: &FileConfig) -> Result<TrainMode, CliError> {
    let value = flag.map(str::to_owned).or_else(|| file.mode.clone());
    match value.as_deref() {
        None | Some("unsupervised") => Ok(TrainMode::Unsupervised),
        Some("supervised") => Ok(TrainMode::Supervised),
        Some("semi-supervised") | Some("semi_supervised") => Ok(TrainMode::SemiSupervised),
        Some(other) => Err(CliError::Usage(format!(
            "--mode must be unsupervised, supervised, or semi-supervised, got '{other}'"
        ))),
    }
}

/// Slot names become atomic vocabulary entries (they may contain spaces).
fn name_vocabulary(labeled: &[LabeledExample]) -> Vocabulary {
    let names: Vec<TokenSequence> = labeled
        .iter()
        .flat_map(|ex| ex.mr.slots.iter().map(|s| TokenSequence::new(vec![s.name.clone()])))
        .collect();
    build_vocabulary(&names, None)
}

struct TrainSetup {
    config: TrainConfig,
    dims: Dims,
    data: TrainData,
    meta: CheckpointMeta,
}

fn build_train_setup(args: &TrainArgs, file: &FileConfig) -> Result<TrainSetup, CliError> {
    let mode = parse_mode(args.mode.as_deref(), file)?;
    let root_seed = pick(args.seed, file.seed, 0);

    let ind = match &args.ind_corpus {
        Some(path) => read_corpus(path)?,
        None => Vec::new(),
    };
    let ood = match &args.ood_corpus {
        Some(path) => read_corpus(path)?,
        None => Vec::new(),
    };
    let labeled = match &args.labeled {
        Some(path) => read_labeled_csv(path)?,
        None => Vec::new(),
    };
    match mode {
        TrainMode::Unsupervised | TrainMode::SemiSupervised if args.ind_corpus.is_none() => {
            return Err(CliError::Usage("this mode requires --ind-corpus".into()));
        }
        TrainMode::Supervised | TrainMode::SemiSupervised if args.labeled.is_none() => {
            return Err(CliError::Usage("this mode requires --labeled".into()));
        }
        _ => {}
    }

    let counts_from = args
        .counts_from
        .clone()
        .or_else(|| file.counts_from.clone())
        .unwrap_or_else(|| "ind".to_owned());
    let counts = match counts_from.as_str() {
        "ind" => build_vocabulary(&ind, None),
        "ood" => {
            if ood.is_empty() {
                return Err(CliError::Usage(
                    "--counts-from ood requires --ood-corpus".into(),
                ));
            }
            build_vocabulary(&ood, None)
        }
        "file" => {
            let path = args.counts_file.as_ref().ok_or_else(|| {
                CliError::Usage("--counts-from file requires --counts-file".into())
            })?;
            read_vocab(path)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "--counts-from must be ind, ood, or file, got '{other}'"
            )))
        }
    };

    let vocab = read_vocab(&args.vocab)?;
    let bpe = match &args.bpe {
        Some(path) => Some(BpeModel::read(path)?),
        None => None,
    };

    let corruption = args.corruption.build(file, Arc::new(counts), root_seed);
    corruption.validate()?;
    let mut config = TrainConfig::new(corruption, mode, pick(args.epochs, file.epochs, 10));
    config.seed = root_seed;
    config.batch_size = pick(args.batch_size, file.batch_size, 1);
    config.initial_lr = pick(args.lr, file.lr, 0.5);
    config.lr_halving_start_epoch = pick(args.lr_halving_start, file.lr_halving_start, 5);
    config.lr_halving_period = pick(args.lr_halving_period, file.lr_halving_period, 2);
    config.grad_clip = pick(args.grad_clip, file.grad_clip, 5.0);
    config.jobs = pick(args.jobs, file.jobs, 1);
    config.ood_cap_per_epoch = pick_opt(args.ood_cap, file.ood_cap);

    let hidden = pick(args.hidden, file.hidden, 64);
    let embed = pick(args.embed, file.embed, 32);
    let mut dims = Dims::new(vocab.len(), vocab.len(), embed, hidden);
    dims.attn_hidden = pick(args.attn_hidden, file.attn_hidden, hidden);
    dims.out_hidden = pick(args.out_hidden, file.out_hidden, embed);
    dims.tie_embeddings = args.tie_embeddings || file.tie_embeddings.unwrap_or(false);

    let name_vocab = if mode == TrainMode::Supervised {
        let names = name_vocabulary(&labeled);
        dims.split_embedding = true;
        dims.vocab_names = names.len();
        if !embed.is_multiple_of(2) {
            return Err(CliError::Usage(
                "supervised mode splits the embedding; --embed must be even".into(),
            ));
        }
        Some(names)
    } else {
        None
    };

    let mut meta = CheckpointMeta::default();
    let vocab_hash = sha256_hex(&args.vocab)?;
    meta.vocab_hashes.insert("src_vocab".to_owned(), vocab_hash.clone());
    meta.vocab_hashes.insert("tgt_vocab".to_owned(), vocab_hash);
    if let Some(path) = &args.bpe {
        meta.vocab_hashes.insert("bpe".to_owned(), sha256_hex(path)?);
    }

    Ok(TrainSetup {
        config,
        dims,
        data: TrainData {
            in_domain: ind,
            out_of_domain: ood,
            labeled,
            src_vocab: vocab.clone(),
            tgt_vocab: vocab,
            name_vocab,
            bpe,
        },
        meta,
    })
}

fn train_cmd(args: &TrainArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let mut setup = build_train_setup(args, &file)?;
    if let Some(dir) = &args.checkpoint_dir {
        fs::create_dir_all(dir)?;
        // Split-embedding checkpoints need the slot-name vocabulary at
        // generation time; it lives next to them, hash-bound like the
        // word vocabularies.
        if let Some(names) = &setup.data.name_vocab {
            let path = dir.join("names.tsv");
            names.write(&path)?;
            setup.meta.vocab_hashes.insert("names_vocab".to_owned(), sha256_hex(&path)?);
        }
    }
    train(
        &setup.config,
        &setup.dims,
        &setup.data,
        args.checkpoint_dir.as_deref(),
        &setup.meta,
        |epoch, lr, loss| println!("{epoch}\t{lr}\t{loss:.6}"),
    )?;
    Ok(())
}

// -------------------------------------------------------------- generate

#[derive(Args)]
struct GenerateArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// Model vocabulary file (must match the checkpoint's hash)
    #[arg(long)]
    vocab: PathBuf,
    /// Slot-name vocabulary (supervised checkpoints)
    #[arg(long)]
    names_vocab: Option<PathBuf>,
    /// Subword merges file, when training used one
    #[arg(long)]
    bpe: Option<PathBuf>,
    /// CSV with an `mr` column; one sentence is generated per row
    #[arg(long)]
    mrs: PathBuf,
    /// Collapse duplicate meaning representations (first occurrence wins)
    #[arg(long)]
    unique: bool,
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the K best hypotheses per input as TSV rank/score/text
    #[arg(long)]
    nbest: Option<usize>,
    /// Verbalization of boolean "no" slots: omit or negated-name
    /// [default: omit]
    #[arg(long)]
    boolean_no: Option<String>,
    #[command(flatten)]
    decode: DecodeFlags,
    /// TOML config file (flags override its values)
    #[arg(long)]
    config: Option<PathBuf>,
}

fn read_mr_column(path: &Path, unique: bool) -> Result<Vec<String>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::Data(e.to_string()))?.clone();
    let mr_ix = headers
        .iter()
        .position(|h| h.trim() == "mr")
        .ok_or_else(|| CliError::Data(format!("{} lacks an 'mr' column", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        let mr = record
            .get(mr_ix)
            .ok_or_else(|| CliError::Data("short CSV record".into()))?
            .to_owned();
        if !unique || !out.contains(&mr) {
            out.push(mr);
        }
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("{} contains no rows", path.display())));
    }
    Ok(out)
}

fn verify_hash(
    meta: &CheckpointMeta,
    key: &str,
    path: &Path,
) -> Result<(), CliError> {
    if let Some(expected) = meta.vocab_hashes.get(key) {
        let actual = sha256_hex(path)?;
        if &actual != expected {
            return Err(CliError::Data(format!(
                "{} does not match the checkpoint's {key} hash ({actual} != {expected})",
                path.display()
            )));
        }
    }
    Ok(())
}

fn load_generator(args: &GenerateArgs, file: &FileConfig) -> Result<Generator, CliError> {
    let (params, meta) = load_checkpoint(&args.checkpoint)?;
    verify_hash(&meta, "src_vocab", &args.vocab)?;
    verify_hash(&meta, "tgt_vocab", &args.vocab)?;
    match (&args.bpe, meta.vocab_hashes.contains_key("bpe")) {
        (Some(bpe_path), true) => verify_hash(&meta, "bpe", bpe_path)?,
        (None, true) => {
            return Err(CliError::Usage(
                "the checkpoint was trained with subword encoding; pass --bpe".into(),
            ))
        }
        (Some(_), false) => {
            return Err(CliError::Usage(
                "the checkpoint was trained without subword encoding; drop --bpe".into(),
            ))
        }
        (None, false) => {}
    }
    if let Some(names_path) = &args.names_vocab {
        verify_hash(&meta, "names_vocab", names_path)?;
    }
    let vocab = read_vocab(&args.vocab)?;
    if vocab.len() != params.dims.vocab_src {
        return Err(CliError::Data(format!(
            "vocabulary has {} entries but the checkpoint expects {}",
            vocab.len(),
            params.dims.vocab_src
        )));
    }
    let name_vocab = match &args.names_vocab {
        Some(path) => Some(read_vocab(path)?),
        None => None,
    };
    if params.dims.split_embedding && name_vocab.is_none() {
        return Err(CliError::Usage(
            "this checkpoint uses split embeddings; pass --names-vocab".into(),
        ));
    }
    let bpe = match &args.bpe {
        Some(path) => Some(BpeModel::read(path)?),
        None => None,
    };
    Ok(Generator {
        params,
        src_vocab: vocab.clone(),
        tgt_vocab: vocab,
        name_vocab,
        bpe,
        config: args.decode.build(file),
        boolean_no: parse_boolean_no(args.boolean_no.as_deref(), file)?,
    })
}

fn generate_cmd(args: &GenerateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let generator = load_generator(args, &file)?;
    let mrs = read_mr_column(&args.mrs, args.unique)?;

    let mut out = String::new();
    let mut unfinished = 0usize;
    for (ix, mr_text) in mrs.iter().enumerate() {
        let mr = daegen_core::data::parse_mr(mr_text)?;
        match args.nbest {
            None => {
                let (text, finished) = generator.generate_with_flag(&mr)?;
                if !finished {
                    unfinished += 1;
                }
                out.push_str(&text);
                out.push('\n');
            }
            Some(k) => {
                if ix > 0 {
                    out.push('\n');
                }
                for (rank, (score, finished, text)) in
                    generator.nbest(&mr, k)?.into_iter().enumerate()
                {
                    if !finished {
                        unfinished += 1;
                    }
                    out.push_str(&format!("{}\t{score:.6}\t{text}\n", rank + 1));
                }
            }
        }
    }
    if unfinished > 0 {
        eprintln!("warning: {unfinished} hypotheses hit the length limit before finishing");
    }
    match &args.out {
        Some(path) => write_text(path, &out)?,
        None => std::io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}

// -------------------------------------------------------------- evaluate

#[derive(Args)]
struct EvaluateArgs {
    /// Hypotheses, one per line
    #[arg(long)]
    hyp: PathBuf,
    /// References grouped per instance, groups separated by blank lines
    #[arg(long)]
    refs: PathBuf,
    /// Write the n-gram audit report as JSON to this path
    #[arg(long)]
    audit: Option<PathBuf>,
}

fn read_reference_groups(path: &Path) -> Result<Vec<Vec<TokenSequence>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut groups = Vec::new();
    let mut current: Vec<TokenSequence> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                groups.push(std::mem::take(&mut current));
            }
        } else {
            current.push(tokenize(line));
        }
    }
    if !current.is_empty() {
        groups.push(current);
    }
    Ok(groups)
}

fn load_instances(hyp: &Path, refs: &Path) -> Result<Vec<EvalInstance>, CliError> {
    let hyp_text = fs::read_to_string(hyp)
        .map_err(|e| CliError::Data(format!("{}: {e}", hyp.display())))?;
    let hypotheses: Vec<TokenSequence> = hyp_text.lines().map(tokenize).collect();
    let groups = read_reference_groups(refs)?;
    if hypotheses.len() != groups.len() {
        return Err(CliError::Data(format!(
            "{} hypotheses but {} reference groups",
            hypotheses.len(),
            groups.len()
        )));
    }
    hypotheses
        .into_iter()
        .zip(groups)
        .map(|(h, g)| EvalInstance::new(h, g).map_err(CliError::from))
        .collect()
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<(), CliError> {
    let instances = load_instances(&args.hyp, &args.refs)?;
    let report = score_corpus(&instances)?;
    if report.audit.nist.empty_hypotheses {
        eprintln!("warning: every hypothesis is empty; scores are zero");
    }
    println!("{:.6}\t{:.6}\t{:.4}", report.bleu, report.rouge_l, report.nist);
    eprintln!(
        "BLEU = {:.2}  ROUGE_L = {:.2}  NIST = {:.3}  ({} instances)",
        100.0 * report.bleu,
        100.0 * report.rouge_l,
        report.nist,
        instances.len()
    );
    if let Some(path) = &args.audit {
        write_text(path, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
    }
    Ok(())
}

// ---------------------------------------------------------- significance

#[derive(Args)]
struct SignificanceArgs {
    /// Hypotheses of system A, one per line
    #[arg(long)]
    a: PathBuf,
    /// Hypotheses of system B, one per line
    #[arg(long)]
    b: PathBuf,
    /// Shared references (same format as `evaluate --refs`)
    #[arg(long)]
    refs: PathBuf,
    /// Per-item score: bleu (smoothed sentence BLEU) or rouge_l
    #[arg(long)]
    metric: String,
    /// Randomization rounds [default: 10000]
    #[arg(long)]
    rounds: Option<usize>,
    /// Random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

fn significance_cmd(args: &SignificanceArgs) -> Result<(), CliError> {
    let metric = match args.metric.as_str() {
        "bleu" => PairedMetric::Bleu,
        "rouge_l" => PairedMetric::RougeL,
        other => {
            return Err(CliError::Usage(format!(
                "--metric must be bleu or rouge_l, got '{other}'"
            )))
        }
    };
    let instances_a = load_instances(&args.a, &args.refs)?;
    let instances_b = load_instances(&args.b, &args.refs)?;
    let scores_a = per_instance_scores(&instances_a, metric);
    let scores_b = per_instance_scores(&instances_b, metric);
    let p = approximate_randomization(
        &scores_a,
        &scores_b,
        args.rounds.unwrap_or(10_000),
        args.seed.unwrap_or(0),
    )?;
    println!("{p:.6}");
    Ok(())
}

// -------------------------------------------------------------- pipeline

#[derive(Args)]
struct PipelineArgs {
    /// Raw in-domain corpus (one sentence per line)
    #[arg(long)]
    corpus: PathBuf,
    /// Labeled CSV (header mr,ref); used for generation and scoring, and
    /// for training in the supervised modes. Without it the pipeline
    /// stops after training.
    #[arg(long)]
    labeled: Option<PathBuf>,
    /// Raw out-of-domain corpus, mixed into training
    #[arg(long)]
    ood_corpus: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out_dir: PathBuf,
    /// Training objective [default: unsupervised]
    #[arg(long)]
    mode: Option<String>,
    /// Number of epochs [default: 10]
    #[arg(long)]
    epochs: Option<u32>,
    /// Sentences per SGD update [default: 1]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Root random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden state size [default: 64]
    #[arg(long)]
    hidden: Option<usize>,
    /// Word embedding size [default: 32]
    #[arg(long)]
    embed: Option<usize>,
    /// Drop sentences longer than this many tokens [default: 60]
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Learn this many byte-pair merges during preparation
    #[arg(long)]
    bpe_merges: Option<usize>,
    /// Initial SGD learning rate [default: 0.5]
    #[arg(long)]
    lr: Option<f64>,
    /// First epoch trained at a halved rate [default: 5]
    #[arg(long)]
    lr_halving_start: Option<u32>,
    /// Epochs between halvings [default: 2]
    #[arg(long)]
    lr_halving_period: Option<u32>,
    /// Worker threads per batch [default: 1]
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    corruption: CorruptionFlags,
    #[command(flatten)]
    decode: DecodeFlags,
    /// TOML config file (flags override its values)
    #[arg(long)]
    config: Option<PathBuf>,
}

fn pipeline_cmd(args: &PipelineArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let epochs = pick(args.epochs, file.epochs, 10);
    if epochs == 0 {
        return Err(CliError::Usage("the pipeline needs --epochs >= 1".into()));
    }
    let mode = parse_mode(args.mode.as_deref(), &file)?;
    if args.labeled.is_none() && mode != TrainMode::Unsupervised {
        return Err(CliError::Usage("this mode requires --labeled".into()));
    }
    let prepared = args.out_dir.join("prepared");

    // prepare
    prepare(&PrepareArgs {
        corpus: args.corpus.clone(),
        out_dir: prepared.clone(),
        max_tokens: args.max_tokens,
        bpe_merges: args.bpe_merges,
        vocab_size: None,
        labeled: args.labeled.clone(),
        seed: args.seed,
        config: args.config.clone(),
    })
    .map_err(|e| e.in_stage("prepare"))?;

    // prepare the out-of-domain corpus with the same settings
    let ood_prepared = match &args.ood_corpus {
        Some(ood) => {
            let dir = args.out_dir.join("prepared-ood");
            prepare(&PrepareArgs {
                corpus: ood.clone(),
                out_dir: dir.clone(),
                max_tokens: args.max_tokens,
                bpe_merges: None,
                vocab_size: None,
                labeled: None,
                seed: args.seed,
                config: args.config.clone(),
            })
            .map_err(|e| e.in_stage("prepare-ood"))?;
            Some(dir.join("corpus.txt"))
        }
        None => None,
    };

    // train
    let checkpoint_dir = args.out_dir.join("checkpoints");
    let bpe_path = args.bpe_merges.map(|_| prepared.join("bpe.txt"));
    let labeled_prepared = args.labeled.as_ref().map(|_| prepared.join("labeled.csv"));
    let train_args = TrainArgs {
        mode: args.mode.clone(),
        ind_corpus: Some(prepared.join("corpus.txt")),
        ood_corpus: ood_prepared,
        labeled: labeled_prepared.clone(),
        vocab: prepared.join("vocab.tsv"),
        counts_from: Some("file".to_owned()),
        counts_file: Some(prepared.join("counts.tsv")),
        bpe: bpe_path.clone(),
        epochs: Some(epochs),
        batch_size: args.batch_size,
        seed: args.seed,
        checkpoint_dir: Some(checkpoint_dir.clone()),
        hidden: args.hidden,
        embed: args.embed,
        attn_hidden: None,
        out_hidden: None,
        tie_embeddings: false,
        lr: args.lr,
        lr_halving_start: args.lr_halving_start,
        lr_halving_period: args.lr_halving_period,
        grad_clip: None,
        ood_cap: None,
        jobs: args.jobs,
        corruption: args.corruption.clone(),
        config: args.config.clone(),
    };
    train_cmd(&train_args).map_err(|e| e.in_stage("train"))?;

    let Some(labeled_path) = labeled_prepared else {
        eprintln!("no labeled data: stopping after training");
        return Ok(());
    };

    // generate, one sentence per distinct meaning representation
    let checkpoint = checkpoint_dir.join(format!("checkpoint-epoch-{epochs:03}.ckpt"));
    let names_vocab = (mode == TrainMode::Supervised).then(|| checkpoint_dir.join("names.tsv"));
    let generated = args.out_dir.join("generated.txt");
    generate_cmd(&GenerateArgs {
        checkpoint,
        vocab: prepared.join("vocab.tsv"),
        names_vocab,
        bpe: bpe_path,
        mrs: labeled_path.clone(),
        unique: true,
        out: Some(generated.clone()),
        nbest: None,
        boolean_no: None,
        decode: args.decode.clone(),
        config: args.config.clone(),
    })
    .map_err(|e| e.in_stage("generate"))?;

    // evaluate against the grouped references
    let labeled = read_labeled_csv(&labeled_path)
        .map_err(|e| CliError::from(e).in_stage("evaluate"))?;
    let refs_path = args.out_dir.join("references.txt");
    let mut refs_text = String::new();
    for (ix, example) in labeled.iter().enumerate() {
        if ix > 0 {
            refs_text.push('\n');
        }
        for reference in &example.references {
            refs_text.push_str(&reference.joined());
            refs_text.push('\n');
        }
    }
    write_text(&refs_path, &refs_text).map_err(|e| e.in_stage("evaluate"))?;

    let instances = load_instances(&generated, &refs_path).map_err(|e| e.in_stage("evaluate"))?;
    let report = score_corpus(&instances).map_err(|e| CliError::from(e).in_stage("evaluate"))?;
    let scores_line = format!("{:.6}\t{:.6}\t{:.4}\n", report.bleu, report.rouge_l, report.nist);
    write_text(&args.out_dir.join("scores.tsv"), &scores_line)
        .map_err(|e| e.in_stage("evaluate"))?;
    write_text(
        &args.out_dir.join("audit.json"),
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )
    .map_err(|e| e.in_stage("evaluate"))?;
    print!("{scores_line}");
    Ok(())
}
