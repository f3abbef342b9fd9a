//! Trains the denoising autoencoder on the bundled toy corpus and reports
//! the reconstruction rate: how many training sentences come back exactly
//! when the model decodes their corrupted forms.
//!
//! Usage: cargo run --release --example toy_overfit -- [epochs] [halving_start] [batch]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use daegen_core::corruption::{corrupt, CorruptionConfig};
use daegen_core::data::{build_vocabulary, read_corpus, Vocabulary};
use daegen_core::decode::{DecodeConfig, Generator};
use daegen_core::model::{CheckpointMeta, Dims};
use daegen_core::seed;
use daegen_core::training::{train, TrainConfig, TrainData, TrainMode};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: u32 = args.get(1).map_or(50, |s| s.parse().unwrap());
    let halving_start: u32 = args.get(2).map_or(30, |s| s.parse().unwrap());
    let batch: usize = args.get(3).map_or(1, |s| s.parse().unwrap());

    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy");
    let sentences = read_corpus(&root.join("toy_corpus.txt")).unwrap();
    let counts = Vocabulary::read(&root.join("toy_counts.tsv")).unwrap();
    let vocab = build_vocabulary(&sentences, None);
    println!("sentences: {}, vocabulary: {}", sentences.len(), vocab.len());

    let mut corruption = CorruptionConfig::new(Arc::new(counts));
    corruption.seed = 42;
    let mut config = TrainConfig::new(corruption, TrainMode::Unsupervised, epochs);
    config.seed = 42;
    config.batch_size = batch;
    config.lr_halving_start_epoch = halving_start;

    let data = TrainData {
        in_domain: sentences.clone(),
        out_of_domain: Vec::new(),
        labeled: Vec::new(),
        src_vocab: vocab.clone(),
        tgt_vocab: vocab.clone(),
        name_vocab: None,
        bpe: None,
    };
    let dims = Dims::new(vocab.len(), vocab.len(), 32, 64);

    let start = Instant::now();
    let state = train(&config, &dims, &data, None, &CheckpointMeta::default(), |e, lr, loss| {
        if e % 5 == 0 || e == 1 {
            println!("epoch {e:>3}  lr {lr:<10.6} loss {loss:.4}");
        }
    })
    .unwrap();
    println!("training took {:.1?}s", start.elapsed().as_secs_f64());
    println!("final loss: {:.4} nats/token", state.loss_trace.last().unwrap());

    let generator = Generator {
        params: state.params,
        src_vocab: vocab.clone(),
        tgt_vocab: vocab,
        name_vocab: None,
        bpe: None,
        config: DecodeConfig::default(),
        boolean_no: Default::default(),
    };
    let mut exact = 0;
    let eval_corruption = {
        let mut c = config.corruption.clone();
        c.seed = 4242;
        c
    };
    for (ix, sentence) in sentences.iter().enumerate() {
        let mut rng = seed::rng(seed::derive_indexed(eval_corruption.seed, "probe", &[ix as u64]));
        let corrupted = corrupt(sentence, &eval_corruption, &mut rng).corrupted;
        let text = generator.generate_from_tokens(&corrupted).unwrap();
        let reconstructed = daegen_core::data::tokenize(&text) == *sentence;
        if reconstructed {
            exact += 1;
        } else if ix < 8 {
            println!("  miss: {corrupted} -> {text}");
        }
    }
    println!(
        "exact reconstructions: {exact}/{} ({:.1}%), total {:.1}s",
        sentences.len(),
        100.0 * exact as f64 / sentences.len() as f64,
        start.elapsed().as_secs_f64()
    );
}
