//! Acceptance suite: every release criterion as one test, each printing a
//! PASS line (run with `--nocapture` to see them). Criteria cover gradient
//! exactness, normalization, corruption statistics, the published
//! corruption example, metric oracles, the learning-rate schedule, toy
//! overfitting with exact reconstruction, beam-search dominance, pipeline
//! determinism, and an optional real-dataset check.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use statrs::distribution::{ContinuousCDF, Normal};

use daegen_core::corruption::{corrupt, corrupt_frequency_filtered, CorruptionConfig};
use daegen_core::data::{
    build_vocabulary, read_corpus, read_labeled_csv, tokenize, TokenSequence, Vocabulary,
};
use daegen_core::decode::{
    beam_search, greedy, DecodeConfig, Generator, ModelScorer, SequenceScorer,
};
use daegen_core::eval::{
    approximate_randomization, bleu, copy_input_baseline, nist, rouge_l, EvalInstance,
};
use daegen_core::model::{
    backward, decode_step, encode, forward_loss, init_params, initial_state, CheckpointMeta,
    Dims, SourceIds,
};
use daegen_core::seed;
use daegen_core::training::{lr_schedule, train, TrainConfig, TrainData, TrainMode};

fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

const TABLE_SENTENCE: &str = "Loch Fyne is a family friendly restaurant providing Indian food .";

fn table_sentence() -> TokenSequence {
    TABLE_SENTENCE.split(' ').collect::<Vec<_>>().into()
}

/// A count table where exactly {is, a, restaurant, providing, food, .}
/// exceed 100.
fn table_counts() -> Vocabulary {
    let mut lines: Vec<TokenSequence> = Vec::new();
    for word in ["is", "a", "restaurant", "providing", "food", "."] {
        for _ in 0..101 {
            lines.push(vec![word].into());
        }
    }
    lines.push(table_sentence());
    build_vocabulary(&lines, None)
}

/// Criterion 1: on a model with hidden=8, embed=6, vocab=11, every
/// parameter's backward gradient matches central finite differences
/// (eps = 1e-4) with relative error < 1e-3, in under 60 seconds.
#[test]
fn criterion_01_gradient_correctness() {
    let started = Instant::now();
    let dims = Dims::new(11, 11, 6, 8);
    let params = init_params(&dims, 2024).unwrap();
    let src = SourceIds::Words(vec![4, 9, 5, 10]);
    let tgt = vec![6usize, 7, 4, 8];
    let (_, grads) = backward(&params, &src, &tgt).unwrap();
    let analytic = grads.flatten();
    let base = params.flatten();
    let eps = 1e-4;
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut plus = base.clone();
        plus[k] += eps;
        probe.assign_flat(&plus);
        let loss_plus = forward_loss(&probe, &src, &tgt).unwrap();
        let mut minus = base.clone();
        minus[k] -= eps;
        probe.assign_flat(&minus);
        let loss_minus = forward_loss(&probe, &src, &tgt).unwrap();
        let fd = (loss_plus - loss_minus) / (2.0 * eps);
        let an = analytic[k];
        let denom = fd.abs().max(an.abs());
        if denom < 1e-8 {
            continue;
        }
        let rel = (fd - an).abs() / denom;
        worst = worst.max(rel);
        assert!(
            rel < 1e-3,
            "criterion 1: coordinate {k} disagrees: fd {fd}, analytic {an}, rel {rel}"
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 1: took {elapsed:.1}s (limit 60s)");
    println!(
        "ACCEPTANCE 1 (gradient correctness, {} coordinates, worst rel {worst:.2e}, {elapsed:.1}s): PASS",
        base.len()
    );
}

/// Criterion 2: attention weights and output distributions sum to 1
/// within 1e-6 over 1,000 random (params, input) trials.
#[test]
fn criterion_02_normalization_invariants() {
    for trial in 0..1000u64 {
        let dims = Dims::new(9, 9, 3, 4);
        let params = init_params(&dims, trial).unwrap();
        let len = (trial % 5 + 1) as usize;
        let src: Vec<usize> = (0..len).map(|i| ((trial as usize) + i) % 9).collect();
        let states = encode(&params, &SourceIds::Words(src)).unwrap();
        let s0 = initial_state(&params, &states);
        let step = decode_step(&params, &s0, (trial % 9) as usize, &states).unwrap();
        let alpha_sum = step.alpha.sum();
        let dist_sum = step.dist.sum();
        assert!(
            (alpha_sum - 1.0).abs() < 1e-6,
            "criterion 2: attention sums to {alpha_sum} on trial {trial}"
        );
        assert!(
            (dist_sum - 1.0).abs() < 1e-6,
            "criterion 2: distribution sums to {dist_sum} on trial {trial}"
        );
    }
    println!("ACCEPTANCE 2 (normalization invariants, 1000 trials): PASS");
}

/// Criterion 3: over 10,000 corrupted samples of a 20-token sentence with
/// the default rate distribution, the empirical mean kept-fraction
/// matches the analytic expectation under the clamped Normal within 0.02;
/// the frequency threshold is never violated; glued bigrams are never
/// split.
#[test]
fn criterion_03_corruption_statistics() {
    let tokens: TokenSequence = (0..20).map(|i| format!("w{i}")).collect();
    let n = tokens.len();

    // Empirical mean kept-fraction under random deletion.
    let counts = Arc::new(build_vocabulary(std::slice::from_ref(&tokens), None));
    let mut config = CorruptionConfig::new(counts);
    config.enable_frequency_filter = false;
    config.enable_shuffle = false;
    let mut kept_sum = 0.0;
    for ix in 0..10_000u64 {
        let mut rng = seed::rng(seed::derive_indexed(31, "kept", &[ix]));
        let sample = corrupt(&tokens, &config, &mut rng);
        kept_sum += sample.corrupted.len() as f64 / n as f64;
    }
    let empirical = kept_sum / 10_000.0;

    // Analytic: E[1 - floor(p n)/n] with p ~ clamp(N(0.6, 0.1), .05, .95),
    // via E[floor(p n)] = sum_k P(p >= k/n).
    let normal = Normal::new(0.6, 0.1f64.sqrt()).unwrap();
    let mut expected_floor = 0.0;
    for k in 1..n {
        let x = k as f64 / n as f64;
        let p = if x <= 0.05 { 1.0 } else { 1.0 - normal.cdf(x) };
        expected_floor += p;
    }
    let analytic = 1.0 - expected_floor / n as f64;
    assert!(
        (empirical - analytic).abs() < 0.02,
        "criterion 3: empirical kept fraction {empirical:.4} vs analytic {analytic:.4}"
    );

    // Frequency threshold: a rare token never disappears.
    let sentence = table_sentence();
    let counts = table_counts();
    let rare = ["Loch", "Fyne", "family", "friendly", "Indian"];
    for ix in 0..10_000u64 {
        let mut rng = seed::rng(seed::derive_indexed(32, "freq", &[ix]));
        let p = 0.05 + 0.9 * (ix as f64 / 10_000.0);
        let out = corrupt_frequency_filtered(&sentence, p, &counts, 100, &mut rng);
        for word in rare {
            assert!(
                out.iter().any(|t| t == word),
                "criterion 3: frequency threshold violated, lost {word} at p={p}"
            );
        }
    }

    // Shuffle: glued bigrams stay contiguous through the full pipeline.
    let mut config = CorruptionConfig::new(Arc::new(counts));
    config.seed = 33;
    for ix in 0..10_000u64 {
        let mut rng = seed::rng(seed::derive_indexed(33, "glue", &[ix]));
        let sample = corrupt(&sentence, &config, &mut rng);
        let joined = sample.corrupted.joined();
        let has = |w: &str| sample.corrupted.iter().any(|t| t == w);
        if has("Loch") || has("Fyne") {
            assert!(joined.contains("Loch Fyne"), "criterion 3: split 'Loch Fyne' in {joined}");
        }
        if has("family") || has("friendly") {
            assert!(
                joined.contains("family friendly"),
                "criterion 3: split 'family friendly' in {joined}"
            );
        }
    }
    println!(
        "ACCEPTANCE 3 (corruption statistics: kept {empirical:.4} vs {analytic:.4}, 0 threshold / 0 bigram violations): PASS"
    );
}

/// Criterion 4: with the published example sentence and a count table
/// where exactly {is, a, restaurant, providing, food, .} exceed 100, the
/// frequency heuristic yields exactly "Loch Fyne family friendly Indian"
/// whenever floor(p*n) >= 6, and shuffled outputs keep "Loch Fyne" and
/// "family friendly" together.
#[test]
fn criterion_04_published_corruption_example() {
    let sentence = table_sentence();
    let counts = table_counts();
    let mut checked = 0;
    for pct in 55..=95 {
        let p = pct as f64 / 100.0;
        if ((p * sentence.len() as f64 + 1e-9).floor() as usize) < 6 {
            continue;
        }
        for s in 0..50u64 {
            let mut rng = seed::rng(s);
            let out = corrupt_frequency_filtered(&sentence, p, &counts, 100, &mut rng);
            assert_eq!(
                out.joined(),
                "Loch Fyne family friendly Indian",
                "criterion 4: unexpected survivors at p={p}"
            );
            checked += 1;
        }
    }
    assert!(checked > 1000, "criterion 4: too few parameter points exercised");

    let mut config = CorruptionConfig::new(Arc::new(counts));
    config.seed = 4;
    let mut permuted = 0;
    for ix in 0..2000u64 {
        let mut rng = seed::rng(seed::derive_indexed(4, "shuffle", &[ix]));
        let sample = corrupt(&sentence, &config, &mut rng);
        let joined = sample.corrupted.joined();
        let has = |w: &str| sample.corrupted.iter().any(|t| t == w);
        if has("Loch") {
            assert!(joined.contains("Loch Fyne"), "criterion 4: split pair in {joined}");
        }
        if has("family") {
            assert!(joined.contains("family friendly"), "criterion 4: split pair in {joined}");
        }
        if !joined.is_empty() && !TABLE_SENTENCE.contains(&joined) {
            permuted += 1;
        }
    }
    assert!(permuted > 0, "criterion 4: shuffle never produced a reordering");
    println!("ACCEPTANCE 4 (published corruption example, {checked} deletions checked): PASS");
}

/// Criterion 5: metric identities and the hand-derived oracles, to 1e-6;
/// the randomization test matches exact enumeration within 0.02.
#[test]
fn criterion_05_metric_oracles() {
    let instance = |hyp: &str, refs: &[&str]| {
        EvalInstance::new(tokenize(hyp), refs.iter().map(|r| tokenize(r)).collect()).unwrap()
    };

    // Identity corpora score exactly 1.
    let identity = vec![
        instance("the cat sat on the mat", &["the cat sat on the mat"]),
        instance("dogs bark loudly", &["dogs bark loudly", "a dog barks"]),
    ];
    assert!((bleu(&identity, 4).score - 1.0).abs() < 1e-6, "criterion 5: identity BLEU");
    assert!((rouge_l(&identity) - 1.0).abs() < 1e-6, "criterion 5: identity ROUGE-L");

    // Hand-derived values.
    let short = vec![instance("the cat sat", &["the cat sat down"])];
    let expected_bleu = (1.0f64 - 4.0 / 3.0).exp();
    assert!(
        (bleu(&short, 4).score - expected_bleu).abs() < 1e-6,
        "criterion 5: BLEU {} != {expected_bleu}",
        bleu(&short, 4).score
    );

    let crossed = vec![instance("a b c d", &["a c b d"])];
    assert!(
        (rouge_l(&crossed) - 0.75).abs() < 1e-6,
        "criterion 5: ROUGE-L {} != 0.75",
        rouge_l(&crossed)
    );

    let identical_pair = vec![instance("a b", &["a b"]), instance("a c", &["a c"])];
    assert!(
        (nist(&identical_pair, 5).score - 2.5).abs() < 1e-6,
        "criterion 5: NIST {} != 2.5",
        nist(&identical_pair, 5).score
    );

    // Approximate randomization vs exact enumeration for N <= 10.
    let a = [0.70, 0.30, 0.20, 0.60, 0.40, 0.40, 0.00, 0.70, 0.10, 0.30];
    let b = [0.50, 0.10, 0.00, 0.20, 0.40, 0.30, 0.00, 0.50, 0.30, 0.20];
    let observed = (a.iter().sum::<f64>() - b.iter().sum::<f64>()).abs() / a.len() as f64;
    let mut hits = 0usize;
    for mask in 0u32..(1 << a.len()) {
        let mut diff = 0.0;
        for i in 0..a.len() {
            if mask & (1 << i) != 0 {
                diff += b[i] - a[i];
            } else {
                diff += a[i] - b[i];
            }
        }
        if (diff / a.len() as f64).abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    let exact = hits as f64 / (1u64 << a.len()) as f64;
    let approx = approximate_randomization(&a, &b, 20_000, 5).unwrap();
    assert!(
        (approx - exact).abs() < 0.02,
        "criterion 5: AR {approx:.4} vs exact {exact:.4}"
    );
    println!("ACCEPTANCE 5 (metric oracles; AR {approx:.4} vs exact {exact:.4}): PASS");
}

/// Criterion 6: epochs 1-8 produce exactly
/// [0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.125, 0.125].
#[test]
fn criterion_06_learning_rate_schedule() {
    let corruption =
        CorruptionConfig::new(Arc::new(build_vocabulary(&[tokenize("a b c")], None)));
    let config = TrainConfig::new(corruption, TrainMode::Unsupervised, 8);
    let rates: Vec<f64> = (1..=8).map(|e| lr_schedule(&config, e)).collect();
    assert_eq!(
        rates,
        vec![0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.125, 0.125],
        "criterion 6: schedule mismatch"
    );
    println!("ACCEPTANCE 6 (learning-rate schedule): PASS");
}

/// Criterion 7: on the bundled 100-sentence corpus (hidden 64, embed 32,
/// 50 epochs, fixed seed), the final training loss is below 0.1
/// nats/token and at least 95% of the sentences are reconstructed exactly
/// from fresh corrupted inputs, within 10 minutes single-core.
#[test]
fn criterion_07_overfit_and_reconstruct() {
    let started = Instant::now();
    let dir = toy_dir();
    let sentences = read_corpus(&dir.join("toy_corpus.txt")).unwrap();
    assert_eq!(sentences.len(), 100);
    let counts = Vocabulary::read(&dir.join("toy_counts.tsv")).unwrap();
    let vocab = build_vocabulary(&sentences, None);

    let mut corruption = CorruptionConfig::new(Arc::new(counts));
    corruption.seed = 42;
    let mut config = TrainConfig::new(corruption, TrainMode::Unsupervised, 50);
    config.seed = 42;
    config.lr_halving_start_epoch = 42;
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
    let state =
        train(&config, &dims, &data, None, &CheckpointMeta::default(), |_, _, _| {}).unwrap();
    let final_loss = *state.loss_trace.last().unwrap();
    assert!(
        final_loss < 0.1,
        "criterion 7: final loss {final_loss:.4} nats/token (limit 0.1)"
    );
    // The 5-epoch window means decrease monotonically until the loss is
    // below 0.1.
    let windows: Vec<f64> = state
        .loss_trace
        .chunks(5)
        .map(|w| w.iter().sum::<f64>() / w.len() as f64)
        .collect();
    for pair in windows.windows(2) {
        if pair[0] < 0.1 {
            break;
        }
        assert!(
            pair[1] < pair[0],
            "criterion 7: loss trend not decreasing: {windows:?}"
        );
    }

    let generator = Generator {
        params: state.params,
        src_vocab: vocab.clone(),
        tgt_vocab: vocab,
        name_vocab: None,
        bpe: None,
        config: DecodeConfig::default(),
        boolean_no: Default::default(),
    };
    let eval_corruption = {
        let mut c = config.corruption.clone();
        c.seed = 4242;
        c
    };
    let mut exact = 0usize;
    for (ix, sentence) in sentences.iter().enumerate() {
        let mut rng =
            seed::rng(seed::derive_indexed(eval_corruption.seed, "probe", &[ix as u64]));
        let corrupted = corrupt(sentence, &eval_corruption, &mut rng).corrupted;
        let text = generator.generate_from_tokens(&corrupted).unwrap();
        if tokenize(&text) == *sentence {
            exact += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        exact >= 95,
        "criterion 7: only {exact}/100 sentences reconstructed exactly"
    );
    assert!(elapsed < 600.0, "criterion 7: took {elapsed:.0}s (limit 600s)");
    println!(
        "ACCEPTANCE 7 (overfit: loss {final_loss:.4}, {exact}/100 reconstructed, {elapsed:.0}s): PASS"
    );
}

/// Criterion 8: beam size 1 equals greedy token for token on 100 random
/// models; beam size 5 never scores below greedy; a constructed two-step
/// table shows beam strictly beating greedy, verified by exhaustive
/// enumeration.
#[test]
fn criterion_08_beam_search_dominance() {
    for model_seed in 0..100u64 {
        let dims = Dims::new(9, 9, 3, 3);
        let params = init_params(&dims, model_seed).unwrap();
        let len = (model_seed % 4 + 1) as usize;
        let src: Vec<usize> = (0..len).map(|i| (model_seed as usize + i) % 9).collect();
        let scorer = ModelScorer::new(&params, &SourceIds::Words(src)).unwrap();
        let greedy_out = greedy(&scorer, 12);
        let (beam1, _) = beam_search(
            &scorer,
            &DecodeConfig { beam_size: 1, max_len: 12, ..Default::default() },
        );
        assert_eq!(beam1.ids, greedy_out.ids, "criterion 8: beam(1) != greedy on {model_seed}");
        let (beam5, _) = beam_search(
            &scorer,
            &DecodeConfig { beam_size: 5, max_len: 12, ..Default::default() },
        );
        assert!(
            beam5.log_prob >= greedy_out.log_prob - 1e-9,
            "criterion 8: beam(5) below greedy on {model_seed}"
        );
    }

    // Hand-set two-step distributions where greedy commits to the wrong
    // first token. Ids: 0..=3 reserved (2 ends the sentence), 4..=7 words.
    struct Table;
    const NEG: f64 = -1e30;
    fn row(pairs: &[(usize, f64)]) -> ndarray::Array1<f64> {
        let mut row = ndarray::Array1::from_elem(8, NEG);
        for &(id, p) in pairs {
            row[id] = p.ln();
        }
        row
    }
    impl SequenceScorer for Table {
        type State = usize;
        fn start_state(&self) -> usize {
            0
        }
        fn step(&self, state: &usize, prev: usize) -> (ndarray::Array1<f64>, usize) {
            let dist = match (*state, prev) {
                (0, _) => row(&[(4, 0.6), (5, 0.39), (2, 0.01)]),
                (1, 4) => row(&[(6, 0.35), (7, 0.33), (2, 0.32)]),
                (1, 5) => row(&[(7, 0.9), (6, 0.05), (2, 0.05)]),
                _ => row(&[(2, 1.0)]),
            };
            (dist, state + 1)
        }
        fn vocab_size(&self) -> usize {
            8
        }
    }
    let greedy_out = greedy(&Table, 4);
    let (beam2, _) = beam_search(
        &Table,
        &DecodeConfig { beam_size: 2, max_len: 4, ..Default::default() },
    );
    assert_eq!(greedy_out.ids, vec![4, 6], "criterion 8: greedy path changed");
    assert_eq!(beam2.ids, vec![5, 7], "criterion 8: beam missed the better path");
    assert!(
        beam2.log_prob > greedy_out.log_prob + 1e-9,
        "criterion 8: beam not strictly better"
    );
    // Exhaustive enumeration over both steps confirms the optimum.
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for t1 in [4usize, 5, 6, 7] {
        let (first, s1) = Table.step(&0, 1);
        let (second, s2) = Table.step(&s1, t1);
        for t2 in [4usize, 5, 6, 7] {
            let (third, _) = Table.step(&s2, t2);
            let lp = first[t1] + second[t2] + third[2];
            if lp > best.1 {
                best = (vec![t1, t2], lp);
            }
        }
    }
    assert_eq!(best.0, beam2.ids, "criterion 8: enumeration argmax differs");
    println!("ACCEPTANCE 8 (beam dominance on 100 models + counterexample): PASS");
}

/// Criterion 9: two full pipeline runs with the same root seed produce
/// byte-identical checkpoints, generations, and scores.
#[test]
fn criterion_09_pipeline_determinism() {
    let dir = toy_dir();
    let corpus = std::fs::read_to_string(dir.join("toy_corpus.txt")).unwrap();
    let subset: String = corpus.lines().take(25).map(|l| format!("{l}\n")).collect();
    let labeled_full = std::fs::read_to_string(dir.join("toy_labeled.csv")).unwrap();
    let labeled: String = labeled_full.lines().take(26).map(|l| format!("{l}\n")).collect();

    let work = tempfile::tempdir().unwrap();
    let corpus_path = work.path().join("corpus.txt");
    let labeled_path = work.path().join("labeled.csv");
    std::fs::write(&corpus_path, &subset).unwrap();
    std::fs::write(&labeled_path, &labeled).unwrap();

    let run = |out: &str| {
        let out_dir = work.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_daegen"))
            .args([
                "pipeline",
                "--corpus",
                corpus_path.to_str().unwrap(),
                "--labeled",
                labeled_path.to_str().unwrap(),
                "--out-dir",
                out_dir.to_str().unwrap(),
                "--epochs",
                "6",
                "--hidden",
                "24",
                "--embed",
                "12",
                "--seed",
                "99",
            ])
            .status()
            .expect("pipeline run");
        assert!(status.success(), "criterion 9: pipeline failed");
        out_dir
    };
    let first = run("run-a");
    let second = run("run-b");

    let mut compared = 0usize;
    for name in ["generated.txt", "scores.tsv"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "criterion 9: {name} differs between runs");
        compared += 1;
    }
    for epoch in 1..=6 {
        let name = format!("checkpoints/checkpoint-epoch-{epoch:03}.ckpt");
        let a = std::fs::read(first.join(&name)).unwrap();
        let b = std::fs::read(second.join(&name)).unwrap();
        assert_eq!(a, b, "criterion 9: {name} differs between runs");
        compared += 1;
    }
    println!("ACCEPTANCE 9 (pipeline determinism, {compared} artifacts byte-identical): PASS");
}

/// Criterion 10 (dataset-gated): with the real restaurant dev split
/// (point DAEGEN_E2E_DEV at its CSV, header mr,ref), the copy-input
/// baseline lands within the published tolerances and a desk-scale model
/// trained on the split's references beats it on BLEU. Skipped when the
/// dataset is absent.
#[test]
fn criterion_10_dataset_gated_baseline() {
    let path = std::env::var("DAEGEN_E2E_DEV").map(PathBuf::from).unwrap_or_else(|_| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/e2e/devset.csv")
    });
    if !path.exists() {
        println!("ACCEPTANCE 10 (dataset-gated baseline): SKIP (dataset not present)");
        return;
    }
    let labeled = read_labeled_csv(&path).unwrap();
    let mrs: Vec<_> = labeled.iter().map(|ex| ex.mr.clone()).collect();
    let baseline = copy_input_baseline(&mrs).unwrap();
    let instances: Vec<EvalInstance> = baseline
        .iter()
        .zip(&labeled)
        .map(|(text, ex)| EvalInstance::new(tokenize(text), ex.references.clone()).unwrap())
        .collect();
    let baseline_bleu = bleu(&instances, 4).score;
    let baseline_rouge = rouge_l(&instances);
    let baseline_nist = nist(&instances, 5).score;
    assert!(
        (baseline_bleu - 0.277).abs() <= 0.005,
        "criterion 10: copy-input BLEU {baseline_bleu:.4} outside 0.277±0.005"
    );
    assert!(
        (baseline_rouge - 0.564).abs() <= 0.005,
        "criterion 10: copy-input ROUGE {baseline_rouge:.4} outside 0.564±0.005"
    );
    assert!(
        (baseline_nist - 3.2).abs() <= 0.1,
        "criterion 10: copy-input NIST {baseline_nist:.3} outside 3.2±0.1"
    );

    // Desk-scale unsupervised model trained on the split's reference
    // sentences for >= 10 epochs must beat the copy baseline on BLEU.
    let sentences: Vec<TokenSequence> =
        labeled.iter().flat_map(|ex| ex.references.iter().cloned()).collect();
    let vocab = build_vocabulary(&sentences, None);
    let counts = build_vocabulary(&sentences, None);
    let mut corruption = CorruptionConfig::new(Arc::new(counts));
    corruption.seed = 10;
    let mut config = TrainConfig::new(corruption, TrainMode::Unsupervised, 12);
    config.seed = 10;
    config.lr_halving_start_epoch = 10;
    let data = TrainData {
        in_domain: sentences,
        out_of_domain: Vec::new(),
        labeled: Vec::new(),
        src_vocab: vocab.clone(),
        tgt_vocab: vocab.clone(),
        name_vocab: None,
        bpe: None,
    };
    let dims = Dims::new(vocab.len(), vocab.len(), 32, 64);
    let state =
        train(&config, &dims, &data, None, &CheckpointMeta::default(), |_, _, _| {}).unwrap();
    let generator = Generator {
        params: state.params,
        src_vocab: vocab.clone(),
        tgt_vocab: vocab,
        name_vocab: None,
        bpe: None,
        config: DecodeConfig::default(),
        boolean_no: Default::default(),
    };
    let model_instances: Vec<EvalInstance> = labeled
        .iter()
        .map(|ex| {
            let text = generator.generate(&ex.mr).unwrap();
            EvalInstance::new(tokenize(&text), ex.references.clone()).unwrap()
        })
        .collect();
    let model_bleu = bleu(&model_instances, 4).score;
    assert!(
        model_bleu > baseline_bleu,
        "criterion 10: model BLEU {model_bleu:.4} does not beat baseline {baseline_bleu:.4}"
    );
    println!(
        "ACCEPTANCE 10 (dataset-gated: baseline BLEU {baseline_bleu:.4}, model BLEU {model_bleu:.4}): PASS"
    );
}
