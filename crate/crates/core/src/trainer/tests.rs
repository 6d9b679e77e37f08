use super::*;
use crate::corpus::{build_train_vocab, parse_corpus};
use crate::inference::score_path;

fn corpus(text: &str) -> Vec<Sentence> {
    parse_corpus(text.as_bytes()).unwrap()
}

fn small_config(variant: Variant) -> TrainConfig {
    TrainConfig {
        variant,
        embed_dim: 4,
        hidden_dim: 3,
        dropout: 0.0,
        iv_dropout: 0.0,
        batch_size: 2,
        epochs: 3,
        dev_fraction: 0.0,
        ..TrainConfig::default()
    }
}

fn model_for(sentences: &[Sentence], config: &TrainConfig) -> Model {
    let vocab = build_train_vocab(sentences);
    let bigrams = (config.variant == Variant::Bigram).then(|| BigramVocab::build(sentences));
    Model::new(config.clone(), vocab, bigrams).unwrap()
}

fn zero_params(model: &mut Model) {
    for (_, p) in model.params.iter_mut() {
        p.value.fill(0.0);
    }
}

fn loss_of(model: &Model, ex: &Example, config: &TrainConfig) -> f64 {
    let mut g = Graph::new(&model.params);
    let mut rng = sentence_rng(config.seed, 0, 0);
    let l = sentence_loss(&mut g, model, ex, config, &mut rng).unwrap();
    g.scalar(l)
}

#[test]
fn zero_scores_give_margin_times_length() {
    let data = corpus("ab c\n");
    let config = small_config(Variant::Unigram);
    let mut model = model_for(&data, &config);
    zero_params(&mut model);
    let ex = Example::new(&model, &data[0]).unwrap();
    // every tag can disagree with gold: 3 positions * 0.2
    assert!((loss_of(&model, &ex, &config) - 0.6).abs() < 1e-12);
}

#[test]
fn identical_paths_without_margin_cost_nothing() {
    let data = corpus("ab c\n");
    let config = TrainConfig {
        margin: 0.0,
        ..small_config(Variant::WsDag)
    };
    let mut model = model_for(&data, &config);
    zero_params(&mut model);
    let ex = Example::new(&model, &data[0]).unwrap();
    assert_eq!(loss_of(&model, &ex, &config), 0.0);
}

/// max over all 4^n paths of s + eta * misses, minus s(gold), clamped.
fn enumerated_loss(table: &ScoreTable, gold: &[Tag], eta: f64) -> f64 {
    let n = gold.len();
    let mut best = f64::NEG_INFINITY;
    for code in 0..4usize.pow(n as u32) {
        let tags: Vec<Tag> = (0..n).map(|i| Tag::ALL[(code >> (2 * (n - 1 - i))) & 3]).collect();
        let misses = tags.iter().zip(gold).filter(|(a, b)| a != b).count();
        best = best.max(score_path(table, &tags) + eta * misses as f64);
    }
    (best - score_path(table, gold)).max(0.0)
}

#[test]
fn loss_equals_enumeration() {
    let data = corpus("ab c\nabc\nc ab ca\nb a b c\nab ca b\n");
    for variant in Variant::ALL {
        let config = TrainConfig {
            init_range: 0.8,
            margin: 0.3,
            ..small_config(variant)
        };
        let model = model_for(&data, &config);
        for s in &data {
            let ex = Example::new(&model, s).unwrap();
            let table = model.score_table(&s.chars).unwrap();
            let expect = enumerated_loss(&table, &ex.gold, config.margin);
            let got = loss_of(&model, &ex, &config);
            assert!((got - expect).abs() < 1e-9, "{variant}: {got} vs {expect}");
            assert!(got >= 0.0);
        }
    }
}

#[test]
fn plain_decoding_loss_is_nonnegative() {
    let data = corpus("ab c\nabc\n");
    let config = TrainConfig {
        init_range: 0.8,
        plain_decode_train: true,
        ..small_config(Variant::WiDag)
    };
    let model = model_for(&data, &config);
    for s in &data {
        let ex = Example::new(&model, s).unwrap();
        assert!(loss_of(&model, &ex, &config) >= 0.0);
    }
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let data = corpus("ab c\nc ab\n");
    for variant in Variant::ALL {
        let config = TrainConfig {
            init_range: 0.5,
            l2: 0.01,
            ..small_config(variant)
        };
        let model = model_for(&data, &config);
        let examples: Vec<Example> = data.iter().map(|s| Example::new(&model, s).unwrap()).collect();
        let (_, grads) = objective(&model, &examples, &config).unwrap();
        let h = 1e-5;
        let mut checked = 0;
        let mut bad = 0;
        for (pid, (_, p)) in model.params.iter().enumerate() {
            for k in 0..p.value.len() {
                let mut plus = model.clone();
                plus.params.iter_mut().nth(pid).unwrap().1.value.data_mut()[k] += h;
                let mut minus = model.clone();
                minus.params.iter_mut().nth(pid).unwrap().1.value.data_mut()[k] -= h;
                let fd = (objective(&plus, &examples, &config).unwrap().0
                    - objective(&minus, &examples, &config).unwrap().0)
                    / (2.0 * h);
                let a = grads[pid][k];
                let rel = (fd - a).abs() / fd.abs().max(a.abs()).max(1e-6);
                checked += 1;
                if rel >= 1e-4 {
                    bad += 1;
                }
            }
        }
        assert!(bad * 100 <= checked, "{variant}: {bad} of {checked} coordinates off");
    }
}

#[test]
fn split_is_seeded_and_disjoint() {
    let data = corpus(&(0..20).map(|i| format!("w{i}\n")).collect::<String>());
    let (t1, d1) = split_dev(&data, 0.1, 7);
    let (t2, d2) = split_dev(&data, 0.1, 7);
    assert_eq!(d1.len(), 2);
    assert_eq!(t1.len(), 18);
    assert_eq!(d1, d2);
    assert_eq!(t1, t2);
    for d in &d1 {
        assert!(!t1.contains(d));
    }
}

#[test]
fn training_is_deterministic_across_runs_and_workers() {
    let data = corpus("ab c\nc ab\nabc\nca b\n");
    let config = TrainConfig {
        dropout: 0.2,
        iv_dropout: 0.5,
        ..small_config(Variant::WiDag)
    };
    let a = train(&data, &config).unwrap();
    let b = train(&data, &config).unwrap();
    let c = train(
        &data,
        &TrainConfig {
            workers: 3,
            ..config.clone()
        },
    )
    .unwrap();
    for ((x, y), z) in a
        .model
        .params
        .iter()
        .zip(b.model.params.iter())
        .zip(c.model.params.iter())
    {
        assert_eq!(x.1.value, y.1.value);
        assert_eq!(x.1.value, z.1.value);
    }
    assert_eq!(a.log, b.log);
}

#[test]
fn strong_weight_decay_shrinks_parameters() {
    let data = corpus("ab c\nc ab\nabc\nca b\n");
    let config = TrainConfig {
        l2: 10.0,
        learning_rate: 0.01,
        epochs: 4,
        batch_size: 4,
        ..small_config(Variant::Unigram)
    };
    let mut norms = Vec::new();
    let mut record = |e: &BatchEvent<'_>| norms.push(e.model.params.norm_sq());
    train_with(
        &data,
        &config,
        TrainOptions {
            on_batch: Some(&mut record),
            ..TrainOptions::default()
        },
    )
    .unwrap();
    assert_eq!(norms.len(), 4);
    for w in norms.windows(2) {
        assert!(w[1] < w[0], "{norms:?}");
    }
}

#[test]
fn full_iv_dropout_starves_word_rows() {
    let data = corpus("ab c\nc ab\nabc\nca b\n");
    let config = TrainConfig {
        iv_dropout: 1.0,
        dropout: 0.2,
        ..small_config(Variant::WsDag)
    };
    let mut batches = 0;
    let mut check = |e: &BatchEvent<'_>| {
        batches += 1;
        let vocab = &e.model.vocab;
        let multi: Vec<usize> = vocab
            .words()
            .filter(|(_, w)| w.chars().count() > 1)
            .map(|(id, _)| id)
            .collect();
        assert!(!multi.is_empty());
        let grad = e.model.params.grad(e.model.encoder.word_emb);
        for &id in &multi {
            assert!(grad.row(id).iter().all(|&g| g == 0.0));
        }
    };
    train_with(
        &data,
        &config,
        TrainOptions {
            on_batch: Some(&mut check),
            ..TrainOptions::default()
        },
    )
    .unwrap();
    assert!(batches > 0);
}

#[test]
fn epoch_log_format() {
    let line = EpochLog {
        epoch: 3,
        train_loss: 0.5,
        dev: None,
    };
    assert_eq!(line.to_string(), "3\t0.500000\t-\t-\t-\t-");
}

#[test]
fn sweep_has_one_row_per_rate() {
    let data = corpus("ab c\nc ab\nabc\nca b\nab\n");
    let config = TrainConfig {
        epochs: 1,
        dev_fraction: 0.2,
        ..small_config(Variant::WiDag)
    };
    let rows = sweep_iv_dropout(&data, &config, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.dev.is_some()));
}

#[test]
fn pretrained_rows_are_copied() {
    let data = corpus("ab c\n");
    let config = small_config(Variant::WsDag);
    let mut model = model_for(&data, &config);
    let rows = crate::corpus::parse_embeddings("1 4\nab 1 2 3 4\n".as_bytes(), &model.vocab, 4).unwrap();
    model.load_pretrained(&rows).unwrap();
    let id = model.vocab.get("ab").unwrap();
    assert_eq!(
        model.params.value(model.encoder.word_emb).row(id),
        &[1.0, 2.0, 3.0, 4.0]
    );
}

#[test]
fn model_and_gradients_cross_threads() {
    fn check<T: Send + Sync>() {}
    check::<Model>();
    check::<Gradients>();
}
