//! Max-margin training with minibatch AdaGrad.

mod config;
mod dropout;

use std::fmt;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{build_train_vocab, evaluate, load_embeddings, BigramVocab, SegMetrics, Sentence, Span, Tag};
use crate::encoders::Variant;
use crate::error::{CorpusError, NumericError, Result};
use crate::inference::{score_path_node, viterbi, viterbi_cost_augmented, ScoreTable};
use crate::lattice::Lattice;
use crate::model::{Model, Noise};
use crate::numeric::{AdaGrad, Gradients, Graph, NodeId, ParamStore};

pub use config::{TrainConfig, CONFIG_KEYS};
pub use dropout::apply_iv_word_dropout;

/// A training sentence with its gold tags and cached lattice.
#[derive(Debug, Clone)]
pub struct Example {
    pub chars: Vec<char>,
    pub gold: Vec<Tag>,
    pub lattice: Option<Lattice>,
}

impl Example {
    pub fn new(model: &Model, sentence: &Sentence) -> Result<Example> {
        let gold = match sentence.gold_tags() {
            Some(tags) => tags?,
            None => return Err(CorpusError::Validation("training sentence without gold segmentation".into()).into()),
        };
        Ok(Example {
            chars: sentence.chars.clone(),
            gold,
            lattice: model.lattice(&sentence.chars),
        })
    }
}

/// Hinge loss of one sentence:
/// `max(0, s(y_hat) + eta * #{y_hat != gold} - s(gold))`, where `y_hat`
/// is found by cost-augmented decoding (plain decoding when
/// `plain_decode_train` is set). IV word dropout and conventional dropout
/// are drawn from `rng` at the configured rates.
pub fn sentence_loss(
    g: &mut Graph<'_>,
    model: &Model,
    example: &Example,
    config: &TrainConfig,
    rng: &mut dyn RngCore,
) -> std::result::Result<NodeId, NumericError> {
    let dropped;
    let lattice = match &example.lattice {
        Some(l) if config.iv_dropout > 0.0 => {
            dropped = apply_iv_word_dropout(l, config.iv_dropout, &mut *rng);
            Some(&dropped)
        }
        other => other.as_ref(),
    };
    let noise = (config.dropout > 0.0).then_some(Noise {
        dropout: config.dropout,
        rng: &mut *rng,
    });
    let em = model.emission_nodes(g, &example.chars, lattice, noise)?;
    let table = ScoreTable::from_graph(g, &em, &model.output);
    let predicted = if config.plain_decode_train {
        viterbi(&table)
    } else {
        viterbi_cost_augmented(&table, &example.gold, config.margin)
    };
    let misses = predicted.tags.iter().zip(&example.gold).filter(|(a, b)| a != b).count();
    let s_pred = score_path_node(g, &em, &model.output, &predicted.tags)?;
    let s_gold = score_path_node(g, &em, &model.output, &example.gold)?;
    let neg_gold = g.scale(s_gold, -1.0)?;
    let diff = g.add(s_pred, neg_gold)?;
    let margin = g.add_const(diff, config.margin * misses as f64)?;
    g.hinge(margin)
}

/// Per-sentence random stream, independent of batch layout and worker
/// count.
pub fn sentence_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}

/// Loss value and gradients (absent when the loss is zero).
fn example_gradient(
    model: &Model,
    example: &Example,
    config: &TrainConfig,
    rng: &mut dyn RngCore,
) -> std::result::Result<(f64, Option<Gradients>), NumericError> {
    let mut g = Graph::new(&model.params);
    let loss = sentence_loss(&mut g, model, example, config, rng)?;
    let value = g.scalar(loss);
    if value == 0.0 {
        return Ok((0.0, None));
    }
    Ok((value, Some(g.backward(loss)?)))
}

/// `J = mean_m l_m + l2/2 * ||theta||^2` over the weight-decayed trainable
/// parameters, together with its gradient (one dense buffer per parameter
/// in store order). Dropout is applied only if the config asks for it.
pub fn objective(model: &Model, examples: &[Example], config: &TrainConfig) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut store = model.params.clone();
    store.zero_grads();
    let scale = 1.0 / examples.len().max(1) as f64;
    let mut total = 0.0;
    for (idx, ex) in examples.iter().enumerate() {
        let mut rng = sentence_rng(config.seed, 0, idx);
        let (loss, grads) = example_gradient(model, ex, config, &mut rng)?;
        total += loss;
        if let Some(grads) = grads {
            store.accumulate(&grads, scale);
        }
    }
    let mut value = total * scale;
    let mut out = Vec::with_capacity(store.len());
    for (_, p) in store.iter() {
        let mut grad = p.grad.data().to_vec();
        if p.trainable && p.weight_decay {
            value += 0.5 * config.l2 * p.value.norm_sq();
            for (g, v) in grad.iter_mut().zip(p.value.data()) {
                *g += config.l2 * v;
            }
        }
        out.push(grad);
    }
    Ok((value, out))
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev: Option<SegMetrics>,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{:.6}\t", self.epoch, self.train_loss)?;
        match &self.dev {
            Some(m) => write!(f, "{m}"),
            None => f.write_str("-\t-\t-\t-"),
        }
    }
}

/// State visible to the batch observer, after gradients are reduced and
/// before the update.
pub struct BatchEvent<'a> {
    pub epoch: usize,
    pub batch: usize,
    pub model: &'a Model,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// word2vec text file used to initialize the word embedding table.
    pub embeddings: Option<PathBuf>,
    /// Use this dev set instead of splitting one off the corpus.
    pub dev: Option<&'a [Sentence]>,
    pub on_batch: Option<&'a mut dyn FnMut(&BatchEvent<'_>)>,
    pub on_epoch: Option<&'a mut dyn FnMut(&EpochLog)>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Parameters of the epoch with the best dev F (the last epoch when
    /// there is no dev set).
    pub model: Model,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    /// Fraction of vocabulary entries initialized from pre-trained vectors.
    pub embedding_coverage: Option<f64>,
    pub train_size: usize,
    pub dev_size: usize,
}

/// Splits off the dev set after one seeded shuffle: `(train, dev)`.
pub fn split_dev(corpus: &[Sentence], fraction: f64, seed: u64) -> (Vec<Sentence>, Vec<Sentence>) {
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut dev_n = (fraction * corpus.len() as f64).round() as usize;
    if dev_n >= corpus.len() {
        dev_n = corpus.len().saturating_sub(1);
    }
    let dev = order[..dev_n].iter().map(|&i| corpus[i].clone()).collect();
    let train = order[dev_n..].iter().map(|&i| corpus[i].clone()).collect();
    (train, dev)
}

/// Worker lanes: a dedicated thread pool when more than one worker is
/// configured, the calling thread otherwise. Results always come back in
/// input order.
pub struct Lanes {
    pool: Option<rayon::ThreadPool>,
}

impl Lanes {
    pub fn new(workers: usize) -> Result<Lanes> {
        let pool = if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| crate::error::ConfigError::Invalid(format!("thread pool: {e}")))?;
            Some(pool)
        } else {
            None
        };
        Ok(Lanes { pool })
    }

    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            None => items.iter().map(f).collect(),
        }
    }
}

/// Segments every sentence, in parallel when `workers > 1`.
pub fn segment_all(model: &Model, sentences: &[Sentence], lanes: &Lanes) -> Result<Vec<Vec<Span>>> {
    lanes.map(sentences, |s| model.segment(&s.chars)).into_iter().collect()
}

/// Scores `model` on a gold corpus.
pub fn evaluate_model(model: &Model, gold: &[Sentence], lanes: &Lanes) -> Result<SegMetrics> {
    let pred = segment_all(model, gold, lanes)?;
    evaluate(gold, &pred, &model.vocab)
}

pub fn train(corpus: &[Sentence], config: &TrainConfig) -> Result<TrainOutput> {
    train_with(corpus, config, TrainOptions::default())
}

pub fn train_with(corpus: &[Sentence], config: &TrainConfig, mut options: TrainOptions<'_>) -> Result<TrainOutput> {
    config.validate()?;
    let (train_set, split) = match options.dev {
        Some(_) => (corpus.to_vec(), Vec::new()),
        None => split_dev(corpus, config.dev_fraction, config.seed),
    };
    let dev: &[Sentence] = options.dev.unwrap_or(&split);
    if train_set.is_empty() {
        return Err(CorpusError::Validation("empty training corpus".into()).into());
    }
    let vocab = build_train_vocab(&train_set);
    let bigrams = (config.variant == Variant::Bigram).then(|| BigramVocab::build(&train_set));
    let mut model = Model::new(config.clone(), vocab, bigrams)?;
    let mut coverage = None;
    if let Some(path) = &options.embeddings {
        let rows = load_embeddings(path, &model.vocab, config.embed_dim)?;
        coverage = Some(rows.coverage);
        model.load_pretrained(&rows)?;
    }
    let examples = train_set
        .iter()
        .map(|s| Example::new(&model, s))
        .collect::<Result<Vec<_>>>()?;

    let optimizer = AdaGrad {
        learning_rate: config.learning_rate,
        l2: config.l2,
        epsilon: config.epsilon,
        clip_norm: config.clip_norm,
    };
    let lanes = Lanes::new(config.workers)?;
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let run = |&idx: &usize| {
                let mut rng = sentence_rng(config.seed, epoch, idx);
                example_gradient(&model, &examples[idx], config, &mut rng)
            };
            let results = lanes.map(batch, run);
            let scale = 1.0 / batch.len() as f64;
            for r in results {
                let (loss, grads) = r?;
                epoch_loss += loss;
                if let Some(grads) = grads {
                    model.params.accumulate(&grads, scale);
                }
            }
            if let Some(cb) = options.on_batch.as_mut() {
                cb(&BatchEvent {
                    epoch,
                    batch: batch_idx,
                    model: &model,
                });
            }
            optimizer.step(&mut model.params);
        }
        let train_loss = epoch_loss / examples.len() as f64;
        if !train_loss.is_finite() {
            return Err(NumericError::Divergence {
                epoch,
                loss: train_loss,
            }
            .into());
        }
        let metrics = if dev.is_empty() {
            None
        } else {
            Some(evaluate_model(&model, dev, &lanes)?)
        };
        let entry = EpochLog {
            epoch,
            train_loss,
            dev: metrics,
        };
        if let Some(cb) = options.on_epoch.as_mut() {
            cb(&entry);
        }
        let score = entry.dev.as_ref().map_or(f64::NEG_INFINITY, |m| m.f_value);
        let improved = match &best {
            None => true,
            Some((f, _, _)) => score > *f || entry.dev.is_none(),
        };
        if improved {
            match &mut best {
                Some((f, e, params)) => {
                    *f = score;
                    *e = epoch;
                    params.copy_values_from(&model.params);
                }
                None => best = Some((score, epoch, model.params.clone())),
            }
        }
        log.push(entry);
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params.copy_values_from(&params);
            epoch
        }
        None => 0,
    };
    model.params.zero_grads();
    Ok(TrainOutput {
        model,
        log,
        best_epoch,
        embedding_coverage: coverage,
        train_size: examples.len(),
        dev_size: dev.len(),
    })
}

/// One row of an IV-dropout sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub iv_dropout: f64,
    pub seed: u64,
    pub best_epoch: usize,
    pub dev: Option<SegMetrics>,
}

impl fmt::Display for SweepRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t", self.iv_dropout, self.seed, self.best_epoch)?;
        match &self.dev {
            Some(m) => write!(f, "{:.2}", m.f_value * 100.0),
            None => f.write_str("-"),
        }
    }
}

/// Trains once per IV dropout rate with otherwise identical settings and
/// reports the selected epoch's dev scores.
pub fn sweep_iv_dropout(corpus: &[Sentence], config: &TrainConfig, rates: &[f64]) -> Result<Vec<SweepRow>> {
    rates
        .iter()
        .map(|&rate| {
            let mut c = config.clone();
            c.iv_dropout = rate;
            let out = train(corpus, &c)?;
            let dev = out.log.iter().find(|l| l.epoch == out.best_epoch).and_then(|l| l.dev);
            Ok(SweepRow {
                iv_dropout: rate,
                seed: c.seed,
                best_epoch: out.best_epoch,
                dev,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
