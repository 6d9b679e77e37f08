//! Command implementations behind the `dagseg` binary.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dagseg::corpus::{
    evaluate, format_segmented, load_corpus, parse_raw_text, read_wordlist, EntryFlags, Sentence, Vocabulary,
};
use dagseg::error::{ConfigError, Error, Result};
use dagseg::lattice::{build_lattice, dump_lattice, Automaton};
use dagseg::model_io;
use dagseg::trainer::{segment_all, sweep_iv_dropout, train_with, EpochLog, Lanes, TrainConfig, TrainOptions};
use dagseg::Model;

#[derive(Debug, Parser)]
#[command(name = "dagseg", version, about = "Word segmentation with DAG-structured LSTMs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a segmented corpus.
    Train(TrainArgs),
    /// Segment raw text, one sentence per line.
    Segment(SegmentArgs),
    /// Score a model against a segmented corpus.
    Eval(EvalArgs),
    /// Train once per IV word dropout rate and report dev F.
    Sweep(SweepArgs),
    /// Print the forward and backward lattices of a sentence.
    LatticeDump(LatticeArgs),
}

/// Hyperparameter flags. Each one overrides the config file.
#[derive(Debug, Args, Default)]
pub struct ConfigFlags {
    /// Flat `key=value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "d-e")]
    pub d_e: Option<usize>,
    #[arg(long = "d-h")]
    pub d_h: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub iv_dropout: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub l_max: Option<usize>,
    /// Drop lattice edges longer than this many characters.
    #[arg(long)]
    pub max_word_len: Option<usize>,
    #[arg(long)]
    pub dev_fraction: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub init_range: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Search for the violating path without the margin cost.
    #[arg(long)]
    pub plain_decode_train: bool,
    /// Leave embedding tables out of the L2 penalty.
    #[arg(long)]
    pub no_l2_embeddings: bool,
}

impl ConfigFlags {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut config = TrainConfig::default();
        if let Some(path) = &self.config {
            config.apply(&fs::read_to_string(path)?)?;
        }
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            if let Some(v) = value {
                config.set(key, &v)?;
            }
            Ok(())
        };
        let s = |v: Option<f64>| v.map(|x| x.to_string());
        let u = |v: Option<usize>| v.map(|x| x.to_string());
        set("variant", self.variant.clone())?;
        set("seed", self.seed.map(|x| x.to_string()))?;
        set("epochs", u(self.epochs))?;
        set("d_e", u(self.d_e))?;
        set("d_h", u(self.d_h))?;
        set("learning_rate", s(self.learning_rate))?;
        set("l2", s(self.l2))?;
        set("margin", s(self.margin))?;
        set("dropout", s(self.dropout))?;
        set("iv_dropout", s(self.iv_dropout))?;
        set("batch", u(self.batch))?;
        set("l_max", u(self.l_max))?;
        set("max_word_len", u(self.max_word_len))?;
        set("dev_fraction", s(self.dev_fraction))?;
        set("workers", u(self.workers))?;
        set("init_range", s(self.init_range))?;
        set("clip_norm", s(self.clip_norm))?;
        if self.plain_decode_train {
            set("plain_decode_train", Some("true".into()))?;
        }
        if self.no_l2_embeddings {
            set("l2_embeddings", Some("false".into()))?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// Segmented training corpus.
    #[arg(long)]
    pub train: PathBuf,
    /// Where to write the model.
    #[arg(long)]
    pub out: PathBuf,
    /// Explicit dev corpus; otherwise a fraction of the training corpus is held out.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Pre-trained vectors in word2vec text format.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Also write the training log here.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Raw text (stdin when omitted).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Destination (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Extra lattice words, one per line; DAG models only.
    #[arg(long)]
    pub extra_vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Segmented gold corpus.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub extra_vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Also write a report with the model's config snapshot.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub flags: ConfigFlags,
    #[arg(long)]
    pub train: PathBuf,
    /// Comma-separated IV word dropout rates.
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    pub grid: String,
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    /// Take the vocabulary from a model.
    #[arg(long, conflicts_with = "vocab", required_unless_present = "vocab")]
    pub model: Option<PathBuf>,
    /// Take the vocabulary from a word list.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub sentence: String,
    #[arg(long)]
    pub max_word_len: Option<usize>,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    use dagseg::ErrorKind::*;
    match err.kind() {
        Config => 2,
        Io => 3,
        Data => 4,
        Numeric => 5,
    }
}

/// One-line rendering of an error for stderr.
pub fn error_line(err: &Error) -> String {
    let msg = err.to_string().replace('\n', " ");
    format!("error[{}]: {msg}", err.kind().as_str())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn config_comment(config: &TrainConfig) -> String {
    config.serialize().lines().map(|l| format!("# {l}\n")).collect()
}

fn with_extra_vocab(mut model: Model, path: &Option<PathBuf>) -> Result<Model> {
    if let Some(path) = path {
        let words = read_wordlist(path)?;
        model.inject_external_vocab(&words)?;
    }
    Ok(model)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(args, out),
        Command::Segment(args) => segment(args, out),
        Command::Eval(args) => eval(args, out),
        Command::Sweep(args) => sweep(args, out),
        Command::LatticeDump(args) => lattice_dump(args, out),
    }
}

fn train(args: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let config = args.flags.resolve()?;
    let corpus = load_corpus(&args.train)?;
    let dev = args.dev.as_ref().map(load_corpus).transpose()?;
    let mut log_file = args.log.as_deref().map(create).transpose()?;
    let header = config_comment(&config);
    out.write_all(header.as_bytes())?;
    if let Some(f) = log_file.as_mut() {
        f.write_all(header.as_bytes())?;
    }
    let mut write_err: Option<io::Error> = None;
    let mut on_epoch = |e: &EpochLog| {
        let line = format!("{e}\n");
        let res = out
            .write_all(line.as_bytes())
            .and_then(|_| out.flush())
            .and_then(|_| match log_file.as_mut() {
                Some(f) => f.write_all(line.as_bytes()),
                None => Ok(()),
            });
        if let Err(err) = res {
            write_err.get_or_insert(err);
        }
    };
    let options = TrainOptions {
        embeddings: args.embeddings.clone(),
        dev: dev.as_deref(),
        on_epoch: Some(&mut on_epoch),
        ..TrainOptions::default()
    };
    let result = train_with(&corpus, &config, options)?;
    if let Some(err) = write_err {
        return Err(err.into());
    }
    model_io::save(&result.model, &args.out)?;
    let mut summary = format!(
        "# best_epoch={} train={} dev={}\n",
        result.best_epoch, result.train_size, result.dev_size
    );
    if let Some(c) = result.embedding_coverage {
        summary.push_str(&format!("# embedding_coverage={c:.4}\n"));
    }
    out.write_all(summary.as_bytes())?;
    if let Some(mut f) = log_file {
        f.write_all(summary.as_bytes())?;
        f.flush()?;
    }
    Ok(())
}

fn segment(args: SegmentArgs, out: &mut dyn Write) -> Result<()> {
    let model = with_extra_vocab(model_io::load(&args.model)?, &args.extra_vocab)?;
    let sentences = match &args.input {
        Some(path) => parse_raw_text(BufReader::new(File::open(path)?))?,
        None => parse_raw_text(io::stdin().lock())?,
    };
    let lanes = Lanes::new(args.workers)?;
    let spans = segment_all(&model, &sentences, &lanes)?;
    let mut text = String::new();
    for (s, sp) in sentences.iter().zip(&spans) {
        text.push_str(&format_segmented(&s.chars, sp));
        text.push('\n');
    }
    match &args.output {
        Some(path) => {
            let mut f = create(path)?;
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn eval(args: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let model = with_extra_vocab(model_io::load(&args.model)?, &args.extra_vocab)?;
    let gold = load_corpus(&args.gold)?;
    let lanes = Lanes::new(args.workers)?;
    let pred = segment_all(&model, &gold, &lanes)?;
    let metrics = evaluate(&gold, &pred, &model.vocab)?;
    writeln!(out, "P\tR\tF\tOOV")?;
    writeln!(out, "{metrics}")?;
    if let Some(path) = &args.report {
        let mut f = create(path)?;
        f.write_all(config_comment(&model.config).as_bytes())?;
        writeln!(f, "P\tR\tF\tOOV")?;
        writeln!(f, "{metrics}")?;
        f.flush()?;
    }
    Ok(())
}

fn sweep(args: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let config = args.flags.resolve()?;
    let grid = args
        .grid
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| (0.0..=1.0).contains(v))
                .ok_or_else(|| ConfigError::BadValue {
                    key: "grid".into(),
                    value: s.into(),
                })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let corpus = load_corpus(&args.train)?;
    out.write_all(config_comment(&config).as_bytes())?;
    writeln!(out, "iv_dropout\tseed\tbest_epoch\tdev_F")?;
    for row in sweep_iv_dropout(&corpus, &config, &grid)? {
        writeln!(out, "{row}")?;
    }
    Ok(())
}

fn lattice_dump(args: LatticeArgs, out: &mut dyn Write) -> Result<()> {
    let vocab = match (&args.model, &args.vocab) {
        (Some(path), _) => model_io::load(path)?.vocab,
        (None, Some(path)) => {
            let mut v = Vocabulary::new();
            for w in read_wordlist(path)? {
                v.insert(&w, EntryFlags::TRAIN)?;
            }
            v
        }
        (None, None) => return Err(ConfigError::Invalid("either --model or --vocab is required".into()).into()),
    };
    let chars: Vec<char> = Sentence::from_words(&[args.sentence.as_str()]).chars;
    if chars.is_empty() {
        return Err(ConfigError::Invalid("empty sentence".into()).into());
    }
    let lattice = build_lattice(&chars, &Automaton::from_vocab(&vocab), args.max_word_len);
    out.write_all(dump_lattice(&lattice, &vocab).as_bytes())?;
    Ok(())
}
