use std::fmt::Write;
use std::str::FromStr;

use crate::encoders::Variant;
use crate::error::ConfigError;

/// Hyperparameters and run settings. Defaults follow the published
/// configuration; the remaining knobs default to values that keep runs
/// deterministic and unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    /// Character/word embedding size.
    pub embed_dim: usize,
    /// LSTM hidden size per direction.
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Per-position margin cost.
    pub margin: f64,
    /// Dropout rate on embedding outputs.
    pub dropout: f64,
    /// Rate at which multi-character lattice words are read as `<OOV>`.
    pub iv_dropout: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub epochs: usize,
    /// Size of the per-length weight families of the WI encoder.
    pub l_max: usize,
    /// Drop lattice edges longer than this.
    pub max_word_len: Option<usize>,
    pub dev_fraction: f64,
    pub workers: usize,
    /// Parameters start uniform in `(-init_range, init_range)`.
    pub init_range: f64,
    pub epsilon: f64,
    pub clip_norm: Option<f64>,
    /// Decode without the margin cost when searching for the violating path.
    pub plain_decode_train: bool,
    /// Apply the L2 penalty to embedding tables too.
    pub l2_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::WiDag,
            embed_dim: 100,
            hidden_dim: 150,
            learning_rate: 0.2,
            l2: 0.05,
            margin: 0.2,
            dropout: 0.2,
            iv_dropout: 0.5,
            batch_size: 128,
            seed: 1,
            epochs: 30,
            l_max: 4,
            max_word_len: None,
            dev_fraction: 0.1,
            workers: 1,
            init_range: 0.05,
            epsilon: 1e-6,
            clip_norm: None,
            plain_decode_train: false,
            l2_embeddings: true,
        }
    }
}

pub const CONFIG_KEYS: [&str; 20] = [
    "variant",
    "d_e",
    "d_h",
    "learning_rate",
    "l2",
    "margin",
    "dropout",
    "iv_dropout",
    "batch",
    "seed",
    "epochs",
    "l_max",
    "max_word_len",
    "dev_fraction",
    "workers",
    "init_range",
    "epsilon",
    "clip_norm",
    "plain_decode_train",
    "l2_embeddings",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

impl TrainConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "variant" => self.variant = value.parse()?,
            "d_e" => self.embed_dim = parse(key, value)?,
            "d_h" => self.hidden_dim = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "l2" => self.l2 = parse(key, value)?,
            "margin" => self.margin = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "iv_dropout" => self.iv_dropout = parse(key, value)?,
            "batch" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "l_max" => self.l_max = parse(key, value)?,
            "max_word_len" => self.max_word_len = parse_opt(key, value)?,
            "dev_fraction" => self.dev_fraction = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "init_range" => self.init_range = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "clip_norm" => self.clip_norm = parse_opt(key, value)?,
            "plain_decode_train" => self.plain_decode_train = parse(key, value)?,
            "l2_embeddings" => self.l2_embeddings = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Reads `key=value` lines over the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<TrainConfig, ConfigError> {
        let mut config = TrainConfig::default();
        config.apply(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `key=value` lines on top of the current values without
    /// validating.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: idx + 1 })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Every key on its own line, in a form [`TrainConfig::parse`] reads
    /// back exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let pairs: [(&str, String); 20] = [
            ("variant", self.variant.to_string()),
            ("d_e", self.embed_dim.to_string()),
            ("d_h", self.hidden_dim.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("l2", self.l2.to_string()),
            ("margin", self.margin.to_string()),
            ("dropout", self.dropout.to_string()),
            ("iv_dropout", self.iv_dropout.to_string()),
            ("batch", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("epochs", self.epochs.to_string()),
            ("l_max", self.l_max.to_string()),
            ("max_word_len", show_opt(&self.max_word_len)),
            ("dev_fraction", self.dev_fraction.to_string()),
            ("workers", self.workers.to_string()),
            ("init_range", self.init_range.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("clip_norm", show_opt(&self.clip_norm)),
            ("plain_decode_train", self.plain_decode_train.to_string()),
            ("l2_embeddings", self.l2_embeddings.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: &str| Err(ConfigError::Invalid(msg.into()));
        let rate = |v: f64| (0.0..=1.0).contains(&v);
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return invalid("d_e and d_h must be positive");
        }
        if self.batch_size == 0 || self.workers == 0 || self.l_max == 0 {
            return invalid("batch, workers and l_max must be positive");
        }
        if self.max_word_len == Some(0) {
            return invalid("max_word_len must be positive");
        }
        if !rate(self.dropout) || self.dropout >= 1.0 {
            return invalid("dropout must be in [0, 1)");
        }
        if !rate(self.iv_dropout) {
            return invalid("iv_dropout must be in [0, 1]");
        }
        if !rate(self.dev_fraction) || self.dev_fraction >= 1.0 {
            return invalid("dev_fraction must be in [0, 1)");
        }
        let nonneg = [self.learning_rate, self.l2, self.margin, self.epsilon];
        if nonneg.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("learning_rate, l2, margin and epsilon must be finite and non-negative");
        }
        if !(self.init_range.is_finite() && self.init_range > 0.0) {
            return invalid("init_range must be positive");
        }
        if self.clip_norm.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return invalid("clip_norm must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_table() {
        let c = TrainConfig::default();
        assert_eq!((c.embed_dim, c.hidden_dim, c.batch_size), (100, 150, 128));
        assert_eq!((c.learning_rate, c.l2, c.margin), (0.2, 0.05, 0.2));
        assert_eq!((c.dropout, c.iv_dropout), (0.2, 0.5));
    }

    #[test]
    fn serialize_round_trips() {
        let mut c = TrainConfig::default();
        c.variant = Variant::Bigram;
        c.max_word_len = Some(2);
        c.clip_norm = Some(5.0);
        c.learning_rate = 0.1 + 0.2;
        let back = TrainConfig::parse(&c.serialize()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.serialize().lines().count(), CONFIG_KEYS.len());
        for (line, key) in c.serialize().lines().zip(CONFIG_KEYS) {
            assert!(line.starts_with(&format!("{key}=")));
        }
    }

    #[test]
    fn comments_and_overrides() {
        let c = TrainConfig::parse("# run\nd_h = 8\n\nvariant=ws-dag\n").unwrap();
        assert_eq!(c.hidden_dim, 8);
        assert_eq!(c.variant, Variant::WsDag);
        assert_eq!(c.embed_dim, 100);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            TrainConfig::parse("d_h"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(TrainConfig::parse("x=1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(TrainConfig::parse("d_h=a"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(
            TrainConfig::parse("variant=crf"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            TrainConfig::parse("iv_dropout=1.5"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(TrainConfig::parse("d_e=0"), Err(ConfigError::Invalid(_))));
        assert!(TrainConfig::parse("iv_dropout=1").is_ok());
    }
}
