//! A segmentation model: vocabularies, parameters and the forward pass.

use rand::RngCore;

use crate::corpus::{tags_to_spans, BigramVocab, PretrainedRows, Span, Tag, Vocabulary};
use crate::encoders::{
    dropout, embed_bigram, embed_lattice, embed_unigram, encode, EncoderDims, EncoderInput, EncoderParams, Variant,
};
use crate::error::{ConfigError, ModelIoError, NumericError, Result};
use crate::inference::{emissions, viterbi, InferenceParams, ScoreTable, TagPath};
use crate::lattice::{build_lattice, Automaton, Lattice};
use crate::numeric::{init_uniform, Graph, NodeId, ParamStore};
use crate::trainer::TrainConfig;

/// Training-time noise applied in the forward pass.
pub struct Noise<'r> {
    /// Conventional dropout rate on embedding outputs.
    pub dropout: f64,
    pub rng: &'r mut dyn RngCore,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub bigrams: Option<BigramVocab>,
    pub params: ParamStore,
    pub encoder: EncoderParams,
    pub output: InferenceParams,
    automaton: Option<Automaton>,
}

impl Model {
    /// A freshly initialized model.
    pub fn new(config: TrainConfig, vocab: Vocabulary, bigrams: Option<BigramVocab>) -> Result<Model> {
        let mut model = Model::layout(config, vocab, bigrams)?;
        let r = model.config.init_range;
        init_uniform(&mut model.params, -r, r, model.config.seed)?;
        Ok(model)
    }

    /// A model with every parameter registered and zeroed.
    pub fn layout(config: TrainConfig, vocab: Vocabulary, bigrams: Option<BigramVocab>) -> Result<Model> {
        config.validate()?;
        let variant = config.variant;
        if (variant == Variant::Bigram) != bigrams.is_some() {
            return Err(ConfigError::Invalid(format!(
                "variant {variant} {} a bigram vocabulary",
                if bigrams.is_some() { "does not take" } else { "requires" }
            ))
            .into());
        }
        let mut params = ParamStore::new();
        let dims = EncoderDims {
            embed: config.embed_dim,
            hidden: config.hidden_dim,
            word_rows: vocab.embedding_rows(),
            bigram_rows: bigrams.as_ref().map_or(0, BigramVocab::len),
            l_max: config.l_max,
        };
        let encoder = EncoderParams::register(&mut params, variant, dims)?;
        let output = InferenceParams::register(&mut params, encoder.output_dim())?;
        if !config.l2_embeddings {
            for id in encoder.embedding_params() {
                params.get_mut(id).weight_decay = false;
            }
        }
        let automaton = variant.is_dag().then(|| Automaton::from_vocab(&vocab));
        Ok(Model {
            config,
            vocab,
            bigrams,
            params,
            encoder,
            output,
            automaton,
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Copies pre-trained rows into the word embedding table.
    pub fn load_pretrained(&mut self, rows: &PretrainedRows) -> Result<()> {
        let table = self.params.value_mut(self.encoder.word_emb);
        if rows.dim != table.cols() {
            return Err(crate::error::CorpusError::EmbeddingDim {
                expected: table.cols(),
                found: rows.dim,
            }
            .into());
        }
        for (&id, row) in &rows.rows {
            let r = self.vocab.embedding_row(id);
            if r != Vocabulary::OOV && r < table.rows() {
                table.row_mut(r).copy_from_slice(row);
            }
        }
        Ok(())
    }

    /// Adds words to the lattice vocabulary. New entries are flagged
    /// external and read the `<OOV>` embedding; existing ones are left
    /// alone. Returns how many words were new.
    pub fn inject_external_vocab<S: AsRef<str>>(&mut self, words: &[S]) -> Result<usize> {
        if !self.variant().is_dag() {
            return Err(ModelIoError::UnsupportedVariant(self.variant().name()).into());
        }
        let mut added = 0;
        for w in words {
            let (_, new) = self.vocab.insert(w.as_ref(), crate::corpus::EntryFlags::EXTERNAL)?;
            added += usize::from(new);
        }
        if added > 0 {
            self.automaton = Some(Automaton::from_vocab(&self.vocab));
        }
        Ok(added)
    }

    /// Fails unless the model is of the given variant.
    pub fn expect_variant(&self, variant: Variant) -> Result<()> {
        if self.variant() != variant {
            return Err(ModelIoError::VariantMismatch {
                found: self.variant().name(),
                expected: variant.name(),
            }
            .into());
        }
        Ok(())
    }

    /// The lattice of a sentence (DAG variants only).
    pub fn lattice(&self, chars: &[char]) -> Option<Lattice> {
        self.automaton
            .as_ref()
            .map(|a| build_lattice(chars, a, self.config.max_word_len))
    }

    pub fn automaton(&self) -> Option<&Automaton> {
        self.automaton.as_ref()
    }

    /// Emission score nodes for every position. DAG variants read
    /// `lattice`, building one when it is `None`.
    pub fn emission_nodes(
        &self,
        g: &mut Graph<'_>,
        chars: &[char],
        lattice: Option<&Lattice>,
        noise: Option<Noise<'_>>,
    ) -> std::result::Result<Vec<NodeId>, NumericError> {
        let table = self.encoder.word_emb;
        let owned;
        let input = match self.variant() {
            Variant::Unigram | Variant::Bigram => {
                let mut z = match (&self.bigrams, self.encoder.bigram_emb) {
                    (Some(bigrams), Some(bt)) => embed_bigram(g, chars, &self.vocab, bigrams, table, bt)?,
                    _ => embed_unigram(g, chars, &self.vocab, table)?,
                };
                if let Some(noise) = noise {
                    for zi in z.iter_mut() {
                        *zi = dropout(g, *zi, noise.dropout, &mut *noise.rng)?;
                    }
                }
                EncoderInput::Sequence(z)
            }
            Variant::WsDag | Variant::WiDag => {
                let lattice = match lattice {
                    Some(l) => l,
                    None => {
                        owned = self.lattice(chars).expect("DAG models carry an automaton");
                        &owned
                    }
                };
                let mut inputs = embed_lattice(g, lattice, &self.vocab, table)?;
                if let Some(noise) = noise {
                    // One mask per word occurrence, shared by both directions.
                    for (start, len, _) in lattice.occurrences() {
                        let node = inputs[&(start, len)];
                        let masked = dropout(g, node, noise.dropout, &mut *noise.rng)?;
                        inputs.insert((start, len), masked);
                    }
                }
                EncoderInput::Lattice { lattice, inputs }
            }
        };
        let state = encode(g, &self.encoder, &input)?;
        emissions(g, &state.h, &self.output)
    }

    /// Emission and transition scores of a sentence.
    pub fn score_table(&self, chars: &[char]) -> Result<ScoreTable> {
        let mut g = Graph::new(&self.params);
        let em = self.emission_nodes(&mut g, chars, None, None)?;
        Ok(ScoreTable::from_graph(&g, &em, &self.output))
    }

    pub fn decode(&self, chars: &[char]) -> Result<TagPath> {
        if chars.is_empty() {
            return Ok(TagPath {
                tags: Vec::new(),
                score: 0.0,
            });
        }
        Ok(viterbi(&self.score_table(chars)?))
    }

    pub fn tag(&self, chars: &[char]) -> Result<Vec<Tag>> {
        Ok(self.decode(chars)?.tags)
    }

    pub fn segment(&self, chars: &[char]) -> Result<Vec<Span>> {
        Ok(tags_to_spans(&self.tag(chars)?))
    }
}
