use rand::Rng;

use super::EdgeInputs;
use crate::corpus::{BigramVocab, Vocabulary};
use crate::error::NumericError;
use crate::lattice::Lattice;
use crate::numeric::{Graph, NodeId, ParamId};

/// `z_i = e[x_i]`, unseen characters reading the `<OOV>` row.
pub fn embed_unigram(
    g: &mut Graph<'_>,
    chars: &[char],
    vocab: &Vocabulary,
    table: ParamId,
) -> Result<Vec<NodeId>, NumericError> {
    chars
        .iter()
        .map(|&c| g.row(table, vocab.embedding_row(vocab.char_id(c))))
        .collect()
}

/// `z_i = e[x_i] ++ e[(x_{i-1}, x_i)] ++ e[(x_i, x_{i+1})]` with `<BOS>` and
/// `<EOS>` closing the boundary pairs. Unseen pairs read the bigram `<OOV>`
/// row.
pub fn embed_bigram(
    g: &mut Graph<'_>,
    chars: &[char],
    vocab: &Vocabulary,
    bigrams: &BigramVocab,
    char_table: ParamId,
    bigram_table: ParamId,
) -> Result<Vec<NodeId>, NumericError> {
    let pairs = BigramVocab::pairs_of(chars);
    let mut pair_nodes = Vec::with_capacity(pairs.len());
    for &(l, r) in &pairs {
        pair_nodes.push(g.row(bigram_table, bigrams.id(l, r))?);
    }
    let unigrams = embed_unigram(g, chars, vocab, char_table)?;
    unigrams
        .into_iter()
        .enumerate()
        .map(|(i, u)| g.concat(&[u, pair_nodes[i], pair_nodes[i + 1]]))
        .collect()
}

/// One embedding lookup per lattice word occurrence.
pub fn embed_lattice(
    g: &mut Graph<'_>,
    lattice: &Lattice,
    vocab: &Vocabulary,
    table: ParamId,
) -> Result<EdgeInputs, NumericError> {
    let mut inputs = EdgeInputs::new();
    for (start, len, word) in lattice.occurrences() {
        let node = g.row(table, vocab.embedding_row(word))?;
        inputs.insert((start, len), node);
    }
    Ok(inputs)
}

/// Inverted dropout: each component survives with probability `1 - rate`
/// and is scaled by `1 / (1 - rate)`.
pub fn dropout<R: Rng + ?Sized>(g: &mut Graph<'_>, x: NodeId, rate: f64, rng: &mut R) -> Result<NodeId, NumericError> {
    if rate <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 - rate;
    let scale = if keep > 0.0 { 1.0 / keep } else { 0.0 };
    let mask = (0..g.value(x).len())
        .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
        .collect();
    g.mask(x, mask)
}
