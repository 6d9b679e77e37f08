//! Emission and transition scoring of BMES paths and Viterbi decoding.

use crate::corpus::Tag;
use crate::error::NumericError;
use crate::numeric::{Graph, NodeId, ParamId, ParamStore};

const T: usize = Tag::COUNT;

/// Output-layer parameters: `W_s`, `b_s`, the 4x4 transition matrix and the
/// start row that scores the first tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceParams {
    pub w_s: ParamId,
    pub b_s: ParamId,
    pub trans: ParamId,
    pub start: ParamId,
}

impl InferenceParams {
    pub fn register(store: &mut ParamStore, input_dim: usize) -> Result<InferenceParams, NumericError> {
        Ok(InferenceParams {
            w_s: store.add_zeros("out.W", &[T, input_dim])?,
            b_s: store.add_zeros("out.b", &[T])?,
            trans: store.add_zeros("crf.trans", &[T, T])?,
            start: store.add_zeros("crf.start", &[T])?,
        })
    }
}

/// Plain-number view of everything a path score depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub emissions: Vec<[f64; T]>,
    /// `trans[j][k]` scores moving from tag `j` to tag `k`.
    pub trans: [[f64; T]; T],
    pub start: [f64; T],
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.emissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    /// Reads emissions from graph nodes and transitions from the store.
    pub fn from_graph(g: &Graph<'_>, emissions: &[NodeId], params: &InferenceParams) -> ScoreTable {
        let store = g.params();
        let emissions = emissions
            .iter()
            .map(|&e| {
                let v = g.value(e);
                [v[0], v[1], v[2], v[3]]
            })
            .collect();
        let t = store.value(params.trans).data();
        let mut trans = [[0.0; T]; T];
        for (j, row) in trans.iter_mut().enumerate() {
            row.copy_from_slice(&t[j * T..(j + 1) * T]);
        }
        let s = store.value(params.start).data();
        ScoreTable {
            emissions,
            trans,
            start: [s[0], s[1], s[2], s[3]],
        }
    }

    /// The same table with `eta` added to every non-gold emission entry.
    pub fn cost_augmented(&self, gold: &[Tag], eta: f64) -> ScoreTable {
        let mut out = self.clone();
        for (row, &y) in out.emissions.iter_mut().zip(gold) {
            for (k, v) in row.iter_mut().enumerate() {
                if k != y.index() {
                    *v += eta;
                }
            }
        }
        out
    }
}

/// A tag sequence and its score under the table it was decoded from.
#[derive(Debug, Clone, PartialEq)]
pub struct TagPath {
    pub tags: Vec<Tag>,
    pub score: f64,
}

/// `W_s h_i + b_s` for every position.
pub fn emissions(g: &mut Graph<'_>, states: &[NodeId], params: &InferenceParams) -> Result<Vec<NodeId>, NumericError> {
    states
        .iter()
        .map(|&h| g.affine(&[(params.w_s, h)], Some(params.b_s)))
        .collect()
}

/// `start[y_1] + f_1(y_1) + sum_{i>=2} (A[y_{i-1}][y_i] + f_i(y_i))`,
/// accumulated left to right.
pub fn score_path(table: &ScoreTable, tags: &[Tag]) -> f64 {
    let mut score = 0.0;
    let mut prev: Option<Tag> = None;
    for (row, &y) in table.emissions.iter().zip(tags) {
        let edge = match prev {
            None => table.start[y.index()],
            Some(p) => table.trans[p.index()][y.index()],
        };
        score += edge + row[y.index()];
        prev = Some(y);
    }
    score
}

/// Differentiable version of [`score_path`].
pub fn score_path_node(
    g: &mut Graph<'_>,
    emissions: &[NodeId],
    params: &InferenceParams,
    tags: &[Tag],
) -> Result<NodeId, NumericError> {
    let mut terms = Vec::with_capacity(2 * tags.len());
    let mut prev: Option<Tag> = None;
    for (&e, &y) in emissions.iter().zip(tags) {
        terms.push(match prev {
            None => g.element(params.start, y.index())?,
            Some(p) => g.element(params.trans, p.index() * T + y.index())?,
        });
        terms.push(g.pick(e, y.index())?);
        prev = Some(y);
    }
    g.sum(&terms)
}

/// Highest-scoring path. Among tied optima the lexicographically smallest
/// tag sequence is returned: best suffix scores are computed right to left,
/// then tags are chosen left to right taking the smallest index that still
/// reaches the optimum.
pub fn viterbi(table: &ScoreTable) -> TagPath {
    let n = table.len();
    if n == 0 {
        return TagPath {
            tags: Vec::new(),
            score: 0.0,
        };
    }
    // suffix[i][t]: best score of positions i..n given tag t at i.
    let mut suffix = vec![[0.0; T]; n];
    suffix[n - 1] = table.emissions[n - 1];
    for i in (0..n - 1).rev() {
        for t in 0..T {
            let best = (0..T)
                .map(|k| table.trans[t][k] + suffix[i + 1][k])
                .fold(f64::NEG_INFINITY, f64::max);
            suffix[i][t] = table.emissions[i][t] + best;
        }
    }
    let argmax = |cand: &dyn Fn(usize) -> f64| {
        let mut best = 0;
        for k in 1..T {
            if cand(k) > cand(best) {
                best = k;
            }
        }
        best
    };
    let mut tags = Vec::with_capacity(n);
    let mut cur = argmax(&|k| table.start[k] + suffix[0][k]);
    tags.push(cur);
    for row in suffix.iter().skip(1) {
        cur = argmax(&|k| table.trans[cur][k] + row[k]);
        tags.push(cur);
    }
    let tags: Vec<Tag> = tags.into_iter().map(|k| Tag::ALL[k]).collect();
    let score = score_path(table, &tags);
    TagPath { tags, score }
}

/// Maximizes `s(Y) + eta * #{i : y_i != gold_i}`. The returned score is the
/// augmented one.
pub fn viterbi_cost_augmented(table: &ScoreTable, gold: &[Tag], eta: f64) -> TagPath {
    viterbi(&table.cost_augmented(gold, eta))
}

/// Exhaustive search over all `4^n` paths, visiting them in lexicographic
/// order and keeping the first strict maximum. Exponential; meant for
/// checking small instances.
pub fn enumerate_best(table: &ScoreTable) -> TagPath {
    let n = table.len();
    let mut idx = vec![0usize; n];
    let mut best: Option<TagPath> = None;
    loop {
        let tags: Vec<Tag> = idx.iter().map(|&k| Tag::ALL[k]).collect();
        let score = score_path(table, &tags);
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(TagPath { tags, score });
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return best.expect("at least one path");
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < T {
                break;
            }
            idx[pos] = 0;
        }
    }
}
