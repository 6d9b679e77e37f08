//! Forward and backward word lattices over a sentence.
//!
//! Positions are 1-based. Forward edges at `i` are vocabulary words ending
//! at `i` (prestate `i - len`); backward edges at `i` are words starting at
//! `i` (prestate `i + len`). Positions `0` and `n + 1` are the sentence
//! sentinels and carry no edges.

mod automaton;

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::corpus::{Vocabulary, WordId};

pub use automaton::{Automaton, PatternMatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub len: usize,
    pub word: WordId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    fwd: Vec<Vec<Edge>>,
    bwd: Vec<Vec<Edge>>,
}

impl Lattice {
    /// Sentence length.
    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    /// Words ending at position `i`, sorted by length.
    pub fn forward(&self, i: usize) -> &[Edge] {
        &self.fwd[i - 1]
    }

    /// Words starting at position `i`, sorted by length.
    pub fn backward(&self, i: usize) -> &[Edge] {
        &self.bwd[i - 1]
    }

    pub fn edge_count(&self) -> usize {
        self.fwd.iter().map(Vec::len).sum()
    }

    /// Every word occurrence as `(start, len, word)`, ordered by end
    /// position then length.
    pub fn occurrences(&self) -> impl Iterator<Item = (usize, usize, WordId)> + '_ {
        self.fwd
            .iter()
            .enumerate()
            .flat_map(|(idx, edges)| edges.iter().map(move |e| (idx + 2 - e.len, e.len, e.word)))
    }

    /// Same topology with each occurrence's word id rewritten by `f(start, len, word)`.
    /// Both directions see the same rewrite for a given occurrence.
    pub fn map_words<F>(&self, mut f: F) -> Lattice
    where
        F: FnMut(usize, usize, WordId) -> WordId,
    {
        let mut out = self.clone();
        for (idx, edges) in out.fwd.iter_mut().enumerate() {
            let end = idx + 1;
            for e in edges.iter_mut() {
                let start = end + 1 - e.len;
                e.word = f(start, e.len, e.word);
                let back = out.bwd[start - 1]
                    .iter_mut()
                    .find(|b| b.len == e.len)
                    .expect("backward edge mirrors forward edge");
                back.word = e.word;
            }
        }
        out
    }
}

/// Builds both lattices in one automaton pass.
///
/// Every position receives a length-1 edge; characters the vocabulary does
/// not contain get the `<OOV>` id. Edges longer than `max_word_len` are
/// dropped (length 1 is always kept).
pub fn build_lattice(chars: &[char], automaton: &Automaton, max_word_len: Option<usize>) -> Lattice {
    build_lattice_counted(chars, automaton, max_word_len).0
}

/// [`build_lattice`] that also reports the automaton's transition count.
pub fn build_lattice_counted(chars: &[char], automaton: &Automaton, max_word_len: Option<usize>) -> (Lattice, usize) {
    let n = chars.len();
    let cap = max_word_len.unwrap_or(usize::MAX).max(1);
    let mut fwd: Vec<Vec<Edge>> = vec![Vec::new(); n];
    let mut bwd: Vec<Vec<Edge>> = vec![Vec::new(); n];
    let steps = automaton.scan(chars, |end, m| {
        if m.len <= cap {
            let edge = Edge {
                len: m.len,
                word: m.word,
            };
            fwd[end].push(edge);
            bwd[end + 1 - m.len].push(edge);
        }
    });
    for i in 0..n {
        if !fwd[i].iter().any(|e| e.len == 1) {
            let unk = Edge {
                len: 1,
                word: Vocabulary::OOV,
            };
            fwd[i].push(unk);
            bwd[i].push(unk);
        }
    }
    for edges in fwd.iter_mut().chain(bwd.iter_mut()) {
        edges.sort_unstable();
    }
    (Lattice { fwd, bwd }, steps)
}

/// Forward edge counts per word length.
pub fn lattice_stats(lattice: &Lattice) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for (_, len, _) in lattice.occurrences() {
        *counts.entry(len).or_insert(0) += 1;
    }
    counts
}

/// Text adjacency listing, one `i l word` line per edge, forward section
/// first.
pub fn dump_lattice(lattice: &Lattice, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for (title, backward) in [("# forward", false), ("# backward", true)] {
        out.push_str(title);
        out.push('\n');
        for i in 1..=lattice.len() {
            let edges = if backward {
                lattice.backward(i)
            } else {
                lattice.forward(i)
            };
            for e in edges {
                let _ = writeln!(out, "{i} {} {}", e.len, vocab.text(e.word));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntryFlags;

    fn vocab(words: &[&str]) -> Vocabulary {
        let mut v = Vocabulary::new();
        for w in words {
            v.insert(w, EntryFlags::TRAIN).unwrap();
        }
        v
    }

    fn lens(edges: &[Edge]) -> Vec<usize> {
        edges.iter().map(|e| e.len).collect()
    }

    #[test]
    fn cab_lattice() {
        let v = vocab(&["a", "b", "c", "ab"]);
        let chars: Vec<char> = "cab".chars().collect();
        let lat = build_lattice(&chars, &Automaton::from_vocab(&v), None);
        assert_eq!(lens(lat.forward(1)), vec![1]);
        assert_eq!(lens(lat.forward(2)), vec![1]);
        assert_eq!(lens(lat.forward(3)), vec![1, 2]);
        assert_eq!(lens(lat.backward(2)), vec![1, 2]);
        assert_eq!(lens(lat.backward(3)), vec![1]);
        assert_eq!(lattice_stats(&lat), BTreeMap::from([(1, 3), (2, 1)]));
    }

    #[test]
    fn unseen_character_gets_oov_edge() {
        let v = vocab(&["a"]);
        let lat = build_lattice(&['Q'], &Automaton::from_vocab(&v), None);
        assert_eq!(
            lat.forward(1),
            &[Edge {
                len: 1,
                word: Vocabulary::OOV
            }]
        );
        assert_eq!(
            lat.backward(1),
            &[Edge {
                len: 1,
                word: Vocabulary::OOV
            }]
        );
    }

    /// Node numbering with <BOS> as node 1: node 5 is character position 4
    /// and receives words of lengths 1, 2 and 4 from nodes 4, 3 and 1.
    #[test]
    fn example_node_prestates() {
        let v = vocab(&["p", "q", "r", "s", "pqrs", "rs"]);
        let chars: Vec<char> = "pqrs".chars().collect();
        let lat = build_lattice(&chars, &Automaton::from_vocab(&v), None);
        assert_eq!(lens(lat.forward(4)), vec![1, 2, 4]);
        let prestate_nodes: Vec<usize> = lat.forward(4).iter().map(|e| 4 - e.len + 1).collect();
        assert_eq!(prestate_nodes, vec![4, 3, 1]);
        let inputs: Vec<&str> = lat.forward(4).iter().map(|e| v.text(e.word)).collect();
        assert_eq!(inputs, vec!["s", "rs", "pqrs"]);
    }

    #[test]
    fn max_word_len_cap() {
        let v = vocab(&["a", "b", "ab", "aab"]);
        let chars: Vec<char> = "aab".chars().collect();
        let ac = Automaton::from_vocab(&v);
        assert_eq!(lens(build_lattice(&chars, &ac, None).forward(3)), vec![1, 2, 3]);
        assert_eq!(lens(build_lattice(&chars, &ac, Some(2)).forward(3)), vec![1, 2]);
        let capped = build_lattice(&chars, &ac, Some(1));
        assert_eq!(capped.edge_count(), 3);
        let max_len = lattice_stats(&build_lattice(&chars, &ac, None))
            .keys()
            .max()
            .copied()
            .unwrap();
        assert!(max_len <= v.max_word_chars());
    }

    #[test]
    fn map_words_keeps_directions_consistent() {
        let v = vocab(&["a", "b", "ab"]);
        let ab = v.get("ab").unwrap();
        let lat = build_lattice(&['a', 'b'], &Automaton::from_vocab(&v), None);
        let dropped = lat.map_words(|_, len, w| if len > 1 { Vocabulary::OOV } else { w });
        assert_eq!(
            dropped.forward(2)[1],
            Edge {
                len: 2,
                word: Vocabulary::OOV
            }
        );
        assert_eq!(
            dropped.backward(1)[1],
            Edge {
                len: 2,
                word: Vocabulary::OOV
            }
        );
        assert_eq!(lat.forward(2)[1].word, ab);
        assert_eq!(lens(dropped.forward(2)), lens(lat.forward(2)));
    }

    #[test]
    fn dump_format() {
        let v = vocab(&["a", "b", "ab"]);
        let lat = build_lattice(&['a', 'b', 'z'], &Automaton::from_vocab(&v), None);
        let expected = "# forward\n1 1 a\n2 1 b\n2 2 ab\n3 1 <OOV>\n# backward\n1 1 a\n1 2 ab\n2 1 b\n3 1 <OOV>\n";
        assert_eq!(dump_lattice(&lat, &v), expected);
    }
}
