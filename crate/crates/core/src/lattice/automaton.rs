use std::collections::{BTreeMap, VecDeque};

use crate::corpus::{Vocabulary, WordId};

type StateId = u32;

const ROOT: StateId = 0;
const NONE: StateId = StateId::MAX;

/// A vocabulary word recognized by the automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternMatch {
    /// Length in characters.
    pub len: usize,
    pub word: WordId,
}

/// Aho-Corasick automaton over characters.
///
/// Transitions are stored per state as a char-sorted list. `dict` links
/// point to the nearest state on the failure chain that ends a pattern, so
/// reporting all matches at a position costs only the number of matches.
#[derive(Debug, Clone)]
pub struct Automaton {
    next: Vec<Vec<(char, StateId)>>,
    fail: Vec<StateId>,
    output: Vec<Option<PatternMatch>>,
    dict: Vec<StateId>,
    max_len: usize,
}

impl Automaton {
    /// Builds from (word, id) pairs. Later duplicates of a word are ignored;
    /// empty words never match.
    pub fn new<'a, I>(patterns: I) -> Automaton
    where
        I: IntoIterator<Item = (&'a str, WordId)>,
    {
        let mut trie: Vec<BTreeMap<char, StateId>> = vec![BTreeMap::new()];
        let mut output: Vec<Option<PatternMatch>> = vec![None];
        let mut max_len = 0;
        for (word, id) in patterns {
            let mut state = ROOT;
            let mut len = 0;
            for c in word.chars() {
                len += 1;
                let fresh = trie.len() as StateId;
                let target = *trie[state as usize].entry(c).or_insert(fresh);
                if target == fresh {
                    trie.push(BTreeMap::new());
                    output.push(None);
                }
                state = target;
            }
            if len > 0 && output[state as usize].is_none() {
                output[state as usize] = Some(PatternMatch { len, word: id });
                max_len = max_len.max(len);
            }
        }

        let next: Vec<Vec<(char, StateId)>> = trie.into_iter().map(|m| m.into_iter().collect()).collect();
        let mut fail = vec![ROOT; next.len()];
        let mut dict = vec![NONE; next.len()];
        let mut queue = VecDeque::new();
        for &(_, child) in &next[ROOT as usize] {
            queue.push_back(child);
        }
        while let Some(state) = queue.pop_front() {
            for &(c, child) in &next[state as usize] {
                let mut f = fail[state as usize];
                let target = loop {
                    if let Some(t) = goto(&next, f, c) {
                        break t;
                    }
                    if f == ROOT {
                        break ROOT;
                    }
                    f = fail[f as usize];
                };
                // root children already fail to root
                let target = if state == ROOT || target == child { ROOT } else { target };
                fail[child as usize] = target;
                dict[child as usize] = if output[target as usize].is_some() {
                    target
                } else {
                    dict[target as usize]
                };
                queue.push_back(child);
            }
        }
        Automaton {
            next,
            fail,
            output,
            dict,
            max_len,
        }
    }

    /// Automaton over every non-special vocabulary entry, in id order.
    pub fn from_vocab(vocab: &Vocabulary) -> Automaton {
        Automaton::new(vocab.words().map(|(id, w)| (w, id)))
    }

    pub fn state_count(&self) -> usize {
        self.next.len()
    }

    /// Longest pattern, in characters.
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Streams every match as `(end, match)`, `end` being the 0-based index
    /// of the match's last character. Matches at one end position arrive
    /// longest first. Returns the number of state transitions taken
    /// (goto, failure, or staying at the root), which is at most `2n`.
    pub fn scan<F>(&self, chars: &[char], mut on_match: F) -> usize
    where
        F: FnMut(usize, PatternMatch),
    {
        let mut steps = 0;
        let mut state = ROOT;
        for (end, &c) in chars.iter().enumerate() {
            loop {
                steps += 1;
                if let Some(t) = goto(&self.next, state, c) {
                    state = t;
                    break;
                }
                if state == ROOT {
                    break;
                }
                state = self.fail[state as usize];
            }
            let mut s = if self.output[state as usize].is_some() {
                state
            } else {
                self.dict[state as usize]
            };
            while s != NONE {
                if let Some(m) = self.output[s as usize] {
                    on_match(end, m);
                }
                s = self.dict[s as usize];
            }
        }
        steps
    }
}

fn goto(next: &[Vec<(char, StateId)>], state: StateId, c: char) -> Option<StateId> {
    let edges = &next[state as usize];
    edges.binary_search_by_key(&c, |&(k, _)| k).ok().map(|i| edges[i].1)
}
