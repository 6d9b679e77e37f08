use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{for_each_line, Sentence};
use crate::error::{CorpusError, Result};

pub type WordId = usize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EntryFlags {
    pub from_train: bool,
    pub external: bool,
}

impl EntryFlags {
    pub const TRAIN: EntryFlags = EntryFlags {
        from_train: true,
        external: false,
    };
    pub const EXTERNAL: EntryFlags = EntryFlags {
        from_train: false,
        external: true,
    };

    pub fn to_bits(self) -> u8 {
        u8::from(self.from_train) | (u8::from(self.external) << 1)
    }

    pub fn from_bits(bits: u8) -> Option<EntryFlags> {
        (bits & !0b11 == 0).then_some(EntryFlags {
            from_train: bits & 1 != 0,
            external: bits & 2 != 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    text: String,
    special: bool,
    flags: EntryFlags,
}

/// Word vocabulary with a dense id space.
///
/// Ids 0, 1 and 2 are the `<OOV>`, `<BOS>` and `<EOS>` specials. Specials
/// are not reachable through string lookup, so a corpus word spelled
/// `<OOV>` is an ordinary entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<Entry>,
    index: HashMap<String, WordId>,
    chars: HashMap<char, WordId>,
}

const SPECIALS: [&str; 3] = ["<OOV>", "<BOS>", "<EOS>"];

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub const OOV: WordId = 0;
    pub const BOS: WordId = 1;
    pub const EOS: WordId = 2;

    pub fn new() -> Vocabulary {
        Vocabulary {
            entries: SPECIALS
                .iter()
                .map(|s| Entry {
                    text: s.to_string(),
                    special: true,
                    flags: EntryFlags::default(),
                })
                .collect(),
            index: HashMap::new(),
            chars: HashMap::new(),
        }
    }

    /// Adds `word` unless present. Returns its id and whether it was new.
    /// Existing entries keep their flags.
    pub fn insert(&mut self, word: &str, flags: EntryFlags) -> Result<(WordId, bool)> {
        if word.is_empty() {
            return Err(CorpusError::EmptyWord.into());
        }
        if let Some(&id) = self.index.get(word) {
            return Ok((id, false));
        }
        let id = self.entries.len();
        self.entries.push(Entry {
            text: word.to_string(),
            special: false,
            flags,
        });
        self.index.insert(word.to_string(), id);
        let mut it = word.chars();
        if let (Some(c), None) = (it.next(), it.next()) {
            self.chars.insert(c, id);
        }
        Ok((id, true))
    }

    /// Rebuilds a vocabulary from a serialized listing. The first three
    /// entries must be the specials in their fixed order.
    pub fn from_listing<I>(listing: I) -> std::result::Result<Vocabulary, String>
    where
        I: IntoIterator<Item = (String, bool, EntryFlags)>,
    {
        let mut vocab = Vocabulary::new();
        for (pos, (text, special, flags)) in listing.into_iter().enumerate() {
            if pos < SPECIALS.len() {
                if !special || text != SPECIALS[pos] {
                    return Err(format!("entry {pos} must be special {}", SPECIALS[pos]));
                }
                continue;
            }
            if special {
                return Err(format!("unexpected special entry at {pos}"));
            }
            match vocab.insert(&text, flags) {
                Ok((_, true)) => {}
                Ok((_, false)) => return Err(format!("duplicate entry `{text}`")),
                Err(_) => return Err(format!("empty entry at {pos}")),
            }
        }
        Ok(vocab)
    }

    /// (text, is_special, flags) for every id in order.
    pub fn listing(&self) -> impl Iterator<Item = (&str, bool, EntryFlags)> {
        self.entries.iter().map(|e| (e.text.as_str(), e.special, e.flags))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.len() == SPECIALS.len()
    }

    pub fn get(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Id of a single character, `<OOV>` when absent.
    pub fn char_id(&self, c: char) -> WordId {
        self.chars.get(&c).copied().unwrap_or(Self::OOV)
    }

    pub fn text(&self, id: WordId) -> &str {
        &self.entries[id].text
    }

    pub fn flags(&self, id: WordId) -> EntryFlags {
        self.entries[id].flags
    }

    pub fn is_special(&self, id: WordId) -> bool {
        self.entries[id].special
    }

    /// True when `word` was seen as a gold word or character in training.
    pub fn in_train(&self, word: &str) -> bool {
        self.get(word).is_some_and(|id| self.entries[id].flags.from_train)
    }

    /// Non-special entries as (id, text).
    pub fn words(&self) -> impl Iterator<Item = (WordId, &str)> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.special)
            .map(|(id, e)| (id, e.text.as_str()))
    }

    /// Embedding row for a word id. External entries have no trained
    /// embedding and share the `<OOV>` row.
    pub fn embedding_row(&self, id: WordId) -> usize {
        if self.entries[id].flags.external {
            Self::OOV
        } else {
            id
        }
    }

    /// Number of rows an embedding table needs: every non-external id.
    pub fn embedding_rows(&self) -> usize {
        self.entries
            .iter()
            .rposition(|e| !e.flags.external)
            .map_or(0, |p| p + 1)
    }

    pub fn max_word_chars(&self) -> usize {
        self.words().map(|(_, w)| w.chars().count()).max().unwrap_or(0)
    }
}

/// Collects every gold word and every character of the corpus, in order of
/// first occurrence (a word's characters precede the word itself).
pub fn build_train_vocab(corpus: &[Sentence]) -> Vocabulary {
    let mut vocab = Vocabulary::new();
    let mut buf = [0u8; 4];
    for sentence in corpus {
        for word in sentence.words() {
            for c in word.chars() {
                // non-empty by construction
                let _ = vocab.insert(c.encode_utf8(&mut buf), EntryFlags::TRAIN);
            }
            let _ = vocab.insert(&word, EntryFlags::TRAIN);
        }
    }
    vocab
}

/// One word per line; surrounding whitespace trimmed, blank lines skipped.
pub fn parse_wordlist<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut words = Vec::new();
    for_each_line(reader, |_, line| {
        let w = line.trim();
        if !w.is_empty() {
            words.push(w.to_string());
        }
        Ok(())
    })?;
    Ok(words)
}

pub fn read_wordlist<P: AsRef<Path>>(path: P) -> Result<Vec<String>> {
    parse_wordlist(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BigramUnit {
    Bos,
    Eos,
    Char(char),
}

/// Vocabulary of consecutive character pairs, including the boundary pairs
/// `(<BOS>, x_1)` and `(x_n, <EOS>)`. Id 0 is `<OOV>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BigramVocab {
    pairs: Vec<(BigramUnit, BigramUnit)>,
    index: HashMap<(BigramUnit, BigramUnit), usize>,
}

impl BigramVocab {
    pub const OOV: usize = 0;

    pub fn build(corpus: &[Sentence]) -> BigramVocab {
        let mut vocab = BigramVocab::default();
        for sentence in corpus {
            for pair in Self::pairs_of(&sentence.chars) {
                vocab.insert(pair);
            }
        }
        vocab
    }

    pub fn from_pairs<I>(pairs: I) -> std::result::Result<BigramVocab, String>
    where
        I: IntoIterator<Item = (BigramUnit, BigramUnit)>,
    {
        let mut vocab = BigramVocab::default();
        for pair in pairs {
            if !vocab.insert(pair) {
                return Err(format!("duplicate bigram {pair:?}"));
            }
        }
        Ok(vocab)
    }

    fn insert(&mut self, pair: (BigramUnit, BigramUnit)) -> bool {
        if self.index.contains_key(&pair) {
            return false;
        }
        self.pairs.push(pair);
        self.index.insert(pair, self.pairs.len());
        true
    }

    /// The n+1 pairs of a sentence, from `(<BOS>, x_1)` to `(x_n, <EOS>)`.
    pub fn pairs_of(chars: &[char]) -> Vec<(BigramUnit, BigramUnit)> {
        let units: Vec<BigramUnit> = std::iter::once(BigramUnit::Bos)
            .chain(chars.iter().map(|&c| BigramUnit::Char(c)))
            .chain(std::iter::once(BigramUnit::Eos))
            .collect();
        units.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn id(&self, left: BigramUnit, right: BigramUnit) -> usize {
        self.index.get(&(left, right)).copied().unwrap_or(Self::OOV)
    }

    /// Pairs in id order, excluding `<OOV>`.
    pub fn pairs(&self) -> &[(BigramUnit, BigramUnit)] {
        &self.pairs
    }

    /// Table rows including `<OOV>`.
    pub fn len(&self) -> usize {
        self.pairs.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}
