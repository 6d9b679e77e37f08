//! Segmented corpora, BMES tagging, vocabularies, evaluation and
//! pre-trained embedding files.
//!
//! Characters are Unicode scalar values. Word spans are 1-based and
//! inclusive on both ends, so a sentence of `n` characters is covered by
//! spans whose union is exactly `1..=n`.

mod embeddings;
mod metrics;
mod vocab;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{CorpusError, Result};

pub use embeddings::{load_embeddings, parse_embeddings, PretrainedRows};
pub use metrics::{evaluate, SegMetrics};
pub use vocab::{
    build_train_vocab, parse_wordlist, read_wordlist, BigramUnit, BigramVocab, EntryFlags, Vocabulary, WordId,
};

/// Position-in-word tag. The derived ordering (B < M < E < S) is the
/// index order used by score tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    B,
    M,
    E,
    S,
}

impl Tag {
    pub const ALL: [Tag; 4] = [Tag::B, Tag::M, Tag::E, Tag::S];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Tag> {
        Tag::ALL.get(index).copied()
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Tag::B => 'B',
            Tag::M => 'M',
            Tag::E => 'E',
            Tag::S => 'S',
        };
        write!(f, "{c}")
    }
}

/// A word as a 1-based inclusive character range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    /// The characters covered by this span.
    pub fn slice<'a>(&self, chars: &'a [char]) -> &'a [char] {
        &chars[self.start - 1..self.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub chars: Vec<char>,
    pub gold: Option<Vec<Span>>,
}

impl Sentence {
    pub fn raw(chars: Vec<char>) -> Sentence {
        Sentence { chars, gold: None }
    }

    /// Builds a gold-segmented sentence from its words.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Sentence {
        let mut chars = Vec::new();
        let mut gold = Vec::with_capacity(words.len());
        for word in words {
            let start = chars.len() + 1;
            chars.extend(word.as_ref().chars());
            if chars.len() >= start {
                gold.push(Span::new(start, chars.len()));
            }
        }
        Sentence {
            chars,
            gold: Some(gold),
        }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Gold words as strings, empty when the sentence is unsegmented.
    pub fn words(&self) -> Vec<String> {
        match &self.gold {
            Some(spans) => spans_to_words(&self.chars, spans),
            None => Vec::new(),
        }
    }

    pub fn gold_tags(&self) -> Option<Result<Vec<Tag>>> {
        self.gold.as_ref().map(|spans| spans_to_tags(spans, self.chars.len()))
    }
}

pub fn spans_to_words(chars: &[char], spans: &[Span]) -> Vec<String> {
    spans.iter().map(|s| s.slice(chars).iter().collect()).collect()
}

/// Renders words separated by single spaces, the corpus line format.
pub fn format_segmented(chars: &[char], spans: &[Span]) -> String {
    spans_to_words(chars, spans).join(" ")
}

// A lone CR counts as a separator: a word ending in CR could not survive
// being written back out before a newline.
fn is_separator(c: char) -> bool {
    c == ' ' || c == '\t' || c == '\r'
}

fn trim_line_end(bytes: &[u8]) -> &[u8] {
    let mut end = bytes.len();
    while end > 0 && (bytes[end - 1] == b'\n' || bytes[end - 1] == b'\r') {
        end -= 1;
    }
    &bytes[..end]
}

fn for_each_line<R, F>(mut reader: R, mut f: F) -> Result<()>
where
    R: BufRead,
    F: FnMut(usize, &str) -> Result<()>,
{
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        line_no += 1;
        let text = std::str::from_utf8(trim_line_end(&buf)).map_err(|_| CorpusError::Decode { line: line_no })?;
        f(line_no, text)?;
    }
}

/// Parses a segmented corpus: one sentence per line, words separated by
/// ASCII space, tab or CR. Blank lines are skipped.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    for_each_line(reader, |_, line| {
        let words: Vec<&str> = line.split(is_separator).filter(|w| !w.is_empty()).collect();
        if !words.is_empty() {
            out.push(Sentence::from_words(&words));
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn load_corpus<P: AsRef<Path>>(path: P) -> Result<Vec<Sentence>> {
    parse_corpus(BufReader::new(File::open(path)?))
}

/// Reads unsegmented text, one sentence per line. Separators are dropped;
/// blank lines are kept as empty sentences so output lines stay aligned.
pub fn parse_raw_text<R: BufRead>(reader: R) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    for_each_line(reader, |_, line| {
        out.push(Sentence::raw(line.chars().filter(|&c| !is_separator(c)).collect()));
        Ok(())
    })?;
    Ok(out)
}

/// Checks that spans tile `1..=n` exactly, in order.
pub fn validate_spans(spans: &[Span], n: usize) -> Result<()> {
    let mut next = 1;
    for span in spans {
        if span.start != next {
            let what = if span.start < next { "overlap" } else { "gap" };
            return Err(CorpusError::Validation(format!(
                "{what} at position {next} (span {}..{})",
                span.start, span.end
            ))
            .into());
        }
        if span.end < span.start {
            return Err(CorpusError::Validation(format!("empty span {}..{}", span.start, span.end)).into());
        }
        next = span.end + 1;
    }
    if next != n + 1 {
        return Err(
            CorpusError::Validation(format!("spans cover 1..{} but sentence has {n} characters", next - 1)).into(),
        );
    }
    Ok(())
}

pub fn spans_to_tags(spans: &[Span], n: usize) -> Result<Vec<Tag>> {
    validate_spans(spans, n)?;
    let mut tags = Vec::with_capacity(n);
    for span in spans {
        if span.len() == 1 {
            tags.push(Tag::S);
        } else {
            tags.push(Tag::B);
            tags.extend(std::iter::repeat_n(Tag::M, span.len() - 2));
            tags.push(Tag::E);
        }
    }
    Ok(tags)
}

/// Converts any tag sequence into a segmentation.
///
/// A word opens at `B` or `S` (closing any word still open) and closes at
/// `E` or `S`. An `M` or `E` with no open word opens one. A word still open
/// at the end of the sequence is closed there.
pub fn tags_to_spans(tags: &[Tag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (idx, &tag) in tags.iter().enumerate() {
        let pos = idx + 1;
        if matches!(tag, Tag::B | Tag::S) {
            if let Some(start) = open.take() {
                spans.push(Span::new(start, pos - 1));
            }
        }
        let start = *open.get_or_insert(pos);
        if matches!(tag, Tag::E | Tag::S) {
            spans.push(Span::new(start, pos));
            open = None;
        }
    }
    if let Some(start) = open {
        spans.push(Span::new(start, tags.len()));
    }
    spans
}
