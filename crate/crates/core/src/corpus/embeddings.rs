use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{for_each_line, Vocabulary, WordId};
use crate::error::{CorpusError, Result};

/// Vectors read from a word2vec text file for the entries of a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedRows {
    pub dim: usize,
    pub rows: BTreeMap<WordId, Vec<f64>>,
    /// Fraction of non-special vocabulary entries that received a vector.
    pub coverage: f64,
}

fn parse_err(line: usize, message: impl Into<String>) -> crate::Error {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
    .into()
}

/// Reads the word2vec text format: a `count dim` header, then one
/// `token v1 .. v_dim` line per vector. Tokens missing from `vocab` are
/// skipped; the first vector wins for repeated tokens.
pub fn parse_embeddings<R: BufRead>(reader: R, vocab: &Vocabulary, d_e: usize) -> Result<PretrainedRows> {
    let mut header: Option<(usize, usize)> = None;
    let mut seen = 0usize;
    let mut rows = BTreeMap::new();
    for_each_line(reader, |line_no, line| {
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let Some((count, dim)) = header else {
            let mut num = |what: &str| -> Result<usize> {
                fields
                    .next()
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| parse_err(line_no, format!("header: expected {what}")))
            };
            let count = num("count")?;
            let dim = num("dimension")?;
            if fields.next().is_some() {
                return Err(parse_err(line_no, "header: trailing fields"));
            }
            if dim != d_e {
                return Err(CorpusError::EmbeddingDim {
                    expected: d_e,
                    found: dim,
                }
                .into());
            }
            header = Some((count, dim));
            return Ok(());
        };
        let Some(token) = fields.next() else {
            // blank lines carry nothing
            return Ok(());
        };
        seen += 1;
        if seen > count {
            return Err(parse_err(line_no, format!("more than {count} vectors")));
        }
        let mut values = Vec::with_capacity(dim);
        for field in fields {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad number `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, "non-finite component"));
            }
            values.push(v);
        }
        if values.len() != dim {
            return Err(parse_err(
                line_no,
                format!("expected {dim} components, found {}", values.len()),
            ));
        }
        if let Some(id) = vocab.get(token) {
            if !vocab.flags(id).external {
                rows.entry(id).or_insert(values);
            }
        }
        Ok(())
    })?;
    let Some((count, dim)) = header else {
        return Err(parse_err(1, "missing header"));
    };
    if seen != count {
        return Err(parse_err(
            seen + 1,
            format!("header announces {count} vectors, file has {seen}"),
        ));
    }
    let total = vocab.words().count();
    Ok(PretrainedRows {
        dim,
        coverage: if total == 0 {
            0.0
        } else {
            rows.len() as f64 / total as f64
        },
        rows,
    })
}

pub fn load_embeddings<P: AsRef<Path>>(path: P, vocab: &Vocabulary, d_e: usize) -> Result<PretrainedRows> {
    parse_embeddings(BufReader::new(File::open(path)?), vocab, d_e)
}
