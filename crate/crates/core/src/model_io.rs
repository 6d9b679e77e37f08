//! Single-file model container.
//!
//! ```text
//! magic "DAGSEGM\0" | u32 version | u64 payload length | payload | SHA-256
//! ```
//!
//! The checksum covers every byte before it. The payload holds the variant
//! code, the config snapshot as `key=value` text, the word vocabulary with
//! flags, the optional bigram vocabulary and every named tensor. All
//! integers are little-endian. AdaGrad accumulators are not stored.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::{BigramUnit, BigramVocab, EntryFlags, Vocabulary};
use crate::encoders::Variant;
use crate::error::{ModelIoError, Result};
use crate::model::Model;
use crate::trainer::TrainConfig;

pub const MAGIC: [u8; 8] = *b"DAGSEGM\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;
const CHECKSUM_LEN: usize = 32;

const SPECIAL_BIT: u8 = 0x80;
const NO_BIGRAMS: u8 = 0;
const HAS_BIGRAMS: u8 = 1;
const TRAINABLE_BIT: u8 = 1;
const DECAY_BIT: u8 = 2;

fn variant_code(v: Variant) -> u8 {
    match v {
        Variant::Unigram => 0,
        Variant::Bigram => 1,
        Variant::WsDag => 2,
        Variant::WiDag => 3,
    }
}

fn malformed(msg: impl Into<String>) -> ModelIoError {
    ModelIoError::Malformed(msg.into())
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("length fits in u32");
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_unit(out: &mut Vec<u8>, u: BigramUnit) {
    let (kind, c) = match u {
        BigramUnit::Bos => (0u8, 0u32),
        BigramUnit::Eos => (1, 0),
        BigramUnit::Char(c) => (2, c as u32),
    };
    out.push(kind);
    out.extend_from_slice(&c.to_le_bytes());
}

/// Serializes everything but the container framing.
pub fn encode_payload(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(variant_code(model.variant()));
    put_str(&mut out, &model.config.serialize());

    put_u32(&mut out, model.vocab.len());
    for (text, special, flags) in model.vocab.listing() {
        out.push(flags.to_bits() | if special { SPECIAL_BIT } else { 0 });
        put_str(&mut out, text);
    }

    match &model.bigrams {
        None => out.push(NO_BIGRAMS),
        Some(b) => {
            out.push(HAS_BIGRAMS);
            put_u32(&mut out, b.pairs().len());
            for &(l, r) in b.pairs() {
                put_unit(&mut out, l);
                put_unit(&mut out, r);
            }
        }
    }

    put_u32(&mut out, model.params.len());
    for (_, p) in model.params.iter() {
        put_str(&mut out, &p.name);
        let mut flags = 0;
        if p.trainable {
            flags |= TRAINABLE_BIT;
        }
        if p.weight_decay {
            flags |= DECAY_BIT;
        }
        out.push(flags);
        let dims = p.value.dims();
        out.push(dims.len() as u8);
        for &d in dims {
            put_u32(&mut out, d);
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Wraps a payload in the magic, version, length and checksum.
pub fn seal(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CHECKSUM_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Checks the framing and returns the payload.
pub fn unseal(bytes: &[u8]) -> Result<&[u8], ModelIoError> {
    if bytes.len() < MAGIC.len() {
        return Err(if MAGIC.starts_with(bytes) {
            ModelIoError::Truncated
        } else {
            ModelIoError::BadMagic
        });
    }
    if bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(ModelIoError::Truncated);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ModelIoError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let body = (bytes.len() - HEADER_LEN) as u64;
    if len > body || body - len < CHECKSUM_LEN as u64 {
        return Err(ModelIoError::Truncated);
    }
    let end = HEADER_LEN + len as usize;
    if bytes.len() > end + CHECKSUM_LEN {
        return Err(malformed("trailing bytes after checksum"));
    }
    let digest = Sha256::digest(&bytes[..end]);
    if digest.as_slice() != &bytes[end..] {
        return Err(ModelIoError::Checksum);
    }
    Ok(&bytes[HEADER_LEN..end])
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelIoError> {
        if self.buf.len() - self.pos < n {
            return Err(malformed(format!("payload ends inside {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, ModelIoError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize, ModelIoError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn string(&mut self, what: &str) -> Result<String, ModelIoError> {
        let len = self.u32(what)?;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| malformed(format!("{what} is not UTF-8")))
    }

    /// Reads a count whose items take at least `min_item` bytes each, so a
    /// corrupt count cannot trigger a huge allocation.
    fn count(&mut self, what: &str, min_item: usize) -> Result<usize, ModelIoError> {
        let n = self.u32(what)?;
        if n.saturating_mul(min_item) > self.buf.len() - self.pos {
            return Err(malformed(format!("{what} count {n} exceeds payload")));
        }
        Ok(n)
    }

    fn unit(&mut self) -> Result<BigramUnit, ModelIoError> {
        let kind = self.u8("bigram unit")?;
        let raw = u32::from_le_bytes(self.take(4, "bigram unit")?.try_into().expect("4 bytes"));
        match kind {
            0 => Ok(BigramUnit::Bos),
            1 => Ok(BigramUnit::Eos),
            2 => char::from_u32(raw)
                .map(BigramUnit::Char)
                .ok_or_else(|| malformed(format!("invalid character {raw:#x}"))),
            k => Err(malformed(format!("unknown bigram unit kind {k}"))),
        }
    }
}

/// Rebuilds a model from a payload.
pub fn decode_payload(payload: &[u8]) -> Result<Model, ModelIoError> {
    let mut r = Reader { buf: payload, pos: 0 };
    let code = r.u8("variant")?;
    let text = r.string("config")?;
    let config = TrainConfig::parse(&text).map_err(|e| malformed(format!("config: {e}")))?;
    if variant_code(config.variant) != code {
        return Err(malformed("variant code disagrees with config"));
    }

    let n = r.count("vocabulary", 5)?;
    let mut listing = Vec::with_capacity(n);
    for _ in 0..n {
        let bits = r.u8("vocabulary flags")?;
        let flags = EntryFlags::from_bits(bits & !SPECIAL_BIT)
            .ok_or_else(|| malformed(format!("unknown vocabulary flags {bits:#x}")))?;
        listing.push((r.string("vocabulary entry")?, bits & SPECIAL_BIT != 0, flags));
    }
    let vocab = Vocabulary::from_listing(listing).map_err(malformed)?;

    let bigrams = match r.u8("bigram marker")? {
        NO_BIGRAMS => None,
        HAS_BIGRAMS => {
            let n = r.count("bigram", 10)?;
            let mut pairs = Vec::with_capacity(n);
            for _ in 0..n {
                pairs.push((r.unit()?, r.unit()?));
            }
            Some(BigramVocab::from_pairs(pairs).map_err(malformed)?)
        }
        m => return Err(malformed(format!("unknown bigram marker {m}"))),
    };

    let n = r.count("tensor", 6)?;
    let mut tensors = Vec::with_capacity(n);
    let mut stored = 0usize;
    for _ in 0..n {
        let name = r.string("tensor name")?;
        let flags = r.u8("tensor flags")?;
        if flags & !(TRAINABLE_BIT | DECAY_BIT) != 0 {
            return Err(malformed(format!("unknown tensor flags {flags:#x}")));
        }
        let rank = r.u8("tensor rank")? as usize;
        if !(1..=2).contains(&rank) {
            return Err(malformed(format!("tensor `{name}` has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("tensor dims")?);
        }
        let len = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let bytes = match len.and_then(|l| l.checked_mul(8)) {
            Some(b) => r.take(b, "tensor data")?,
            None => return Err(malformed(format!("tensor `{name}` is too large"))),
        };
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        stored += data.len();
        tensors.push((name, flags, dims, data));
    }
    if r.pos != payload.len() {
        return Err(malformed("trailing bytes in payload"));
    }
    // Check sizes before allocating the layout, so a corrupt config cannot
    // request more memory than the file carries.
    if expected_floats(&config, &vocab, bigrams.as_ref()) != Some(stored) {
        return Err(malformed("stored tensors do not match the configured shapes"));
    }

    let mut model = Model::layout(config, vocab, bigrams).map_err(|e| malformed(e.to_string()))?;
    if n != model.params.len() {
        return Err(malformed(format!(
            "{n} tensors stored, variant needs {}",
            model.params.len()
        )));
    }
    let mut seen = vec![false; n];
    for (name, flags, dims, data) in tensors {
        let id = model
            .params
            .id(&name)
            .ok_or_else(|| malformed(format!("unexpected tensor `{name}`")))?;
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(malformed(format!("tensor `{name}` stored twice")));
        }
        let param = model.params.get_mut(id);
        if dims != param.value.dims() {
            return Err(malformed(format!(
                "tensor `{name}` has dims {dims:?}, expected {:?}",
                param.value.dims()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(malformed(format!("tensor `{name}` holds non-finite values")));
        }
        param.value.data_mut().copy_from_slice(&data);
        param.trainable = flags & TRAINABLE_BIT != 0;
        param.weight_decay = flags & DECAY_BIT != 0;
    }
    Ok(model)
}

/// Total parameter count of the layout a config describes, `None` on
/// overflow.
fn expected_floats(config: &TrainConfig, vocab: &Vocabulary, bigrams: Option<&BigramVocab>) -> Option<usize> {
    let de = config.embed_dim;
    let dh = config.hidden_dim;
    let mut total = vocab.embedding_rows().max(1).checked_mul(de)?;
    let mut input = de;
    if let Some(b) = bigrams {
        total = total.checked_add(b.len().max(1).checked_mul(de)?)?;
        input = de.checked_mul(3)?;
    }
    let lengths = if config.variant == Variant::WiDag {
        config.l_max.max(1)
    } else {
        1
    };
    let per_len = dh.checked_mul(input)?.checked_add(dh.checked_mul(dh)?)?;
    let per_gate = lengths.checked_mul(per_len)?.checked_add(dh)?;
    total = total.checked_add(per_gate.checked_mul(8)?)?;
    let t = crate::corpus::Tag::COUNT;
    total.checked_add(dh.checked_mul(2 * t)?)?.checked_add(t + t * t + t)
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    seal(&encode_payload(model))
}

pub fn decode_model(bytes: &[u8]) -> Result<Model, ModelIoError> {
    decode_payload(unseal(bytes)?)
}

pub fn save<P: AsRef<Path>>(model: &Model, path: P) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load<P: AsRef<Path>>(path: P) -> Result<Model> {
    let bytes = fs::read(path)?;
    Ok(decode_model(&bytes)?)
}

/// Loads a model and checks that it is of the given variant.
pub fn load_expect<P: AsRef<Path>>(path: P, variant: Variant) -> Result<Model> {
    let model = load(path)?;
    model.expect_variant(variant)?;
    Ok(model)
}

/// A copy of `model` whose lattice vocabulary also holds `words`.
pub fn inject_external_vocab<S: AsRef<str>>(model: &Model, words: &[S]) -> Result<Model> {
    let mut out = model.clone();
    out.inject_external_vocab(words)?;
    Ok(out)
}
