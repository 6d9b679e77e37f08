//! Bidirectional encoders producing one hidden vector per character.
//!
//! Four variants share the same interface: chain Bi-LSTMs over uni-gram or
//! bi-gram character embeddings, and the weight-sharing (WS) and
//! weight-independent (WI) DAG-LSTMs over a word lattice.

mod embed;
mod lstm;

use std::fmt;
use std::str::FromStr;

use crate::error::{ConfigError, NumericError};
use crate::numeric::{Graph, NodeId, ParamId, ParamStore};

pub use embed::{dropout, embed_bigram, embed_lattice, embed_unigram};
pub use lstm::{lstm_forward, wi_dag_lstm_forward, ws_dag_lstm_forward, DirStates, EdgeInputs};

use crate::lattice::Lattice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Unigram,
    Bigram,
    /// Weight-sharing DAG-LSTM.
    WsDag,
    /// DAG-LSTM with weights per word length.
    WiDag,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Unigram, Variant::Bigram, Variant::WsDag, Variant::WiDag];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Unigram => "unigram",
            Variant::Bigram => "bigram",
            Variant::WsDag => "ws-dag",
            Variant::WiDag => "wi-dag",
        }
    }

    pub fn is_dag(self) -> bool {
        matches!(self, Variant::WsDag | Variant::WiDag)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ConfigError::BadValue {
                key: "variant".into(),
                value: s.into(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn tag(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Output = 1,
    Forget = 2,
    Cell = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Output, Gate::Forget, Gate::Cell];

    fn tag(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Output => "o",
            Gate::Forget => "f",
            Gate::Cell => "c",
        }
    }
}

/// Weights of one gate. `w[k]`/`u[k]` serve words of length `k + 1`; the
/// chain and WS cells have a single entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateParams {
    pub w: Vec<ParamId>,
    pub u: Vec<ParamId>,
    pub b: ParamId,
}

impl GateParams {
    /// Weights for a word of length `len`, clamped to the last family member.
    pub fn weights_for(&self, len: usize) -> (ParamId, ParamId) {
        let k = len.clamp(1, self.w.len()) - 1;
        (self.w[k], self.u[k])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellParams {
    pub gates: [GateParams; 4],
    pub hidden: usize,
}

impl CellParams {
    /// Registers `prefix.{W,U,b}_{gate}` (with a `.l{k}` suffix when
    /// `lengths > 1`).
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        lengths: usize,
    ) -> Result<CellParams, NumericError> {
        let mut make = |gate: Gate| -> Result<GateParams, NumericError> {
            let mut w = Vec::with_capacity(lengths);
            let mut u = Vec::with_capacity(lengths);
            for k in 1..=lengths {
                let suffix = if lengths > 1 { format!(".l{k}") } else { String::new() };
                w.push(store.add_zeros(&format!("{prefix}.W_{}{suffix}", gate.tag()), &[hidden, input_dim])?);
                u.push(store.add_zeros(&format!("{prefix}.U_{}{suffix}", gate.tag()), &[hidden, hidden])?);
            }
            let b = store.add_zeros(&format!("{prefix}.b_{}", gate.tag()), &[hidden])?;
            Ok(GateParams { w, u, b })
        };
        Ok(CellParams {
            gates: [
                make(Gate::Input)?,
                make(Gate::Output)?,
                make(Gate::Forget)?,
                make(Gate::Cell)?,
            ],
            hidden,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    pub embed: usize,
    pub hidden: usize,
    /// Rows of the shared character/word table.
    pub word_rows: usize,
    /// Rows of the bigram table (bigram variant only).
    pub bigram_rows: usize,
    /// Size of the WI weight families.
    pub l_max: usize,
}

/// Parameter ids of an encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderParams {
    pub variant: Variant,
    pub word_emb: ParamId,
    pub bigram_emb: Option<ParamId>,
    pub fwd: CellParams,
    pub bwd: CellParams,
}

impl EncoderParams {
    pub fn register(
        store: &mut ParamStore,
        variant: Variant,
        dims: EncoderDims,
    ) -> Result<EncoderParams, NumericError> {
        let word_emb = store.add_zeros("emb.word", &[dims.word_rows.max(1), dims.embed])?;
        let bigram_emb = match variant {
            Variant::Bigram => Some(store.add_zeros("emb.bigram", &[dims.bigram_rows.max(1), dims.embed])?),
            _ => None,
        };
        let input_dim = if variant == Variant::Bigram {
            3 * dims.embed
        } else {
            dims.embed
        };
        let lengths = if variant == Variant::WiDag {
            dims.l_max.max(1)
        } else {
            1
        };
        let mut cell = |dir: Direction| {
            let prefix = format!("enc.{}", dir.tag());
            CellParams::register(store, &prefix, input_dim, dims.hidden, lengths)
        };
        let fwd = cell(Direction::Forward)?;
        let bwd = cell(Direction::Backward)?;
        Ok(EncoderParams {
            variant,
            word_emb,
            bigram_emb,
            fwd,
            bwd,
        })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.fwd.hidden
    }

    pub fn embedding_params(&self) -> Vec<ParamId> {
        std::iter::once(self.word_emb).chain(self.bigram_emb).collect()
    }
}

/// Embedded encoder input.
pub enum EncoderInput<'a> {
    /// One vector per position (uni-gram and bi-gram variants).
    Sequence(Vec<NodeId>),
    /// A vector per lattice word occurrence (DAG variants).
    Lattice { lattice: &'a Lattice, inputs: EdgeInputs },
}

/// Concatenated hidden states `h_i = fwd_h_i ++ bwd_h_i`.
#[derive(Debug, Clone)]
pub struct EncoderState {
    pub h: Vec<NodeId>,
    pub fwd: DirStates,
    pub bwd: DirStates,
}

pub fn bilstm_concat(g: &mut Graph<'_>, fwd: DirStates, bwd: DirStates) -> Result<EncoderState, NumericError> {
    if fwd.h.len() != bwd.h.len() {
        return Err(NumericError::Shape {
            op: "bilstm_concat",
            detail: format!("{} forward vs {} backward states", fwd.h.len(), bwd.h.len()),
        });
    }
    let h = fwd
        .h
        .iter()
        .zip(&bwd.h)
        .map(|(&f, &b)| g.concat(&[f, b]))
        .collect::<Result<_, _>>()?;
    Ok(EncoderState { h, fwd, bwd })
}

/// Runs both directions of the variant's encoder.
pub fn encode(
    g: &mut Graph<'_>,
    params: &EncoderParams,
    input: &EncoderInput<'_>,
) -> Result<EncoderState, NumericError> {
    let (fwd, bwd) = match (params.variant, input) {
        (Variant::Unigram | Variant::Bigram, EncoderInput::Sequence(z)) => (
            lstm_forward(g, z, &params.fwd, Direction::Forward)?,
            lstm_forward(g, z, &params.bwd, Direction::Backward)?,
        ),
        (Variant::WsDag, EncoderInput::Lattice { lattice, inputs }) => (
            ws_dag_lstm_forward(g, lattice, inputs, &params.fwd, Direction::Forward)?,
            ws_dag_lstm_forward(g, lattice, inputs, &params.bwd, Direction::Backward)?,
        ),
        (Variant::WiDag, EncoderInput::Lattice { lattice, inputs }) => (
            wi_dag_lstm_forward(g, lattice, inputs, &params.fwd, Direction::Forward)?,
            wi_dag_lstm_forward(g, lattice, inputs, &params.bwd, Direction::Backward)?,
        ),
        (v, _) => {
            return Err(NumericError::Shape {
                op: "encode",
                detail: format!("input kind does not match variant {v}"),
            })
        }
    };
    bilstm_concat(g, fwd, bwd)
}

#[cfg(test)]
mod tests;
