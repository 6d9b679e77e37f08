use std::collections::HashMap;

use super::{CellParams, Direction, Gate};
use crate::error::NumericError;
use crate::lattice::Lattice;
use crate::numeric::{Graph, NodeId, ParamId};

/// Hidden and cell states of one direction, indexed by position - 1.
#[derive(Debug, Clone)]
pub struct DirStates {
    pub h: Vec<NodeId>,
    pub c: Vec<NodeId>,
    /// Number of forget gates evaluated.
    pub forget_gates: usize,
}

/// Embedded input of each lattice word occurrence, keyed by `(start, len)`.
/// Forward and backward edges for one occurrence share the same node.
pub type EdgeInputs = HashMap<(usize, usize), NodeId>;

fn positions(n: usize, dir: Direction) -> Box<dyn Iterator<Item = usize>> {
    match dir {
        Direction::Forward => Box::new(1..=n),
        Direction::Backward => Box::new((1..=n).rev()),
    }
}

fn gate(g: &mut Graph<'_>, which: Gate, pre: NodeId) -> Result<NodeId, NumericError> {
    match which {
        Gate::Cell => g.tanh(pre),
        _ => g.sigmoid(pre),
    }
}

/// Chain LSTM over per-position inputs, starting from zero `h` and `c`.
///
/// `c_i = c~_i * i_i + c_{i-1} * f_i` and `h_i = o_i * tanh(c_i)`; the
/// backward direction runs from position n down to 1.
pub fn lstm_forward(
    g: &mut Graph<'_>,
    inputs: &[NodeId],
    cell: &CellParams,
    dir: Direction,
) -> Result<DirStates, NumericError> {
    let n = inputs.len();
    let zero = g.zeros(cell.hidden);
    let mut h = vec![zero; n];
    let mut c = vec![zero; n];
    let (mut h_prev, mut c_prev) = (zero, zero);
    for pos in positions(n, dir) {
        let z = inputs[pos - 1];
        let mut act = [zero; 4];
        for which in Gate::ALL {
            let p = &cell.gates[which as usize];
            let (w, u) = p.weights_for(1);
            let pre = g.affine(&[(w, z), (u, h_prev)], Some(p.b))?;
            act[which as usize] = gate(g, which, pre)?;
        }
        let keep = g.mul(act[Gate::Cell as usize], act[Gate::Input as usize])?;
        let carry = g.mul(c_prev, act[Gate::Forget as usize])?;
        let c_i = g.sum(&[keep, carry])?;
        let squashed = g.tanh(c_i)?;
        let h_i = g.mul(act[Gate::Output as usize], squashed)?;
        h[pos - 1] = h_i;
        c[pos - 1] = c_i;
        h_prev = h_i;
        c_prev = c_i;
    }
    Ok(DirStates { h, c, forget_gates: n })
}

/// One incoming lattice edge at a position: its input and prestates.
struct Incoming {
    len: usize,
    z: NodeId,
    h: NodeId,
    c: NodeId,
}

fn incoming(
    lattice: &Lattice,
    inputs: &EdgeInputs,
    pos: usize,
    dir: Direction,
    states: (&[NodeId], &[NodeId]),
    zero: NodeId,
) -> Result<Vec<Incoming>, NumericError> {
    let n = lattice.len();
    let edges = match dir {
        Direction::Forward => lattice.forward(pos),
        Direction::Backward => lattice.backward(pos),
    };
    if edges.is_empty() {
        return Err(NumericError::Shape {
            op: "dag-lstm",
            detail: format!("position {pos} has no incoming edge"),
        });
    }
    edges
        .iter()
        .map(|e| {
            let (start, pre) = match dir {
                Direction::Forward => (pos + 1 - e.len, pos - e.len),
                Direction::Backward => (pos, pos + e.len),
            };
            let z = *inputs.get(&(start, e.len)).ok_or_else(|| NumericError::Shape {
                op: "dag-lstm",
                detail: format!("missing input for word at {start} of length {}", e.len),
            })?;
            let (h, c) = if pre == 0 || pre == n + 1 {
                (zero, zero)
            } else {
                (states.0[pre - 1], states.1[pre - 1])
            };
            Ok(Incoming { len: e.len, z, h, c })
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Weights {
    Shared,
    PerLength,
}

fn dag_forward(
    g: &mut Graph<'_>,
    lattice: &Lattice,
    inputs: &EdgeInputs,
    cell: &CellParams,
    dir: Direction,
    weights: Weights,
) -> Result<DirStates, NumericError> {
    let n = lattice.len();
    let zero = g.zeros(cell.hidden);
    let mut h = vec![zero; n];
    let mut c = vec![zero; n];
    let mut forget_gates = 0;
    for pos in positions(n, dir) {
        let edges = incoming(lattice, inputs, pos, dir, (&h, &c), zero)?;
        let sums = match weights {
            Weights::Shared => {
                let zs: Vec<NodeId> = edges.iter().map(|e| e.z).collect();
                let hs: Vec<NodeId> = edges.iter().map(|e| e.h).collect();
                Some((g.sum(&zs)?, g.sum(&hs)?))
            }
            Weights::PerLength => None,
        };
        let mut act = [zero; 4];
        for which in [Gate::Input, Gate::Output, Gate::Cell] {
            let p = &cell.gates[which as usize];
            let pre = match sums {
                Some((z_sum, h_sum)) => {
                    let (w, u) = p.weights_for(1);
                    g.affine(&[(w, z_sum), (u, h_sum)], Some(p.b))?
                }
                None => {
                    let terms: Vec<(ParamId, NodeId)> = edges
                        .iter()
                        .flat_map(|e| {
                            let (w, u) = p.weights_for(e.len);
                            [(w, e.z), (u, e.h)]
                        })
                        .collect();
                    g.affine(&terms, Some(p.b))?
                }
            };
            act[which as usize] = gate(g, which, pre)?;
        }
        let mut parts = Vec::with_capacity(edges.len() + 1);
        parts.push(g.mul(act[Gate::Cell as usize], act[Gate::Input as usize])?);
        let fp = &cell.gates[Gate::Forget as usize];
        for e in &edges {
            let len = if weights == Weights::Shared { 1 } else { e.len };
            let (w, u) = fp.weights_for(len);
            let pre = g.affine(&[(w, e.z), (u, e.h)], Some(fp.b))?;
            let f = g.sigmoid(pre)?;
            forget_gates += 1;
            parts.push(g.mul(e.c, f)?);
        }
        let c_i = g.sum(&parts)?;
        let squashed = g.tanh(c_i)?;
        h[pos - 1] = g.mul(act[Gate::Output as usize], squashed)?;
        c[pos - 1] = c_i;
    }
    Ok(DirStates { h, c, forget_gates })
}

/// Weight-sharing DAG-LSTM: the input, output and candidate gates read the
/// sums of incoming word embeddings and prestates; each incoming edge gets
/// its own forget gate over its word and prestate.
pub fn ws_dag_lstm_forward(
    g: &mut Graph<'_>,
    lattice: &Lattice,
    inputs: &EdgeInputs,
    cell: &CellParams,
    dir: Direction,
) -> Result<DirStates, NumericError> {
    dag_forward(g, lattice, inputs, cell, dir, Weights::Shared)
}

/// Weight-independent DAG-LSTM: every incoming edge contributes
/// `W_l z + U_l h_prestate` with weights chosen by word length, lengths
/// beyond the largest family member sharing the last one.
pub fn wi_dag_lstm_forward(
    g: &mut Graph<'_>,
    lattice: &Lattice,
    inputs: &EdgeInputs,
    cell: &CellParams,
    dir: Direction,
) -> Result<DirStates, NumericError> {
    dag_forward(g, lattice, inputs, cell, dir, Weights::PerLength)
}
