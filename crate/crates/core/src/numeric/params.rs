use std::collections::{BTreeMap, HashMap};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::Tensor;
use crate::error::NumericError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub accum: Tensor,
    pub trainable: bool,
    /// Whether the L2 penalty applies to this parameter.
    pub weight_decay: bool,
}

/// Named trainable tensors with their gradients and AdaGrad state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> Result<ParamId, NumericError> {
        if self.index.contains_key(name) {
            return Err(NumericError::Shape {
                op: "param",
                detail: format!("duplicate parameter `{name}`"),
            });
        }
        let id = ParamId(self.params.len());
        let zeros = Tensor::zeros(value.dims())?;
        self.params.push(Param {
            name: name.to_string(),
            grad: zeros.clone(),
            accum: zeros,
            value,
            trainable: true,
            weight_decay: true,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_zeros(&mut self, name: &str, dims: &[usize]) -> Result<ParamId, NumericError> {
        self.add(name, Tensor::zeros(dims)?)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<ParamId, NumericError> {
        self.id(name)
            .ok_or_else(|| NumericError::UnknownParam(name.to_string()))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Param)> {
        self.params.iter_mut().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Adds `scale * grads` into the stored gradients.
    pub fn accumulate(&mut self, grads: &Gradients, scale: f64) {
        for (idx, slot) in grads.slots.iter().enumerate() {
            let Some(slot) = slot else { continue };
            let target = &mut self.params[idx].grad;
            match slot {
                GradSlot::Dense(g) => {
                    for (t, v) in target.data_mut().iter_mut().zip(g) {
                        *t += scale * v;
                    }
                }
                GradSlot::Rows(rows) => {
                    for (&r, g) in rows {
                        for (t, v) in target.row_mut(r).iter_mut().zip(g) {
                            *t += scale * v;
                        }
                    }
                }
            }
        }
    }

    /// Sum of squared values over trainable parameters.
    pub fn norm_sq(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.norm_sq())
            .sum()
    }

    /// Copies values (not gradients or optimizer state) from a store with the
    /// same layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) {
        for (p, q) in self.params.iter_mut().zip(&other.params) {
            debug_assert_eq!(p.name, q.name);
            p.value = q.value.clone();
        }
    }
}

/// Fills every trainable parameter from `Uniform(low, high)`, excluding the
/// endpoints. Each parameter draws from its own stream keyed by the seed and
/// its name, so values do not depend on registration order.
pub fn init_uniform(store: &mut ParamStore, low: f64, high: f64, seed: u64) -> Result<(), NumericError> {
    if low >= high || !low.is_finite() || !high.is_finite() {
        return Err(NumericError::InvalidRange { low, high });
    }
    let dist = Uniform::new(low, high).map_err(|_| NumericError::InvalidRange { low, high })?;
    for (_, p) in store.iter_mut().filter(|(_, p)| p.trainable) {
        let mut rng = stream_rng(seed, &p.name);
        for x in p.value.data_mut() {
            *x = loop {
                let v = dist.sample(&mut rng);
                if v > low && v < high {
                    break v;
                }
            };
        }
    }
    Ok(())
}

/// Deterministic generator for the stream named `name` under `seed`.
pub fn stream_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum GradSlot {
    Dense(Vec<f64>),
    /// Sparse rows of a matrix parameter, for embedding lookups.
    Rows(BTreeMap<usize, Vec<f64>>),
}

/// Parameter gradients produced by one backward pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    pub(crate) slots: Vec<Option<GradSlot>>,
}

impl Gradients {
    pub fn new(store: &ParamStore) -> Gradients {
        Gradients {
            slots: vec![None; store.len()],
        }
    }

    pub(crate) fn dense_mut(&mut self, id: ParamId, store: &ParamStore) -> &mut Vec<f64> {
        let value = store.value(id);
        let slot = &mut self.slots[id.0];
        if let Some(GradSlot::Rows(rows)) = slot {
            let mut dense = vec![0.0; value.len()];
            let cols = value.cols();
            for (&r, g) in rows.iter() {
                dense[r * cols..(r + 1) * cols].copy_from_slice(g);
            }
            *slot = Some(GradSlot::Dense(dense));
        }
        match slot.get_or_insert_with(|| GradSlot::Dense(vec![0.0; value.len()])) {
            GradSlot::Dense(d) => d,
            GradSlot::Rows(_) => unreachable!(),
        }
    }

    pub(crate) fn add_row(&mut self, id: ParamId, row: usize, g: &[f64], store: &ParamStore) {
        let cols = store.value(id).cols();
        match self.slots[id.0].get_or_insert_with(|| GradSlot::Rows(BTreeMap::new())) {
            GradSlot::Rows(rows) => {
                let r = rows.entry(row).or_insert_with(|| vec![0.0; g.len()]);
                r.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            GradSlot::Dense(d) => {
                d[row * cols..(row + 1) * cols]
                    .iter_mut()
                    .zip(g)
                    .for_each(|(a, b)| *a += b);
            }
        }
    }

    /// Dense view of one parameter's gradient; `None` if it was not touched.
    pub fn dense(&self, id: ParamId, store: &ParamStore) -> Option<Vec<f64>> {
        let value = store.value(id);
        self.slots[id.0].as_ref().map(|slot| match slot {
            GradSlot::Dense(d) => d.clone(),
            GradSlot::Rows(rows) => {
                let mut dense = vec![0.0; value.len()];
                let cols = value.cols();
                for (&r, g) in rows {
                    dense[r * cols..(r + 1) * cols].copy_from_slice(g);
                }
                dense
            }
        })
    }

    /// Rows of a parameter that received any gradient contribution.
    pub fn touched_rows(&self, id: ParamId, store: &ParamStore) -> Vec<usize> {
        match &self.slots[id.0] {
            None => Vec::new(),
            Some(GradSlot::Rows(rows)) => rows.keys().copied().collect(),
            Some(GradSlot::Dense(d)) => {
                let cols = store.value(id).cols();
                (0..d.len() / cols)
                    .filter(|&r| d[r * cols..(r + 1) * cols].iter().any(|&x| x != 0.0))
                    .collect()
            }
        }
    }
}
