use super::ParamStore;

/// AdaGrad with an L2 penalty folded into the gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaGrad {
    pub learning_rate: f64,
    pub l2: f64,
    pub epsilon: f64,
    /// Rescale the global gradient norm down to this value when exceeded.
    pub clip_norm: Option<f64>,
}

impl AdaGrad {
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    pub fn new(learning_rate: f64, l2: f64) -> AdaGrad {
        AdaGrad {
            learning_rate,
            l2,
            epsilon: Self::DEFAULT_EPSILON,
            clip_norm: None,
        }
    }

    pub fn step(&self, store: &mut ParamStore) {
        if let Some(max) = self.clip_norm {
            let norm = store
                .iter()
                .filter(|(_, p)| p.trainable)
                .map(|(_, p)| p.grad.norm_sq())
                .sum::<f64>()
                .sqrt();
            if norm > max && norm > 0.0 {
                let scale = max / norm;
                for (_, p) in store.iter_mut().filter(|(_, p)| p.trainable) {
                    p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
                }
            }
        }
        adagrad_step(store, self.learning_rate, self.l2, self.epsilon);
    }
}

/// One update of every trainable parameter:
/// `g = grad + l2 * value; accum += g^2; value -= lr * g / (sqrt(accum) + eps)`.
/// Gradients are reset to zero afterwards. The L2 term is skipped for
/// parameters with `weight_decay` off, and a zero effective gradient leaves
/// the value untouched.
pub fn adagrad_step(store: &mut ParamStore, learning_rate: f64, l2: f64, epsilon: f64) {
    for (_, p) in store.iter_mut() {
        if p.trainable {
            let decay = if p.weight_decay { l2 } else { 0.0 };
            let values = p.value.data_mut();
            let accum = p.accum.data_mut();
            for ((v, a), &grad) in values.iter_mut().zip(accum.iter_mut()).zip(p.grad.data()) {
                let g = grad + decay * *v;
                if g == 0.0 {
                    continue;
                }
                *a += g * g;
                *v -= learning_rate * g / (a.sqrt() + epsilon);
            }
        }
        p.grad.fill(0.0);
    }
}
