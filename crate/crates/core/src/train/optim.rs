use serde::{Deserialize, Serialize};

use crate::nn::{Matrix, ParamStore};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        AdamSettings {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state. Non-trainable tensors are never updated.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    adam: AdamSettings,
    steps: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, adam: AdamSettings, params: &ParamStore) -> Self {
        let zeros = || -> Vec<Matrix> {
            if kind == OptimizerKind::Adam {
                params
                    .ids()
                    .map(|id| {
                        let (r, c) = params.value(id).shape();
                        Matrix::zeros(r, c)
                    })
                    .collect()
            } else {
                Vec::new()
            }
        };
        Optimizer {
            kind,
            learning_rate,
            adam,
            steps: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update from the gradients currently held in `params`.
    ///
    /// # Panics
    /// If `params` does not have the layout the optimizer was built for.
    pub fn step(&mut self, params: &mut ParamStore) {
        self.steps += 1;
        let lr = self.learning_rate;
        let ids: Vec<_> = params.ids().collect();
        match self.kind {
            OptimizerKind::Sgd => {
                for id in ids {
                    if !params.is_trainable(id) {
                        continue;
                    }
                    let (value, grad) = params.value_and_grad_mut(id);
                    value.scaled_add_assign(-lr, grad);
                }
            }
            OptimizerKind::Adam => {
                assert_eq!(ids.len(), self.first.len(), "optimizer/parameter layout mismatch");
                let AdamSettings { beta1, beta2, eps } = self.adam;
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for id in ids {
                    if !params.is_trainable(id) {
                        continue;
                    }
                    let i = id.index();
                    let (value, grad) = params.value_and_grad_mut(id);
                    assert_eq!(value.shape(), self.first[i].shape(), "optimizer/parameter shape mismatch");
                    let m = self.first[i].as_mut_slice();
                    let v = self.second[i].as_mut_slice();
                    for (((w, &g), m), v) in value.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(m).zip(v) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}
