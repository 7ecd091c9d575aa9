use std::collections::HashMap;

use rand::Rng;

use super::matrix::Matrix;
use crate::{Error, Result};

/// Handle to one tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    value: Matrix,
    grad: Matrix,
    trainable: bool,
    regularized: bool,
}

/// Named learnable tensors with matching gradient buffers.
///
/// Insertion order is preserved and is the iteration order everywhere
/// (optimizer, L2, checkpoints), which keeps every reduction reproducible.
#[derive(Clone, Debug)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: HashMap<String, ParamId>,
    seed: u64,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            entries: Vec::new(),
            by_name: HashMap::new(),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Adds a tensor. `regularized` marks it for the L2 penalty.
    pub fn insert(&mut self, name: &str, value: Matrix, regularized: bool) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name `{name}`"
            )));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("initial value of `{name}`")));
        }
        let id = ParamId(self.entries.len());
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.entries.push(Entry {
            name: name.to_owned(),
            value,
            grad,
            trainable: true,
            regularized,
        });
        self.by_name.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].grad
    }

    /// Value and gradient of one tensor, borrowed together for an update.
    pub fn value_and_grad_mut(&mut self, id: ParamId) -> (&mut Matrix, &Matrix) {
        let e = &mut self.entries[id.0];
        (&mut e.value, &e.grad)
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    /// Frozen tensors are skipped by the optimizer.
    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    pub fn is_regularized(&self, id: ParamId) -> bool {
        self.entries[id.0].regularized
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    /// Adds `scale · g` into the gradient buffers, in the order `g` recorded
    /// its contributions.
    pub fn accumulate(&mut self, g: &Gradients, scale: f64) {
        for (i, dense) in g.dense.iter().enumerate() {
            if let Some(m) = dense {
                self.entries[i].grad.scaled_add_assign(scale, m);
            }
        }
        for (id, row, values) in &g.rows {
            let dst = self.entries[id.0].grad.row_mut(*row);
            for (d, v) in dst.iter_mut().zip(values) {
                *d += scale * v;
            }
        }
    }

    /// `Σ ‖θ‖²` over regularized tensors.
    pub fn l2_norm_squared(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.regularized)
            .map(|e| e.value.sum_squares())
            .sum()
    }

    /// Adds the gradient of `lambda · Σ ‖θ‖²`.
    pub fn add_l2_grad(&mut self, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        for e in self.entries.iter_mut().filter(|e| e.regularized) {
            e.grad.scaled_add_assign(2.0 * lambda, &e.value);
        }
    }

    pub fn values_snapshot(&self) -> Vec<Matrix> {
        self.entries.iter().map(|e| e.value.clone()).collect()
    }

    pub fn restore_values(&mut self, snapshot: Vec<Matrix>) {
        assert_eq!(snapshot.len(), self.entries.len(), "snapshot size mismatch");
        for (e, v) in self.entries.iter_mut().zip(snapshot) {
            assert_eq!(e.value.shape(), v.shape(), "snapshot shape mismatch");
            e.value = v;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.value.is_finite())
    }
}

/// Uniform(−scale, scale) matrix drawn from `rng`.
pub fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Gradient contributions of one example, kept sparse for row-indexed
/// tensors (embeddings, latent tables, bias tables).
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    dense: Vec<Option<Matrix>>,
    rows: Vec<(ParamId, usize, Vec<f64>)>,
}

impl Gradients {
    pub fn new(n_params: usize) -> Self {
        Gradients {
            dense: vec![None; n_params],
            rows: Vec::new(),
        }
    }

    /// Dense buffer for `id`, created as zeros of the given shape.
    pub fn dense_mut(&mut self, id: ParamId, rows: usize, cols: usize) -> &mut Matrix {
        let slot = &mut self.dense[id.0];
        let m = slot.get_or_insert_with(|| Matrix::zeros(rows, cols));
        debug_assert_eq!(m.shape(), (rows, cols));
        m
    }

    pub fn add_dense(&mut self, id: ParamId, g: &Matrix) {
        self.dense_mut(id, g.rows(), g.cols()).add_assign(g);
    }

    pub fn add_row(&mut self, id: ParamId, row: usize, values: &[f64]) {
        self.rows.push((id, row, values.to_vec()));
    }

    pub fn dense(&self, id: ParamId) -> Option<&Matrix> {
        self.dense.get(id.0).and_then(Option::as_ref)
    }

    pub fn sparse_rows(&self) -> impl Iterator<Item = (ParamId, usize, &[f64])> {
        self.rows.iter().map(|(id, r, v)| (*id, *r, v.as_slice()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new(0);
        s.insert("w", Matrix::zeros(2, 2), true).unwrap();
        assert!(s.insert("w", Matrix::zeros(1, 1), true).is_err());
    }

    #[test]
    fn grad_buffers_match_shapes() {
        let mut s = ParamStore::new(0);
        let a = s.insert("a", Matrix::zeros(3, 2), true).unwrap();
        let b = s.insert("b", Matrix::zeros(1, 5), false).unwrap();
        for id in [a, b] {
            assert_eq!(s.value(id).shape(), s.grad(id).shape());
        }
        assert_eq!(s.id("b"), Some(b));
        assert_eq!(s.name(a), "a");
    }

    #[test]
    fn accumulate_dense_and_rows() {
        let mut s = ParamStore::new(0);
        let w = s.insert("w", Matrix::zeros(2, 2), true).unwrap();
        let e = s.insert("e", Matrix::zeros(3, 2), true).unwrap();
        let mut g = Gradients::new(s.len());
        g.add_dense(w, &Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        g.add_row(e, 1, &[1.0, -1.0]);
        g.add_row(e, 1, &[0.5, 0.5]);
        s.accumulate(&g, 0.5);
        assert_eq!(s.grad(w).as_slice(), &[0.5, 1.0, 1.5, 2.0]);
        assert_eq!(s.grad(e).row(1), &[0.75, -0.25]);
        assert_eq!(s.grad(e).row(0), &[0.0, 0.0]);
    }

    #[test]
    fn l2_only_touches_regularized() {
        let mut s = ParamStore::new(0);
        let w = s.insert("w", Matrix::from_vec(1, 2, vec![1.0, 2.0]), true).unwrap();
        let b = s.insert("b", Matrix::from_vec(1, 1, vec![3.0]), false).unwrap();
        assert_eq!(s.l2_norm_squared(), 5.0);
        s.add_l2_grad(0.1);
        assert_eq!(s.grad(w).as_slice(), &[0.2, 0.4]);
        assert_eq!(s.grad(b).as_slice(), &[0.0]);
    }
}
