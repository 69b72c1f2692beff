//! Dense row-major tensors and the named parameter store.

use rand::Rng;

/// A dense tensor of 64-bit floats with an optional gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; len],
            grad: None,
        }
    }

    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "value count must match the shape"
        );
        Tensor {
            shape: shape.to_vec(),
            values,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rows of a matrix, or the length of a vector.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns of a matrix; 1 for a vector.
    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// One row of a matrix.
    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [f64]> {
        self.grad.as_deref_mut()
    }

    fn enable_grad(&mut self) {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.values.len()]);
        }
    }

    fn clear_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Glorot-uniform initialization over `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Tensor::from_values(&[rows, cols], values)
}

/// Handle to a tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

struct Entry {
    name: String,
    tensor: Tensor,
    learnable: bool,
}

/// All model tensors, learnable or frozen, in insertion order.
///
/// Insertion order is the serialization order, so models built by the same
/// code path get identical layouts.
#[derive(Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    /// Registers a learnable tensor; a gradient accumulator is attached.
    pub fn add(&mut self, name: &str, mut tensor: Tensor) -> ParamId {
        assert!(
            self.find(name).is_none(),
            "duplicate parameter name {name:?}"
        );
        tensor.enable_grad();
        self.entries.push(Entry {
            name: name.to_string(),
            tensor,
            learnable: true,
        });
        ParamId(self.entries.len() - 1)
    }

    /// Registers a frozen tensor (no gradient, skipped by the optimizer).
    pub fn add_frozen(&mut self, name: &str, tensor: Tensor) -> ParamId {
        assert!(
            self.find(name).is_none(),
            "duplicate parameter name {name:?}"
        );
        self.entries.push(Entry {
            name: name.to_string(),
            tensor,
            learnable: false,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn is_learnable(&self, id: ParamId) -> bool {
        self.entries[id.0].learnable
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor, bool)> {
        self.entries
            .iter()
            .map(|e| (e.name.as_str(), &e.tensor, e.learnable))
    }

    pub fn clear_grads(&mut self) {
        for e in &mut self.entries {
            e.tensor.clear_grad();
        }
    }
}
