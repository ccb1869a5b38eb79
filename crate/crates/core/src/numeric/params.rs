use super::matrix::Matrix;
use super::NumericError;

/// A named parameter with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

/// Ordered collection of named parameters.
///
/// Order is insertion order and is the canonical order for checkpoints and
/// optimizer state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter and returns its index.
    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) -> Result<usize, NumericError> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(NumericError::DuplicateParam(name));
        }
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.params.push(Param { name, value, grad });
        Ok(self.params.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, idx: usize) -> &Matrix {
        &self.params[idx].value
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut Matrix {
        &mut self.params[idx].value
    }

    pub fn grad(&self, idx: usize) -> &Matrix {
        &self.params[idx].grad
    }

    pub fn grad_mut(&mut self, idx: usize) -> &mut Matrix {
        &mut self.params[idx].grad
    }

    /// Borrows a parameter's value and its gradient buffer at once.
    pub fn value_and_grad_mut(&mut self, idx: usize) -> (&Matrix, &mut Matrix) {
        let p = &mut self.params[idx];
        (&p.value, &mut p.grad)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Adds `scale * other`'s gradients into this store's gradients.
    pub fn accumulate_grads(&mut self, other: &ParamStore, scale: f64) -> Result<(), NumericError> {
        if other.params.len() != self.params.len() {
            return Err(NumericError::Shape("gradient stores differ in size".into()));
        }
        for (mine, theirs) in self.params.iter_mut().zip(&other.params) {
            if mine.grad.shape() != theirs.grad.shape() {
                return Err(NumericError::Shape(format!(
                    "gradient shape mismatch for {}",
                    mine.name
                )));
            }
            for (g, o) in mine.grad.as_mut_slice().iter_mut().zip(theirs.grad.as_slice()) {
                *g += scale * o;
            }
        }
        Ok(())
    }

    /// Multiplies every gradient by `scale`.
    pub fn scale_grads(&mut self, scale: f64) {
        for p in &mut self.params {
            p.grad.as_mut_slice().iter_mut().for_each(|g| *g *= scale);
        }
    }

    /// Returns a copy whose gradients are zero.
    pub fn zeroed_clone(&self) -> Self {
        let mut out = self.clone();
        out.zero_grads();
        out
    }
}
