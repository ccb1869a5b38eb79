use super::matrix::Matrix;
use super::params::ParamStore;
use super::NumericError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sgd,
    Adam,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(format!("unknown optimizer `{other}` (expected sgd or adam)")),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        })
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer state, including Adam's first and second moments per parameter.
#[derive(Debug, Clone)]
pub struct Optimizer {
    algorithm: Algorithm,
    learning_rate: f64,
    step: u64,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(algorithm: Algorithm, learning_rate: f64, params: &ParamStore) -> Self {
        let zeros = || {
            params
                .params()
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect::<Vec<_>>()
        };
        let (first_moment, second_moment) = match algorithm {
            Algorithm::Adam => (zeros(), zeros()),
            Algorithm::Sgd => (Vec::new(), Vec::new()),
        };
        Self {
            algorithm,
            learning_rate,
            step: 0,
            first_moment,
            second_moment,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    ///
    /// Parameters are left untouched if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<(), NumericError> {
        if let Some(p) = params.params().iter().find(|p| !p.grad.is_finite()) {
            return Err(NumericError::Diverged(format!(
                "non-finite gradient in `{}`",
                p.name
            )));
        }
        if self.algorithm == Algorithm::Adam && self.first_moment.len() != params.len() {
            return Err(NumericError::Shape(
                "optimizer state does not match parameter store".into(),
            ));
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.algorithm {
            Algorithm::Sgd => {
                for p in params.params_mut() {
                    for (v, g) in p.value.as_mut_slice().iter_mut().zip(p.grad.as_slice()) {
                        *v -= lr * g;
                    }
                }
            }
            Algorithm::Adam => {
                let t = self.step as i32;
                let bias1 = 1.0 - ADAM_BETA1.powi(t);
                let bias2 = 1.0 - ADAM_BETA2.powi(t);
                for ((p, m), v) in params
                    .params_mut()
                    .iter_mut()
                    .zip(&mut self.first_moment)
                    .zip(&mut self.second_moment)
                {
                    let grads = p.grad.as_slice();
                    let values = p.value.as_mut_slice();
                    for i in 0..grads.len() {
                        let g = grads[i];
                        let mi = &mut m.as_mut_slice()[i];
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * g;
                        let vi = &mut v.as_mut_slice()[i];
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = m.as_slice()[i] / bias1;
                        let v_hat = v.as_slice()[i] / bias2;
                        values[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        params.zero_grads();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64, grad: f64) -> ParamStore {
        let mut store = ParamStore::new();
        let i = store.insert("p", Matrix::column(&[value])).unwrap();
        store.grad_mut(i).set(0, 0, grad);
        store
    }

    #[test]
    fn sgd_arithmetic() {
        let mut store = single(1.0, 2.0);
        let mut opt = Optimizer::new(Algorithm::Sgd, 0.1, &store);
        opt.step(&mut store).unwrap();
        assert!((store.value(0).get(0, 0) - 0.8).abs() < 1e-15);
        assert_eq!(store.grad(0).get(0, 0), 0.0);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        for alg in [Algorithm::Sgd, Algorithm::Adam] {
            let mut store = single(0.37, 0.0);
            let mut opt = Optimizer::new(alg, 0.5, &store);
            opt.step(&mut store).unwrap();
            assert_eq!(store.value(0).get(0, 0), 0.37, "{alg}");
        }
    }

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        let i = store.insert("w", Matrix::from_vec(2, 2, vec![0.5, -1.0, 2.0, 0.0]).unwrap()).unwrap();
        store.grad_mut(i).fill(1.0);
        let before = store.value(i).clone();
        let lr = 1e-3;
        let mut opt = Optimizer::new(Algorithm::Adam, lr, &store);
        opt.step(&mut store).unwrap();
        for (a, b) in before.as_slice().iter().zip(store.value(i).as_slice()) {
            let moved = a - b;
            assert!(((moved - lr) / lr).abs() <= 1e-6, "moved {moved}");
        }
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut store = single(1.0, f64::NAN);
        let mut opt = Optimizer::new(Algorithm::Adam, 0.1, &store);
        assert!(matches!(opt.step(&mut store), Err(NumericError::Diverged(_))));
        assert_eq!(store.value(0).get(0, 0), 1.0);
    }
}
