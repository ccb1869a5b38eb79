//! Central finite-difference gradient checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;

/// Tensors with more elements than this are checked on a random subsample.
pub const FULL_CHECK_LIMIT: usize = 400;
/// Minimum subsample size for large tensors.
pub const SUBSAMPLE_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() <= self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Compares the analytic gradients already stored in `params` against central
/// differences of `loss`.
///
/// `loss` is evaluated on perturbed copies of the parameter values; it must be
/// deterministic. The `seed` only picks subsampled coordinates.
pub fn finite_difference_check<F>(
    mut loss: F,
    params: &ParamStore,
    h: f64,
    tolerance: f64,
    seed: u64,
) -> GradCheckReport
where
    F: FnMut(&ParamStore) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut report = Vec::with_capacity(params.len());
    for idx in 0..params.len() {
        let n = params.value(idx).len();
        let coords: Vec<usize> = if n > FULL_CHECK_LIMIT {
            let mut picked = sample(&mut rng, n, SUBSAMPLE_SIZE).into_vec();
            picked.sort_unstable();
            picked
        } else {
            (0..n).collect()
        };
        let mut max_err = 0.0f64;
        for &c in &coords {
            let original = params.value(idx).as_slice()[c];
            probe.value_mut(idx).as_mut_slice()[c] = original + h;
            let plus = loss(&probe);
            probe.value_mut(idx).as_mut_slice()[c] = original - h;
            let minus = loss(&probe);
            probe.value_mut(idx).as_mut_slice()[c] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = params.grad(idx).as_slice()[c];
            max_err = max_err.max(relative_error(analytic, numeric));
        }
        report.push(ParamCheck {
            name: params.params()[idx].name.clone(),
            checked: coords.len(),
            max_rel_error: max_err,
        });
    }
    GradCheckReport {
        params: report,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Matrix;

    fn half_square_norm(store: &ParamStore) -> f64 {
        store
            .params()
            .iter()
            .flat_map(|p| p.value.as_slice())
            .map(|v| 0.5 * v * v)
            .sum()
    }

    fn quadratic_store(corrupt: bool) -> ParamStore {
        let mut store = ParamStore::new();
        let values = vec![0.3, -1.7, 2.2, 0.05, -0.9, 1.4];
        let i = store.insert("p", Matrix::from_vec(2, 3, values.clone()).unwrap()).unwrap();
        for (k, v) in values.iter().enumerate() {
            let g = if corrupt { 1.1 * v } else { *v };
            store.grad_mut(i).as_mut_slice()[k] = g;
        }
        store
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        let store = quadratic_store(false);
        let report = finite_difference_check(half_square_norm, &store, 1e-5, 1e-9, 0);
        assert!(report.passed(), "max err {}", report.max_rel_error());
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let store = quadratic_store(true);
        let report = finite_difference_check(half_square_norm, &store, 1e-5, 1e-4, 0);
        assert!(report.max_rel_error() > 1e-2);
        assert!(!report.passed());
    }

    #[test]
    fn large_tensors_are_subsampled() {
        let mut store = ParamStore::new();
        let i = store.insert("big", Matrix::zeros(30, 30)).unwrap();
        store.grad_mut(i).fill(0.0);
        let report = finite_difference_check(half_square_norm, &store, 1e-5, 1e-9, 4);
        assert_eq!(report.params[0].checked, SUBSAMPLE_SIZE);
        assert!(report.passed());
    }
}
