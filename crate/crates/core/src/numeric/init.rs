use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;

/// Xavier (Glorot) uniform draw on `[-a, a]` with `a = sqrt(6 / (rows + cols))`.
pub fn xavier_uniform(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    xavier_uniform_with(rows, cols, &mut rng)
}

pub fn xavier_uniform_with<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_is_within_sqrt3() {
        for seed in 0..50 {
            let m = xavier_uniform(1, 1, seed);
            assert!(m.get(0, 0).abs() <= 3f64.sqrt());
        }
    }

    #[test]
    fn large_draw_has_near_zero_mean() {
        let m = xavier_uniform(1000, 1000, 11);
        let mean = m.as_slice().iter().sum::<f64>() / m.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        let bound = (6.0 / 2000.0f64).sqrt();
        assert!(m.as_slice().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn same_seed_same_matrix() {
        assert_eq!(xavier_uniform(7, 5, 3), xavier_uniform(7, 5, 3));
        assert_ne!(xavier_uniform(7, 5, 3), xavier_uniform(7, 5, 4));
    }
}
