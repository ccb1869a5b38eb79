//! Differentiable primitives used by the attention model.
//!
//! Each primitive is a forward function plus a backward rule that maps the
//! gradient of the output to gradients of the inputs. Parameter gradients are
//! accumulated additively into caller-owned buffers, so repeated calls within a
//! batch sum their contributions.

use super::matrix::{dot, Matrix};
use super::NumericError;

fn check_len(what: &str, got: usize, want: usize) -> Result<(), NumericError> {
    if got != want {
        return Err(NumericError::Shape(format!(
            "{what}: expected length {want}, got {got}"
        )));
    }
    Ok(())
}

/// `y = W x + b`.
pub fn affine(w: &Matrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>, NumericError> {
    check_len("affine bias", b.len(), w.rows())?;
    let mut y = w.matvec(x)?;
    y.iter_mut().zip(b).for_each(|(y, b)| *y += b);
    Ok(y)
}

/// Backward rule of [`affine`]: accumulates `dW += dy xᵀ`, `db += dy` and
/// returns `dx = Wᵀ dy`.
pub fn affine_backward(
    w: &Matrix,
    x: &[f64],
    dy: &[f64],
    dw: &mut Matrix,
    db: &mut [f64],
) -> Result<Vec<f64>, NumericError> {
    check_len("affine_backward dy", dy.len(), w.rows())?;
    check_len("affine_backward x", x.len(), w.cols())?;
    if dw.shape() != w.shape() || db.len() != w.rows() {
        return Err(NumericError::Shape(
            "affine_backward: gradient buffers do not match parameter shapes".into(),
        ));
    }
    dw.add_outer(dy, x, 1.0);
    db.iter_mut().zip(dy).for_each(|(g, d)| *g += d);
    w.matvec_transposed(dy)
}

pub fn tanh(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Backward rule of [`tanh`], expressed through its output `y = tanh(x)`.
pub fn tanh_backward(y: &[f64], dy: &[f64]) -> Result<Vec<f64>, NumericError> {
    check_len("tanh_backward", dy.len(), y.len())?;
    Ok(y.iter().zip(dy).map(|(y, d)| d * (1.0 - y * y)).collect())
}

/// Softmax with max-subtraction.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Backward rule of [`softmax`] given its output `p`: `dx = p ⊙ (dp − ⟨p, dp⟩)`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Result<Vec<f64>, NumericError> {
    check_len("softmax_backward", dp.len(), p.len())?;
    let inner = dot(p, dp);
    Ok(p.iter().zip(dp).map(|(p, d)| p * (d - inner)).collect())
}

/// Vertical concatenation `[x; y]`.
pub fn vconcat(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    out.extend_from_slice(x);
    out.extend_from_slice(y);
    out
}

/// Splits the gradient of `[x; y]` back into `(dx, dy)`.
pub fn vconcat_backward(dz: &[f64], x_len: usize) -> Result<(Vec<f64>, Vec<f64>), NumericError> {
    if x_len > dz.len() {
        return Err(NumericError::Shape(format!(
            "vconcat_backward: split at {x_len} of a length-{} gradient",
            dz.len()
        )));
    }
    let (a, b) = dz.split_at(x_len);
    Ok((a.to_vec(), b.to_vec()))
}

/// `Σ_k w_k v_k`, reduced in index order.
pub fn weighted_sum(weights: &[f64], vectors: &[Vec<f64>]) -> Result<Vec<f64>, NumericError> {
    check_len("weighted_sum", vectors.len(), weights.len())?;
    let dim = vectors.first().map_or(0, Vec::len);
    let mut out = vec![0.0; dim];
    for (w, v) in weights.iter().zip(vectors) {
        check_len("weighted_sum member", v.len(), dim)?;
        out.iter_mut().zip(v).for_each(|(o, x)| *o += w * x);
    }
    Ok(out)
}

/// Backward rule of [`weighted_sum`]: returns `(dw, dv)` with `dw_k = ⟨v_k, dy⟩`
/// and `dv_k = w_k dy`.
pub fn weighted_sum_backward(
    weights: &[f64],
    vectors: &[Vec<f64>],
    dy: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>), NumericError> {
    check_len("weighted_sum_backward", vectors.len(), weights.len())?;
    let mut dw = Vec::with_capacity(weights.len());
    let mut dv = Vec::with_capacity(weights.len());
    for (w, v) in weights.iter().zip(vectors) {
        check_len("weighted_sum_backward member", v.len(), dy.len())?;
        dw.push(dot(v, dy));
        dv.push(dy.iter().map(|d| w * d).collect());
    }
    Ok((dw, dv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let x = [0.3, -1.2, 2.5, 0.0];
        let shifted: Vec<f64> = x.iter().map(|v| v + 100.0).collect();
        for (a, b) in softmax(&x).iter().zip(softmax(&shifted)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let p = softmax(&[1e6, 0.0, -1e6]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tanh_derivative_at_origin_is_one() {
        let y = tanh(&[0.0]);
        assert_eq!(tanh_backward(&y, &[1.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn affine_rejects_shape_mismatch() {
        let w = Matrix::zeros(2, 3);
        assert!(matches!(affine(&w, &[1.0, 2.0], &[0.0, 0.0]), Err(NumericError::Shape(_))));
        assert!(matches!(affine(&w, &[1.0, 2.0, 3.0], &[0.0]), Err(NumericError::Shape(_))));
    }

    #[test]
    fn affine_backward_accumulates() {
        let w = Matrix::from_vec(1, 2, vec![2.0, -1.0]).unwrap();
        let mut dw = Matrix::zeros(1, 2);
        let mut db = vec![0.0];
        for _ in 0..2 {
            let dx = affine_backward(&w, &[3.0, 4.0], &[1.0], &mut dw, &mut db).unwrap();
            assert_eq!(dx, vec![2.0, -1.0]);
        }
        assert_eq!(dw.as_slice(), &[6.0, 8.0]);
        assert_eq!(db, vec![2.0]);
    }

    #[test]
    fn vconcat_round_trip() {
        let z = vconcat(&[1.0, 2.0], &[3.0]);
        assert_eq!(z, vec![1.0, 2.0, 3.0]);
        let (a, b) = vconcat_backward(&z, 2).unwrap();
        assert_eq!((a, b), (vec![1.0, 2.0], vec![3.0]));
    }

    #[test]
    fn weighted_sum_of_opposites_cancels() {
        let g = weighted_sum(&[0.5, 0.5], &[vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }
}
