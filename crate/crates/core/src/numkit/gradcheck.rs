use super::matrix::DenseMatrix;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Central-difference gradient of a scalar field over a flat slice:
/// `(f(x + h e_i) - f(x - h e_i)) / 2h` per coordinate.
///
/// The oracle every analytic gradient in this crate is tested against.
pub fn finite_diff_scalar_field<S, F>(f: F, x: &[S], h: S) -> Result<Vec<S>>
where
    S: Scalar,
    F: Fn(&[S]) -> Result<S>,
{
    if h <= S::zero() {
        return Err(Error::Config("finite difference step must be positive".into()));
    }
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let original = probe[i];
        probe[i] = original + h;
        let up = f(&probe)?;
        probe[i] = original - h;
        let down = f(&probe)?;
        probe[i] = original;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("finite_diff evaluation".into()));
        }
        grad.push((up - down) / (S::from_f64_lossy(2.0) * h));
    }
    Ok(grad)
}

/// Matrix-shaped wrapper around [`finite_diff_scalar_field`].
pub fn finite_diff_grad<S, F>(f: F, x: &DenseMatrix<S>, h: S) -> Result<DenseMatrix<S>>
where
    S: Scalar,
    F: Fn(&DenseMatrix<S>) -> Result<S>,
{
    let (rows, cols) = x.shape();
    let grad = finite_diff_scalar_field(
        |flat| {
            let m = DenseMatrix::from_vec(rows, cols, flat.to_vec())?;
            f(&m)
        },
        x.data(),
        h,
    )?;
    DenseMatrix::from_vec(rows, cols, grad)
}

/// Relative error with an absolute floor, for comparing analytic gradients
/// against the finite-difference oracle (zero-vs-zero compares equal).
pub fn grad_rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_derivative_of_square() {
        let fd = finite_diff_scalar_field(|x: &[f64]| Ok(x[0] * x[0]), &[3.0], 1e-5).unwrap();
        assert!((fd[0] - 6.0).abs() <= 1e-6, "got {}", fd[0]);
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let fd = finite_diff_scalar_field(|_: &[f64]| Ok(4.2), &[1.0, -2.0, 0.0], 1e-5).unwrap();
        assert!(fd.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn known_gradient_of_sum_of_squares() {
        let fd = finite_diff_scalar_field(
            |x: &[f64]| Ok(x.iter().map(|v| v * v).sum()),
            &[1.0, 2.0],
            1e-5,
        )
        .unwrap();
        assert!((fd[0] - 2.0).abs() <= 1e-6);
        assert!((fd[1] - 4.0).abs() <= 1e-6);
    }

    #[test]
    fn non_finite_evaluation_is_an_error() {
        let res = finite_diff_scalar_field(|x: &[f64]| Ok(1.0 / (x[0] - x[0])), &[1.0], 1e-5);
        assert!(res.is_err());
    }
}
