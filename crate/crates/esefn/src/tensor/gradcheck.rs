//! Central finite differences, the independent gradient oracle.

use crate::error::{Error, Result};

use super::Tensor;

/// Numerically differentiates a scalar-valued function of `x` by central
/// differences: `(f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps)` per element.
///
/// The entries of `x` are perturbed in place and restored, so `f` may read
/// `x` through any shared handle (a model parameter, say) rather than
/// through its argument.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor, eps: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Input(format!(
            "finite-difference step must be positive and finite, got {eps}"
        )));
    }
    let n = x.len();
    let mut grad = vec![0.0; n];
    for i in 0..n {
        x.nudge(i, eps);
        let plus = f(x)?;
        x.nudge(i, -2.0 * eps);
        let minus = f(x)?;
        x.nudge(i, eps);
        grad[i] = (plus - minus) / (2.0 * eps);
    }
    Ok(Tensor::new_unchecked(x.dims().to_vec(), grad))
}

/// Worst guarded relative error between two gradients.
///
/// Per element: `|a - b| / max(|a|, |b|)`, except that when both magnitudes
/// are below 1e-5 the absolute difference is used instead: the difference
/// floor of a central difference sits around 1e-10, so relative comparison
/// on coordinates that small would measure round-off, not the gradient.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| {
            let denom = a.abs().max(b.abs());
            if denom < 1e-5 {
                (a - b).abs()
            } else {
                (a - b).abs() / denom
            }
        })
        .fold(0.0, f64::max)
}
