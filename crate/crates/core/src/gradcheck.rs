//! Central finite differences, used as an independent check on every
//! analytic gradient in this crate.

use crate::error::{LireError, Result};
use crate::policy::{ParamTensor, Policy};

pub const DEFAULT_STEP: f64 = 1e-5;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn finite_difference<F>(f: F, point: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(LireError::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let plus = f(&x)?;
        x[i] = orig - step;
        let minus = f(&x)?;
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(LireError::Oracle(format!(
                "loss is not finite at coordinate {i} perturbed by ±{step}"
            )));
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// Finite-difference gradient of `loss` with respect to the policy logits.
pub fn finite_difference_grad<F>(loss: F, policy: &Policy, step: f64) -> Result<ParamTensor>
where
    F: Fn(&Policy) -> Result<f64>,
{
    let template = policy.params();
    let values = finite_difference(
        |x| {
            let mut p = policy.clone();
            p.params_mut().as_mut_slice().copy_from_slice(x);
            loss(&p)
        },
        template.as_slice(),
        step,
    )?;
    ParamTensor::from_vec(template.query_classes(), template.vocab_size(), values)
}

/// `‖a - b‖_∞ / max(‖a‖_∞, ‖b‖_∞)`; zero when both are zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient lengths differ");
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let x = [0.3, -1.2, 2.5, 0.0];
        let g = finite_difference(|v| Ok(v.iter().map(|t| t * t).sum()), &x, DEFAULT_STEP).unwrap();
        for (gi, xi) in g.iter().zip(x) {
            assert!((gi - 2.0 * xi).abs() < 1e-8);
        }
    }

    #[test]
    fn non_finite_loss_is_an_oracle_failure() {
        let r = finite_difference(|v| Ok(1.0 / v[0]), &[DEFAULT_STEP], DEFAULT_STEP);
        assert!(matches!(r, Err(LireError::Oracle(_))));
    }

    #[test]
    fn relative_error_is_scale_free() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((relative_error(&[1.0, 2.0], &[1.0, 2.2]) - 0.2 / 2.2).abs() < 1e-15);
    }
}
