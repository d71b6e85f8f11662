use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before the log.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to `pred`.
pub fn bce_loss<T: Scalar>(pred: &[T], label: &[T]) -> Result<(T, Vec<T>)> {
    if pred.len() != label.len() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "bce over {} predictions and {} labels",
            pred.len(),
            label.len()
        )));
    }
    let eps = T::lit(BCE_EPS);
    let one = T::one();
    let n = T::lit(pred.len() as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &y) in pred.iter().zip(label) {
        let p = p.max(eps).min(one - eps);
        loss = loss - (y * p.ln() + (one - y) * (one - p).ln());
        grad.push((-y / p + (one - y) / (one - p)) / n);
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_probability_costs_ln2() {
        let (l, g) = bce_loss(&[0.5f64], &[1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((g[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_is_nearly_free() {
        let (l, _) = bce_loss(&[1.0f64, 0.0], &[1.0, 0.0]).unwrap();
        assert!(l <= 1e-6);
    }

    #[test]
    fn two_point_closed_form() {
        let (l, _) = bce_loss(&[0.9f64, 0.1], &[1.0, 0.0]).unwrap();
        assert!((l - 0.10536051565782628).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let p = [0.3f64, 0.8, 0.55];
        let y = [1.0, 0.0, 1.0];
        let (_, g) = bce_loss(&p, &y).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut up = p;
            let mut dn = p;
            up[i] += h;
            dn[i] -= h;
            let fd = (bce_loss(&up, &y).unwrap().0 - bce_loss(&dn, &y).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(bce_loss(&[0.5f64], &[1.0, 0.0]).is_err());
    }
}
