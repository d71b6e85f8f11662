use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean absolute error.
pub fn mae<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!(
            "mae over vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let s: T = a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum();
    Ok(s / T::lit(a.len() as f64))
}

/// Quantile by linear interpolation between order statistics
/// (position `(n − 1) · q` in the sorted sample).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("five-number summary of an empty list".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(FiveNumber {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }

    /// Points beyond 1.5 IQR of the quartiles.
    pub fn outliers(&self, values: &[f64]) -> Vec<f64> {
        let iqr = self.q3 - self.q1;
        let (lo, hi) = (self.q1 - 1.5 * iqr, self.q3 + 1.5 * iqr);
        values.iter().copied().filter(|&v| v < lo || v > hi).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_by_hand() {
        assert_eq!(mae(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 1.5);
        assert_eq!(mae(&[3.0f32, -1.0], &[3.0, -1.0]).unwrap(), 0.0);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn constant_summary() {
        let f = FiveNumber::of(&[2.0; 7]).unwrap();
        assert_eq!([f.min, f.q1, f.median, f.q3, f.max], [2.0; 5]);
    }

    #[test]
    fn max_keeps_outlier() {
        let v = [1.0, 2.0, 3.0, 4.0, 100.0];
        let f = FiveNumber::of(&v).unwrap();
        assert_eq!(f.max, 100.0);
        assert_eq!(f.median, 3.0);
        assert_eq!(f.outliers(&v), vec![100.0]);
    }
}
