use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating point element type of every numeric routine in the crate.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for types that cannot hold one.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar type cannot represent f64 literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// One standard normal draw.
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = StandardNormal.sample(rng);
        Self::lit(z)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Logistic function, kept strictly inside (0, 1) even when saturated.
#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    let s = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    let eps = T::epsilon();
    s.max(eps).min(T::one() - eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_bounded() {
        for &x in &[-800.0f64, -3.0, 0.0, 2.5, 40.0, 800.0] {
            let s = sigmoid(x);
            assert!(s > 0.0 && s < 1.0);
            assert!((s + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(0.0f32), 0.5);
    }
}
