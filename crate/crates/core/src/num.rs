//! Scalar abstractions shared by the fitness, sweep and statistics code.
//!
//! Fitness values are sums of a few rewards and penalties, so they can be
//! computed exactly with [`num_rational::Rational64`] as well as with the usual
//! floating point types. Statistics need square roots and distribution
//! functions, which is what [`Real`] adds on top of [`Scalar`].

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// A number type fitness values can be accumulated in.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Lossless conversion of an event count.
    fn from_count(count: usize) -> Self {
        Self::from_usize(count).expect("count representable in scalar type")
    }

    /// Converts a configuration value given as `f64`.
    ///
    /// Rational types use the closest small-denominator fraction, so `0.075`
    /// becomes `3/40`.
    fn from_param(value: f64) -> Self {
        Self::from_f64(value).expect("parameter representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

/// Floating point scalar, used wherever a square root or a CDF is involved.
pub trait Real: Scalar + Float + Sum {}

impl<T> Real for T where T: Scalar + Float + Sum {}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    let total = values.iter().fold(S::zero(), |acc, &v| acc + v);
    total / S::from_count(values.len())
}

/// Standard error of the mean with the `n - 1` sample variance.
pub fn standard_error<R: Real>(values: &[R]) -> R {
    let n = values.len();
    if n < 2 {
        return R::zero();
    }
    let m = mean(values);
    let ss: R = values.iter().map(|&v| (v - m) * (v - m)).sum();
    let var = ss / R::from_count(n - 1);
    (var / R::from_count(n)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn param_conversion_is_exact_for_rationals() {
        assert_eq!(Rational64::from_param(0.075), Rational64::new(3, 40));
        assert_eq!(Rational64::from_param(1.0), Rational64::from_integer(1));
    }

    #[test]
    fn mean_and_sem() {
        assert_eq!(mean::<f64>(&[]), 0.0);
        assert_eq!(mean(&[1.0f32, 2.0, 3.0]), 2.0);
        assert_eq!(mean(&[Rational64::new(1, 2), Rational64::new(1, 3)]), Rational64::new(5, 12));
        // sample sd of [1,2,3] is 1, so sem = 1/sqrt(3)
        let sem = standard_error(&[1.0f64, 2.0, 3.0]);
        assert!((sem - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(standard_error(&[4.0f64]), 0.0);
    }
}
