use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the optimizer core is written against: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or computed constant.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

/// Checks that `w` is a probability vector up to `1e-12` in the sum.
pub(crate) fn check_simplex<T: Scalar>(name: &'static str, w: &[T]) -> crate::Result<()> {
    if w.is_empty() {
        return Err(crate::Error::invalid(name, "empty weight vector"));
    }
    if let Some(bad) = w.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
        return Err(crate::Error::invalid(
            name,
            format!("negative or non-finite weight {bad}"),
        ));
    }
    let total: f64 = w.iter().map(|v| v.to_f64_lossy()).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(crate::Error::invalid(
            name,
            format!("weights sum to {total}, not 1"),
        ));
    }
    Ok(())
}
