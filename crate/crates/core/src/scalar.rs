//! Scalar abstraction: all numeric work is generic over the real field.
//!
//! `f64` is the scalar used by the test suite and the CLI; `f32` is supported
//! for callers that want the smaller footprint. Complex values are
//! `num_complex::Complex<T>` throughout.

use num_complex::Complex;

/// Real scalar type (`f32` or `f64`).
pub trait Real:
    nalgebra::RealField
    + num_traits::Num
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Copy
    + Default
    + std::fmt::Display
{
    /// Conversion from an `f64` literal (tolerances, defaults).
    fn lit(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("finite f64 literal")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex value over the generic real scalar.
pub type Cx<T> = Complex<T>;

pub fn czero<T: Real>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

pub fn cone<T: Real>() -> Cx<T> {
    Complex::new(T::one(), T::zero())
}

pub fn creal<T: Real>(x: T) -> Cx<T> {
    Complex::new(x, T::zero())
}

/// |z| without requiring `num_traits::Float` on `T`.
pub fn cabs<T: Real>(z: Cx<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

pub fn rmax<T: Real>(a: T, b: T) -> T {
    if a < b {
        b
    } else {
        a
    }
}
