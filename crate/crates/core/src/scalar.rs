//! Scalar abstraction for the signal path.
//!
//! Frames, transforms, modems and channel application are generic over the
//! real scalar `T` of their complex samples. `f64` is the reference type and
//! the one every tolerance in the test suite is stated for; `f32` is supported
//! for throughput-oriented use.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + std::fmt::Display
{
    #[inline]
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 converts to every Real")
    }

    #[inline]
    fn f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// e^{j 2π frac} evaluated in f64 and rounded once into `T`.
#[inline]
pub fn cis<T: Real>(frac: f64) -> Complex<T> {
    let (s, c) = (std::f64::consts::TAU * frac).sin_cos();
    Complex::new(T::of(c), T::of(s))
}

#[inline]
pub fn to_c64<T: Real>(z: Complex<T>) -> Complex<f64> {
    Complex::new(z.re.f64(), z.im.f64())
}

#[inline]
pub fn from_c64<T: Real>(z: Complex<f64>) -> Complex<T> {
    Complex::new(T::of(z.re), T::of(z.im))
}

/// e^{j 2π num/den}, with the ratio reduced exactly in integers first.
#[inline]
pub fn cis_ratio<T: Real>(num: i64, den: i64) -> Complex<T> {
    debug_assert!(den > 0);
    cis(num.rem_euclid(den) as f64 / den as f64)
}
