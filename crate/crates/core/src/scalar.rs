//! Scalar traits shared by the numeric kernels.
//!
//! Pixel carriers are always 8-bit; everything computed from them (intermediate
//! augment values, blur planes, reflectance, IoU, AP, pooled statistics) is
//! generic over the scalar so the same code runs on `f32`, `f64`, or an exact
//! rational type in tests.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, NumCast, ToPrimitive};

/// Ordered field-like scalar. Implemented for floats and for exact rationals
/// such as `num_rational::Ratio<i128>`.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("integer not representable in scalar type")
    }

    /// `num / den` built from integers.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_usize_exact(num) / Self::from_usize_exact(den)
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float + NumCast + ToPrimitive + std::iter::Sum {
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal not representable")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Round half away from zero and clamp into the 8-bit level range.
pub fn quantize<T: Real>(v: T) -> u8 {
    let r = v.round();
    if r <= T::zero() {
        0
    } else if r >= T::lit(255.0) {
        255
    } else {
        r.to_u8().unwrap_or(0)
    }
}
