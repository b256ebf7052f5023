//! Floating point abstraction.
//!
//! Training runs in `f32`. Gradient checks instantiate the same code with
//! `f64`, where central differences are not swamped by rounding noise.
//! Transcendentals go through `libm` so results do not depend on the
//! platform's math library.

use core::fmt::{Debug, Display};
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Debug
    + Display
    + Default
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;

    /// `c[m×n] += a[m×k] · b[k×n]` with `a` and `b` addressed through
    /// (row, column) strides and `c` row-major. Callers guarantee that every
    /// addressed element is in bounds.
    #[doc(hidden)]
    fn gemm_strided(m: usize, k: usize, n: usize, a: &[Self], sa: [isize; 2], b: &[Self], sb: [isize; 2], c: &mut [Self]);

    #[inline]
    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    #[inline]
    fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn exp(self) -> Self {
        libm::expf(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::logf(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        libm::sqrtf(self)
    }
    #[inline]
    fn abs(self) -> Self {
        libm::fabsf(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    #[inline]
    fn gemm_strided(m: usize, k: usize, n: usize, a: &[Self], sa: [isize; 2], b: &[Self], sb: [isize; 2], c: &mut [Self]) {
        // SAFETY: extents are checked by the callers in `nn::gemm`.
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, 1.0, a.as_ptr(), sa[0], sa[1], b.as_ptr(), sb[0], sb[1], 1.0,
                c.as_mut_ptr(), n as isize, 1,
            )
        }
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        libm::fabs(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline]
    fn gemm_strided(m: usize, k: usize, n: usize, a: &[Self], sa: [isize; 2], b: &[Self], sb: [isize; 2], c: &mut [Self]) {
        // SAFETY: extents are checked by the callers in `nn::gemm`.
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0, a.as_ptr(), sa[0], sa[1], b.as_ptr(), sb[0], sb[1], 1.0,
                c.as_mut_ptr(), n as isize, 1,
            )
        }
    }
}
