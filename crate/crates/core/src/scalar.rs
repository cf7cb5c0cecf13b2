//! Scalar abstraction shared by the simulator, readout and capacity code.
//!
//! Everything numerical is generic over [`Real`], implemented for `f32` and
//! `f64`. Running the same pipeline in single precision is how the precision
//! floor of the capacity estimate is shown to be a property of the arithmetic.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Explicitly stored mantissa bits.
    const MANTISSA_BITS: u32;
    /// Default relative singular-value cutoff for pseudo-inverse fits.
    const DEFAULT_RCOND: f64;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f64 {
    const MANTISSA_BITS: u32 = 52;
    const DEFAULT_RCOND: f64 = 1e-15;
}

impl Real for f32 {
    const MANTISSA_BITS: u32 = 23;
    const DEFAULT_RCOND: f64 = 1e-6;
}

/// Complex amplitude over a [`Real`] scalar.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

/// `e^{i phase}`.
#[inline]
pub(crate) fn cis<T: Real>(phase: T) -> C<T> {
    Complex::new(phase.cos(), phase.sin())
}

#[inline]
pub(crate) fn norm_sqr<T: Real>(z: C<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Phase of a complex number in `(-pi, pi]`.
#[inline]
pub(crate) fn arg<T: Real>(z: C<T>) -> T {
    z.im.atan2(z.re)
}
