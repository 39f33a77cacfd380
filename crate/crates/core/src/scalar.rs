//! Scalar abstraction shared by every numerical module.
//!
//! All core routines are written against [`Real`], which is implemented for
//! `f32` and `f64`. Complex quantities are `Complex<T>` over the same scalar.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default + Send + Sync {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn machine_eps() -> Self {
        Self::default_epsilon()
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Modulus of a complex number.
#[inline]
pub fn cabs<T: Real>(z: nalgebra::Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Complex number from modulus and argument.
#[inline]
pub fn polar<T: Real>(r: T, theta: T) -> nalgebra::Complex<T> {
    nalgebra::Complex::new(r * theta.cos(), r * theta.sin())
}
