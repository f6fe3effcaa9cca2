//! Scalar abstraction shared by every numerical routine in the crate.

use std::iter::Sum;

use clarabel::algebra::FloatT;
use num_complex::Complex;
use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar: `f32` or `f64`.
///
/// The bound set is what the conic backend needs plus serde, so every
/// domain type can be generic over the working precision.
pub trait Real: Float + FromPrimitive + FloatT + Sum + Serialize + DeserializeOwned {
    /// Converts an `f64` literal into the working precision.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable in working precision")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize representable in working precision")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over the working precision.
pub type Cplx<T> = Complex<T>;

/// Hermitian inner product `Σ conj(a_k) x_k`, i.e. `aᴴx`.
#[inline]
pub fn inner<T: Real>(a: &[Cplx<T>], x: &[Cplx<T>]) -> Cplx<T> {
    debug_assert_eq!(a.len(), x.len());
    a.iter().zip(x).fold(Cplx::new(T::zero(), T::zero()), |acc, (ak, xk)| acc + ak.conj() * xk)
}

#[inline]
pub fn norm_sqr<T: Real>(x: &[Cplx<T>]) -> T {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// `10·log10(v)`, clamped below at [`DB_FLOOR`].
#[inline]
pub fn to_db<T: Real>(v: T) -> f64 {
    let v = v.to_f64().unwrap_or(f64::NAN);
    if v.is_nan() {
        return f64::NAN;
    }
    if v <= 0.0 {
        return DB_FLOOR;
    }
    (10.0 * v.log10()).max(DB_FLOOR)
}

/// Decibel value reported for an exactly-zero error.
pub const DB_FLOOR: f64 = -320.0;

/// Wraps an angle into `(-π, π]`.
#[inline]
pub fn wrap_phase<T: Real>(d: T) -> T {
    let w = d.sin().atan2(d.cos());
    if w <= -T::PI() {
        T::PI()
    } else {
        w
    }
}
