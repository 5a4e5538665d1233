//! Scalar abstraction shared by the numerical modules.
//!
//! Everything that does arithmetic is generic over [`Real`], which is
//! implemented for `f32` and `f64`. The pipeline, cache files and CLI work in
//! `f64`; see the aliases at the crate root.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use nalgebra::Complex;

/// Real floating-point scalar usable by the channel pipeline.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }

    /// Machine epsilon of the scalar type.
    fn epsilon() -> Self;
}

impl Real for f32 {
    fn epsilon() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn epsilon() -> Self {
        f64::EPSILON
    }
}

/// `exp(i·phase)`.
#[inline]
pub fn cis<S: Real>(phase: S) -> Complex<S> {
    Complex::new(phase.cos(), phase.sin())
}

#[inline]
pub fn c_zero<S: Real>() -> Complex<S> {
    Complex::new(S::zero(), S::zero())
}

#[inline]
pub fn c_real<S: Real>(re: S) -> Complex<S> {
    Complex::new(re, S::zero())
}

/// Modulus `|z|`, computed without overflow for large components.
#[inline]
pub fn cabs<S: Real>(z: Complex<S>) -> S {
    z.re.hypot(z.im)
}
