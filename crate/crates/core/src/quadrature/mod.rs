//! Deterministic adaptive quadrature on boxes of dimension 1 to 3.
//!
//! Complex integrands are handled as two real components sharing a single
//! subdivision tree. One dimension uses adaptive Gauss-Kronrod (7/15); two and
//! three dimensions use the degree-7/5 embedded Genz-Malik rule with globally
//! adaptive bisection. Semi-infinite axes must be truncated by the caller.

mod gauss_legendre;
mod genz_malik;
mod kronrod;

pub use gauss_legendre::{gauss_legendre, CompositeRule};
pub use genz_malik::integrate_box;
pub use kronrod::integrate_1d;

use crate::scalar::{Complex, Real};

/// Convergence controls for a single integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<S> {
    pub rel_tol: S,
    pub abs_tol: S,
    pub max_evaluations: usize,
}

impl<S: Real> Tolerance<S> {
    pub fn new(rel_tol: S, abs_tol: S, max_evaluations: usize) -> Self {
        Self {
            rel_tol,
            abs_tol,
            max_evaluations,
        }
    }

    /// Error target `max(abs_tol, rel_tol·|value|)`.
    pub fn target(&self, magnitude: S) -> S {
        self.abs_tol.max(self.rel_tol * magnitude)
    }

    pub fn is_valid(&self) -> bool {
        (self.rel_tol > S::zero() || self.abs_tol > S::zero())
            && self.rel_tol >= S::zero()
            && self.abs_tol >= S::zero()
            && self.max_evaluations > 0
    }
}

impl Default for Tolerance<f64> {
    fn default() -> Self {
        Self::new(1e-6, 1e-10, 50_000_000)
    }
}

/// A box-integration request over `N` axes.
pub struct IntegrationRequest<S, F, const N: usize> {
    pub integrand: F,
    pub lower: [S; N],
    pub upper: [S; N],
    pub tolerance: Tolerance<S>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationResult<S> {
    pub value: Complex<S>,
    pub error_estimate: S,
    pub evaluations: usize,
    pub converged: bool,
}

impl<S, F, const N: usize> IntegrationRequest<S, F, N>
where
    S: Real,
    F: Fn(&[S; N]) -> Complex<S>,
{
    pub fn new(integrand: F, lower: [S; N], upper: [S; N], tolerance: Tolerance<S>) -> Self {
        Self {
            integrand,
            lower,
            upper,
            tolerance,
        }
    }

    /// Runs the integration, dispatching on the dimension.
    ///
    /// # Panics
    ///
    /// If `N` is not 1, 2 or 3, if a lower bound is not below its upper bound,
    /// or if the tolerance is invalid.
    pub fn integrate(&self) -> IntegrationResult<S> {
        assert!(
            self.lower.iter().zip(&self.upper).all(|(a, b)| a < b),
            "lower bounds must be strictly below upper bounds"
        );
        assert!(self.tolerance.is_valid(), "invalid tolerance");
        match N {
            1 => integrate_1d(
                |x| {
                    let mut p = [S::zero(); N];
                    p[0] = x;
                    (self.integrand)(&p)
                },
                self.lower[0],
                self.upper[0],
                self.tolerance,
            ),
            2 | 3 => integrate_box(&self.integrand, self.lower, self.upper, self.tolerance),
            _ => panic!("only 1-3 dimensional integrals are supported"),
        }
    }
}

/// Convenience wrapper for a three-dimensional box integral.
pub fn integrate_3d<S, F>(
    integrand: F,
    lower: [S; 3],
    upper: [S; 3],
    tolerance: Tolerance<S>,
) -> IntegrationResult<S>
where
    S: Real,
    F: Fn(&[S; 3]) -> Complex<S>,
{
    IntegrationRequest::new(integrand, lower, upper, tolerance).integrate()
}
