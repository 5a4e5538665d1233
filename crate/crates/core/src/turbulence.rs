//! Kolmogorov phase structure function and Fried parameter.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::gamma;

/// Turbulence spectrum. Only Kolmogorov is implemented; other spectra plug in
/// through [`StructureFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TurbulenceModel {
    #[default]
    Kolmogorov,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbulenceParams<S> {
    /// Refractive-index structure constant `C_n²` in m^(-2/3), constant along the path.
    pub cn2: S,
    pub model: TurbulenceModel,
}

impl<S: Real> TurbulenceParams<S> {
    pub fn kolmogorov(cn2: S) -> Result<Self> {
        if !(cn2 >= S::zero()) {
            return Err(Error::Domain(format!("cn2 must be >= 0, got {}", cn2.as_f64())));
        }
        Ok(Self {
            cn2,
            model: TurbulenceModel::Kolmogorov,
        })
    }

    pub fn none() -> Self {
        Self {
            cn2: S::zero(),
            model: TurbulenceModel::Kolmogorov,
        }
    }

    pub fn is_quiescent(&self) -> bool {
        self.cn2 == S::zero()
    }

    /// Structure function accumulated over a path of length `z`.
    ///
    /// Zero turbulence (or zero path length) yields [`Quiescent`].
    pub fn structure_function(&self, wavelength: S, z: S) -> Result<Arc<dyn StructureFunction<S>>> {
        if self.is_quiescent() || z == S::zero() {
            return Ok(Arc::new(Quiescent));
        }
        match self.model {
            TurbulenceModel::Kolmogorov => {
                let r0 = fried_parameter(wavelength, self.cn2, z)?;
                Ok(Arc::new(Kolmogorov::new(r0)))
            }
        }
    }
}

/// Mean-square phase difference between two points a distance `separation` apart.
///
/// Implementations must be non-negative, zero at zero separation, and
/// non-decreasing in the separation.
pub trait StructureFunction<S>: Send + Sync {
    fn phase_variance(&self, separation: S) -> S;

    /// `true` when the structure function is identically zero.
    fn is_trivial(&self) -> bool {
        false
    }
}

/// No turbulence: `D_φ ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quiescent;

impl<S: Real> StructureFunction<S> for Quiescent {
    fn phase_variance(&self, _separation: S) -> S {
        S::zero()
    }

    fn is_trivial(&self) -> bool {
        true
    }
}

/// Kolmogorov structure function `6.8839·(Δr/r0)^(5/3)` for a given Fried parameter.
#[derive(Debug, Clone, Copy)]
pub struct Kolmogorov<S> {
    fried: S,
    coefficient: S,
}

impl<S: Real> Kolmogorov<S> {
    pub fn new(fried: S) -> Self {
        Self {
            fried,
            coefficient: kolmogorov_coefficient(),
        }
    }

    pub fn fried(&self) -> S {
        self.fried
    }
}

impl<S: Real> StructureFunction<S> for Kolmogorov<S> {
    fn phase_variance(&self, separation: S) -> S {
        if separation <= S::zero() {
            return S::zero();
        }
        self.coefficient * (separation / self.fried).powf(S::lit(5.0 / 3.0))
    }
}

/// `2·(24/5·Γ(6/5))^(5/6)` ≈ 6.8839.
pub fn kolmogorov_coefficient<S: Real>() -> S {
    let g = gamma(S::lit(6.0 / 5.0));
    S::lit(2.0) * (S::lit(24.0 / 5.0) * g).powf(S::lit(5.0 / 6.0))
}

/// Fried parameter `r0 = (16.6·C_n²·z/λ²)^(-3/5)` for a constant-`C_n²` path.
pub fn fried_parameter<S: Real>(wavelength: S, cn2: S, z: S) -> Result<S> {
    if !(wavelength > S::zero()) {
        return Err(Error::Domain("wavelength must be positive".into()));
    }
    if !(cn2 > S::zero()) || !(z > S::zero()) {
        return Err(Error::Domain(format!(
            "Fried parameter is infinite for cn2={} z={} (use the zero-turbulence branch)",
            cn2.as_f64(),
            z.as_f64()
        )));
    }
    let integrated = cn2 * z;
    Ok((S::lit(16.6) * integrated / (wavelength * wavelength)).powf(S::lit(-3.0 / 5.0)))
}

/// Kolmogorov `D_φ(Δr)` for Fried parameter `r0`.
pub fn phase_structure<S: Real>(delta_r: S, r0: S) -> S {
    Kolmogorov::new(r0).phase_variance(delta_r)
}
