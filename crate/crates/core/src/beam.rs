//! Laguerre-Gauss OAM eigenfunctions and paraxial beam geometry.
//!
//! A mode `|l,p⟩` has the transverse wave function
//! `(2π)^{-1/2} R_{l,p}(r,z) e^{ilθ}` with
//!
//! ```text
//! R_{l,p}(r,z) = A/w · (√2 r/w)^|l| · L_p^|l|(2r²/w²) · e^{-r²/w²}
//!              · e^{-ik r²/(2R(z))} · e^{+i(2p+|l|+1)·atan(z/z_R)}
//! ```
//!
//! and `A = 2·√(p!/(p+|l|)!)`, which makes `∫₀^∞ |R|² r dr = 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, Complex, Real};
use crate::special::{laguerre, ln_factorial};

/// OAM eigenstate label: azimuthal number `l` and radial number `p`.
///
/// Ordering is `l` ascending, then `p` ascending, which is the basis order
/// used by every matrix and file in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub l: i32,
    pub p: u32,
}

impl ModeIndex {
    pub const fn new(l: i32, p: u32) -> Self {
        Self { l, p }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}⟩", self.l, self.p)
    }
}

/// Beam waist and wavelength, with the derived wavenumber and Rayleigh range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry<S> {
    waist: S,
    wavelength: S,
    wavenumber: S,
    rayleigh_range: S,
}

impl<S: Real> BeamGeometry<S> {
    pub fn new(waist: S, wavelength: S) -> Result<Self> {
        if !(waist > S::zero()) || !(wavelength > S::zero()) {
            return Err(Error::Domain(format!(
                "beam waist and wavelength must be positive (w0={}, lambda={})",
                waist.as_f64(),
                wavelength.as_f64()
            )));
        }
        let wavenumber = S::two_pi() / wavelength;
        let rayleigh_range = S::lit(0.5) * wavenumber * waist * waist;
        Ok(Self {
            waist,
            wavelength,
            wavenumber,
            rayleigh_range,
        })
    }

    pub fn waist(&self) -> S {
        self.waist
    }

    pub fn wavelength(&self) -> S {
        self.wavelength
    }

    pub fn wavenumber(&self) -> S {
        self.wavenumber
    }

    pub fn rayleigh_range(&self) -> S {
        self.rayleigh_range
    }

    /// `w(z) = w0·√(1+(z/z_R)²)`.
    pub fn beam_width(&self, z: S) -> S {
        let t = z / self.rayleigh_range;
        self.waist * (S::one() + t * t).sqrt()
    }

    /// `R(z) = z·(1+(z_R/z)²)`. Singular (flat wavefront) at `z = 0`.
    pub fn radius_of_curvature(&self, z: S) -> Result<S> {
        if !(z > S::zero()) {
            return Err(Error::Domain(format!(
                "radius of curvature is singular at z={}",
                z.as_f64()
            )));
        }
        let t = self.rayleigh_range / z;
        Ok(z * (S::one() + t * t))
    }

    /// `atan(z/z_R)`.
    pub fn gouy_angle(&self, z: S) -> S {
        (z / self.rayleigh_range).atan()
    }

    /// Gouy phase `(2p+|l|+1)·atan(z/z_R)` picked up by `mode`.
    pub fn gouy_phase(&self, mode: ModeIndex, z: S) -> S {
        S::lit(mode_order(mode) as f64) * self.gouy_angle(z)
    }

    /// Curvature phase `-k r²/(2R(z))`, zero at `z = 0`.
    fn curvature_phase(&self, r: S, z: S) -> S {
        match self.radius_of_curvature(z) {
            Ok(radius) => -self.wavenumber * r * r / (S::lit(2.0) * radius),
            Err(_) => S::zero(),
        }
    }
}

/// `2p + |l| + 1`.
pub fn mode_order(mode: ModeIndex) -> u32 {
    2 * mode.p + mode.l.unsigned_abs() + 1
}

/// Normalization constant `A = 2·√(p!/(p+|l|)!)`, computed in log space.
pub fn normalization<S: Real>(mode: ModeIndex) -> S {
    let a = mode.l.unsigned_abs();
    let ln_ratio = ln_factorial::<S>(mode.p) - ln_factorial::<S>(mode.p + a);
    S::lit(2.0) * (S::lit(0.5) * ln_ratio).exp()
}

/// Real radial profile in beam-width units: `A·(√2 x)^|l|·L_p^|l|(2x²)·e^{-x²}`,
/// where `x = r/w(z)`. Then `|R_{l,p}(r,z)| = |profile(x)|/w(z)`.
pub fn radial_profile<S: Real>(mode: ModeIndex, x: S) -> S {
    let a = mode.l.unsigned_abs();
    let two = S::lit(2.0);
    let x2 = x * x;
    let lag = laguerre(mode.p, S::lit(a as f64), two * x2);
    let power = (two.sqrt() * x).powi(a as i32);
    normalization::<S>(mode) * power * lag * (-x2).exp()
}

/// Radial mode function `R_{l,p}(r,z)` including curvature and Gouy phases (units m⁻¹).
pub fn radial_mode<S: Real>(geom: &BeamGeometry<S>, mode: ModeIndex, r: S, z: S) -> Complex<S> {
    let w = geom.beam_width(z);
    let amplitude = radial_profile(mode, r / w) / w;
    let phase = geom.curvature_phase(r, z) + geom.gouy_phase(mode, z);
    cis(phase) * amplitude
}

/// Full transverse wave function `(2π)^{-1/2}·R_{l,p}(r,z)·e^{ilθ}`.
pub fn mode_field<S: Real>(geom: &BeamGeometry<S>, mode: ModeIndex, r: S, theta: S, z: S) -> Complex<S> {
    let azimuthal = cis(S::lit(mode.l as f64) * theta);
    radial_mode(geom, mode, r, z) * azimuthal / S::two_pi().sqrt()
}

/// Input/output truncation of the OAM Hilbert space.
///
/// The input basis is `{(l,p) : |l| ≤ max_in, 0 ≤ p ≤ max_in}` and the output
/// basis the same with `max_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncationSpec {
    max_in: u32,
    max_out: u32,
}

impl TruncationSpec {
    pub fn new(max_in: u32, max_out: u32) -> Result<Self> {
        if max_in < 1 {
            return Err(Error::Truncation(format!("max_in must be >= 1, got {max_in}")));
        }
        if max_out < max_in {
            return Err(Error::Truncation(format!(
                "max_out ({max_out}) must be >= max_in ({max_in})"
            )));
        }
        if max_out > i16::MAX as u32 / 2 {
            return Err(Error::Truncation(format!("max_out {max_out} too large")));
        }
        Ok(Self { max_in, max_out })
    }

    pub fn max_in(&self) -> u32 {
        self.max_in
    }

    pub fn max_out(&self) -> u32 {
        self.max_out
    }

    pub fn input_basis(&self) -> Vec<ModeIndex> {
        mode_basis(self.max_in)
    }

    pub fn output_basis(&self) -> Vec<ModeIndex> {
        mode_basis(self.max_out)
    }

    pub fn input_dim(&self) -> usize {
        basis_dim(self.max_in)
    }

    pub fn output_dim(&self) -> usize {
        basis_dim(self.max_out)
    }

    pub fn in_input(&self, m: ModeIndex) -> bool {
        m.l.unsigned_abs() <= self.max_in && m.p <= self.max_in
    }

    pub fn in_output(&self, m: ModeIndex) -> bool {
        m.l.unsigned_abs() <= self.max_out && m.p <= self.max_out
    }

    /// Position of `m` in the input basis.
    pub fn input_position(&self, m: ModeIndex) -> Option<usize> {
        basis_position(self.max_in, m)
    }

    /// Position of `m` in the output basis.
    pub fn output_position(&self, m: ModeIndex) -> Option<usize> {
        basis_position(self.max_out, m)
    }

    /// For each input basis element, its position in the output basis.
    pub fn embedding(&self) -> Vec<usize> {
        self.input_basis()
            .into_iter()
            .map(|m| {
                self.output_position(m)
                    .expect("input basis is inside output basis")
            })
            .collect()
    }
}

/// `{(l,p) : |l| ≤ max, 0 ≤ p ≤ max}`, `l` ascending then `p` ascending.
pub fn mode_basis(max: u32) -> Vec<ModeIndex> {
    let m = max as i32;
    (-m..=m)
        .flat_map(|l| (0..=max).map(move |p| ModeIndex::new(l, p)))
        .collect()
}

/// `(2·max+1)(max+1)`.
pub fn basis_dim(max: u32) -> usize {
    (2 * max as usize + 1) * (max as usize + 1)
}

fn basis_position(max: u32, m: ModeIndex) -> Option<usize> {
    if m.l.unsigned_abs() > max || m.p > max {
        return None;
    }
    let row = (m.l + max as i32) as usize;
    Some(row * (max as usize + 1) + m.p as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn geom() -> BeamGeometry<f64> {
        BeamGeometry::new(0.01, 1e-6).unwrap()
    }

    #[test]
    fn geometry_derived_quantities() {
        let g = geom();
        assert_eq!(g.wavenumber(), 2.0 * PI / 1e-6);
        assert!((g.rayleigh_range() - 314.159_265_358_979_3).abs() < 1e-9);
        assert!(BeamGeometry::new(0.0, 1e-6).is_err());
        assert!(BeamGeometry::new(0.01, -1.0).is_err());
    }

    #[test]
    fn beam_width_examples() {
        let g = geom();
        assert_eq!(g.beam_width(0.0), 0.01);
        assert!((g.beam_width(g.rayleigh_range()) - 0.01 * SQRT_2).abs() < 1e-15);
        assert!((g.beam_width(500.0) - 0.018_796_354_942).abs() < 1e-11);
    }

    #[test]
    fn radius_of_curvature_examples() {
        let g = geom();
        let zr = g.rayleigh_range();
        assert!((g.radius_of_curvature(zr).unwrap() - 2.0 * zr).abs() < 1e-9);
        assert!(g.radius_of_curvature(0.0).is_err());
        assert!((g.radius_of_curvature(500.0).unwrap() - 697.39).abs() < 5e-3);
    }

    #[test]
    fn fundamental_mode_on_axis() {
        let g = geom();
        let v = radial_mode(&g, ModeIndex::new(0, 0), 0.0, 0.0);
        assert!((v.re - 200.0).abs() < 1e-12);
        assert_eq!(v.im, 0.0);
        let v = radial_mode(&g, ModeIndex::new(1, 0), 0.0, 123.0);
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn magnitude_at_beam_width() {
        let g = geom();
        for z in [0.0, 10.0, 500.0] {
            let w = g.beam_width(z);
            let v = radial_mode(&g, ModeIndex::new(0, 0), w, z);
            let expected = 2.0 / w * (-1.0_f64).exp();
            assert!((v.norm() - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn phases_have_unit_modulus() {
        let g = geom();
        for mode in mode_basis(3) {
            for &(r, z) in &[(0.003, 0.0), (0.01, 250.0), (0.02, 1000.0)] {
                let w = g.beam_width(z);
                let full = radial_mode(&g, mode, r, z).norm();
                let bare = (radial_profile(mode, r / w) / w).abs();
                assert!((full - bare).abs() <= 1e-12 * bare.max(1e-300));
            }
        }
    }

    #[test]
    fn azimuthal_factor() {
        let g = geom();
        let m = ModeIndex::new(2, 1);
        let a = mode_field(&g, m, 0.01, 0.0, 100.0);
        let b = mode_field(&g, m, 0.01, PI / 2.0, 100.0);
        let ratio = b / a;
        assert!((ratio.re + 1.0).abs() < 1e-12 && ratio.im.abs() < 1e-12);
        let m0 = ModeIndex::new(0, 2);
        let a = mode_field(&g, m0, 0.01, 0.3, 100.0);
        let b = mode_field(&g, m0, 0.01, 2.1, 100.0);
        assert!((a - b).norm() < 1e-14 * a.norm());
    }

    #[test]
    fn truncation_dimensions() {
        let t = TruncationSpec::new(1, 2).unwrap();
        assert_eq!((t.input_dim(), t.output_dim()), (6, 15));
        let t = TruncationSpec::new(3, 6).unwrap();
        assert_eq!((t.input_dim(), t.output_dim()), (28, 91));
        assert!(TruncationSpec::new(2, 1).is_err());
        assert!(TruncationSpec::new(0, 1).is_err());
    }

    #[test]
    fn basis_positions_match_ordering() {
        let t = TruncationSpec::new(2, 4).unwrap();
        for (i, m) in t.output_basis().into_iter().enumerate() {
            assert_eq!(t.output_position(m), Some(i));
        }
        let emb = t.embedding();
        let out = t.output_basis();
        for (i, m) in t.input_basis().into_iter().enumerate() {
            assert_eq!(out[emb[i]], m);
        }
        assert_eq!(t.input_position(ModeIndex::new(3, 0)), None);
    }

    #[test]
    fn single_precision_evaluates() {
        let g = BeamGeometry::<f32>::new(0.01, 1e-6).unwrap();
        let v = radial_mode(&g, ModeIndex::new(0, 0), 0.0, 0.0);
        assert!((v.re - 200.0).abs() < 1e-3);
    }
}
