//! Transverse intensity grids of pure and mixed OAM states.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::beam::{mode_field, BeamGeometry, ModeIndex};
use crate::error::{Error, Result};
use crate::kraus::CMatrix;
use crate::scalar::{c_zero, Complex, Real};
use crate::util::{format_sig, write_atomic};

/// Which truncated space a state lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTag {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind<S> {
    Pure(DVector<Complex<S>>),
    Mixed(CMatrix<S>),
}

/// A state expanded over an explicit mode basis at propagation distance `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateOnModes<S> {
    pub kind: StateKind<S>,
    pub basis: Vec<ModeIndex>,
    pub tag: BasisTag,
    pub z: S,
}

impl<S: Real> StateOnModes<S> {
    pub fn pure(coeffs: DVector<Complex<S>>, basis: Vec<ModeIndex>, tag: BasisTag, z: S) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for {} basis modes",
                coeffs.len(),
                basis.len()
            )));
        }
        let norm = coeffs.iter().fold(S::zero(), |s, c| s + c.norm_sqr()).sqrt();
        if (norm - S::one()).abs() > S::lit(1e-9) {
            return Err(Error::Domain(format!(
                "pure state norm {} is not 1",
                norm.as_f64()
            )));
        }
        Ok(Self {
            kind: StateKind::Pure(coeffs),
            basis,
            tag,
            z,
        })
    }

    /// Accepts density matrices with trace at most 1 (leakage allowed).
    pub fn mixed(rho: CMatrix<S>, basis: Vec<ModeIndex>, tag: BasisTag, z: S) -> Result<Self> {
        if rho.shape() != (basis.len(), basis.len()) {
            return Err(Error::Shape(format!(
                "density matrix is {:?} for {} basis modes",
                rho.shape(),
                basis.len()
            )));
        }
        let trace = (0..basis.len()).fold(S::zero(), |s, i| s + rho[(i, i)].re);
        if trace > S::one() + S::lit(1e-9) {
            return Err(Error::Domain(format!("trace {} exceeds 1", trace.as_f64())));
        }
        Ok(Self {
            kind: StateKind::Mixed(rho),
            basis,
            tag,
            z,
        })
    }
}

/// Square grid of `points × points` samples spanning `±half_width·w(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<S> {
    pub points: usize,
    /// Half extent in units of the beam width at the state's `z`.
    pub half_width: S,
}

impl Default for GridSpec<f64> {
    fn default() -> Self {
        Self {
            points: 256,
            half_width: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid<S> {
    pub xs: Vec<S>,
    pub ys: Vec<S>,
    /// `intensity[(iy, ix)]`.
    pub intensity: DMatrix<S>,
    /// Complex amplitude, pure states only.
    pub amplitude: Option<DMatrix<Complex<S>>>,
}

impl<S: Real> FieldGrid<S> {
    /// Riemann sum of the intensity over the sampled square.
    pub fn integrated_intensity(&self) -> S {
        let step = |v: &[S]| if v.len() > 1 { v[1] - v[0] } else { S::zero() };
        self.intensity.sum() * step(&self.xs) * step(&self.ys)
    }

    /// CSV with `x,y,intensity` (plus `re,im` for pure states), `y` outer and
    /// `x` inner, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(if self.amplitude.is_some() {
            "x,y,intensity,re,im\n"
        } else {
            "x,y,intensity\n"
        });
        let f = |v: S| format_sig(v.as_f64(), 9);
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                let _ = write!(s, "{},{},{}", f(*x), f(*y), f(self.intensity[(iy, ix)]));
                if let Some(a) = &self.amplitude {
                    let z = a[(iy, ix)];
                    let _ = write!(s, ",{},{}", f(z.re), f(z.im));
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

pub fn state_intensity_grid<S: Real>(
    state: &StateOnModes<S>,
    geom: &BeamGeometry<S>,
    spec: &GridSpec<S>,
) -> Result<FieldGrid<S>> {
    if spec.points < 2 || !(spec.half_width > S::zero()) {
        return Err(Error::Domain(
            "grid needs at least 2 points and a positive extent".into(),
        ));
    }
    let n = spec.points;
    let h = spec.half_width * geom.beam_width(state.z);
    let axis: Vec<S> = (0..n)
        .map(|i| -h + S::lit(2.0) * h * S::from_usize_lossy(i) / S::from_usize_lossy(n - 1))
        .collect();
    let rows: Vec<(Vec<S>, Vec<Complex<S>>)> = axis
        .par_iter()
        .map(|&y| {
            let mut intensity = Vec::with_capacity(n);
            let mut amplitude = Vec::new();
            let mut fields = vec![c_zero::<S>(); state.basis.len()];
            for &x in &axis {
                let r = x.hypot(y);
                let theta = y.atan2(x);
                for (f, m) in fields.iter_mut().zip(&state.basis) {
                    *f = mode_field(geom, *m, r, theta, state.z);
                }
                match &state.kind {
                    StateKind::Pure(c) => {
                        let a = c.iter().zip(&fields).fold(c_zero(), |s, (c, f)| s + *c * *f);
                        intensity.push(a.norm_sqr());
                        amplitude.push(a);
                    }
                    StateKind::Mixed(rho) => {
                        let mut v = S::zero();
                        for (i, fi) in fields.iter().enumerate() {
                            for (j, fj) in fields.iter().enumerate() {
                                v += (rho[(i, j)] * *fi * fj.conj()).re;
                            }
                        }
                        intensity.push(v);
                    }
                }
            }
            (intensity, amplitude)
        })
        .collect();
    let intensity = DMatrix::from_fn(n, n, |iy, ix| rows[iy].0[ix]);
    let amplitude = match state.kind {
        StateKind::Pure(_) => Some(DMatrix::from_fn(n, n, |iy, ix| rows[iy].1[ix])),
        StateKind::Mixed(_) => None,
    };
    Ok(FieldGrid {
        xs: axis.clone(),
        ys: axis,
        intensity,
        amplitude,
    })
}
