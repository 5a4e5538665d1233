//! Sparse superoperator of the ensemble-averaged turbulence channel.
//!
//! The matrix `T` maps density-matrix elements `ρ_{(l,p),(l',p')}` on the
//! input space to elements `ρ̃_{(l̃,p̃),(l̃',p̃')}` on the output space. Phase
//! turbulence conserves the OAM difference, so an element can only be nonzero
//! when `l̃' = l' + l̃ - l`; only those tuples are stored.

mod cache;
mod element;
mod separable;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cache::{
    load_superop, param_hash, read_sidecar, save_superop, sidecar_path, CacheSidecar, FORMAT_VERSION,
};
pub use element::superop_element;
pub use separable::{KernelLadder, LevelKernel};

use crate::beam::{BeamGeometry, ModeIndex, TruncationSpec};
use crate::error::{Error, Result};
use crate::quadrature::Tolerance;
use crate::scalar::{c_zero, cabs, Complex, Real};
use crate::turbulence::TurbulenceParams;

/// Index tuple `(l̃,p̃,l̃',p̃'; l,p,l',p')` of a superoperator element.
///
/// Field order gives the lexicographic ordering used for cache records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SuperopIndex {
    /// Output ket `(l̃,p̃)`.
    pub out_ket: ModeIndex,
    /// Output bra `(l̃',p̃')`.
    pub out_bra: ModeIndex,
    /// Input ket `(l,p)`.
    pub in_ket: ModeIndex,
    /// Input bra `(l',p')`.
    pub in_bra: ModeIndex,
}

impl SuperopIndex {
    pub fn new(out_ket: ModeIndex, out_bra: ModeIndex, in_ket: ModeIndex, in_bra: ModeIndex) -> Self {
        Self {
            out_ket,
            out_bra,
            in_ket,
            in_bra,
        }
    }

    /// `l̃' = l' + l̃ - l`.
    pub fn satisfies_selection_rule(&self) -> bool {
        self.out_bra.l == self.in_bra.l + self.out_ket.l - self.in_ket.l
    }

    /// OAM shift `l̃ - l` carried by the ket side.
    pub fn shift(&self) -> i32 {
        self.out_ket.l - self.in_ket.l
    }

    /// Index of the Hermitian partner: kets and bras swapped on both sides.
    pub fn conjugate(&self) -> Self {
        Self::new(self.out_bra, self.out_ket, self.in_bra, self.in_ket)
    }

    pub fn within(&self, trunc: &TruncationSpec) -> bool {
        trunc.in_output(self.out_ket)
            && trunc.in_output(self.out_bra)
            && trunc.in_input(self.in_ket)
            && trunc.in_input(self.in_bra)
    }

    pub fn as_array(&self) -> [i32; 8] {
        [
            self.out_ket.l,
            self.out_ket.p as i32,
            self.out_bra.l,
            self.out_bra.p as i32,
            self.in_ket.l,
            self.in_ket.p as i32,
            self.in_bra.l,
            self.in_bra.p as i32,
        ]
    }
}

impl fmt::Display for SuperopIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.as_array();
        write!(
            f,
            "({},{},{},{};{},{},{},{})",
            a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]
        )
    }
}

/// Every selection-rule-allowed index tuple within `trunc`, in lexicographic order.
pub fn allowed_indices(trunc: &TruncationSpec) -> Vec<SuperopIndex> {
    let out = trunc.output_basis();
    let inp = trunc.input_basis();
    let mut v = Vec::new();
    for &ok in &out {
        for &ob in &out {
            for &ik in &inp {
                for &ib in &inp {
                    let idx = SuperopIndex::new(ok, ob, ik, ib);
                    if idx.satisfies_selection_rule() {
                        v.push(idx);
                    }
                }
            }
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssemblyMethod {
    /// Tensor Gauss-Legendre grid in `(r, r')` with a shared angular kernel.
    #[default]
    Separable,
    /// One adaptive 3-D cubature per element.
    Adaptive,
}

impl fmt::Display for AssemblyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssemblyMethod::Separable => "separable",
            AssemblyMethod::Adaptive => "adaptive",
        })
    }
}

/// Controls for element integration and assembly.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions<S> {
    pub tolerance: Tolerance<S>,
    pub method: AssemblyMethod,
    /// Radial integration limit in units of the beam width `w(z)`.
    pub radial_cutoff: S,
    /// Number of grid halvings the separable route may perform.
    pub max_refinements: usize,
    /// Worker threads; `None` uses the current rayon pool.
    pub workers: Option<usize>,
}

impl<S: Real> AssemblyOptions<S> {
    pub fn new(tolerance: Tolerance<S>) -> Self {
        Self {
            tolerance,
            method: AssemblyMethod::Separable,
            radial_cutoff: S::lit(7.0),
            max_refinements: 3,
            workers: None,
        }
    }
}

impl Default for AssemblyOptions<f64> {
    fn default() -> Self {
        Self::new(Tolerance::default())
    }
}

/// Physical parameters and accuracy bookkeeping attached to a superoperator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperopMetadata {
    pub w0: f64,
    pub lambda: f64,
    pub cn2: f64,
    pub z: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub method: AssemblyMethod,
    /// Largest per-element quadrature error estimate.
    pub max_error_estimate: f64,
}

/// Sparse rectangular superoperator `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperopMatrix<S> {
    trunc: TruncationSpec,
    entries: BTreeMap<SuperopIndex, Complex<S>>,
    pub metadata: SuperopMetadata,
}

impl<S: Real> SuperopMatrix<S> {
    pub fn new(trunc: TruncationSpec, metadata: SuperopMetadata) -> Self {
        Self {
            trunc,
            entries: BTreeMap::new(),
            metadata,
        }
    }

    pub fn truncation(&self) -> TruncationSpec {
        self.trunc
    }

    /// Number of rows, `d_out²`.
    pub fn rows(&self) -> usize {
        self.trunc.output_dim().pow(2)
    }

    /// Number of columns, `d_in²`.
    pub fn cols(&self) -> usize {
        self.trunc.input_dim().pow(2)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, index: SuperopIndex, value: Complex<S>) -> Result<()> {
        if !index.within(&self.trunc) {
            return Err(Error::Shape(format!("index {index} outside truncation")));
        }
        if !index.satisfies_selection_rule() {
            return Err(Error::Shape(format!("index {index} violates the selection rule")));
        }
        self.entries.insert(index, value);
        Ok(())
    }

    /// Stored value, or zero.
    pub fn get(&self, index: &SuperopIndex) -> Complex<S> {
        self.entries.get(index).copied().unwrap_or_else(c_zero)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&SuperopIndex, &Complex<S>)> {
        self.entries.iter()
    }

    /// The superoperator of the identity channel embedded into the output space.
    pub fn embedding_identity(trunc: TruncationSpec, metadata: SuperopMetadata) -> Self {
        let mut t = Self::new(trunc, metadata);
        let basis = trunc.input_basis();
        for &a in &basis {
            for &b in &basis {
                t.entries
                    .insert(SuperopIndex::new(a, b, a, b), Complex::new(S::one(), S::zero()));
            }
        }
        t
    }

    /// Direct contraction `ρ̃_{ab} = Σ T_{(ab),(cd)} ρ_{cd}` for a `d_in × d_in` input.
    pub fn apply(&self, rho: &DMatrix<Complex<S>>) -> Result<DMatrix<Complex<S>>> {
        let d_in = self.trunc.input_dim();
        let d_out = self.trunc.output_dim();
        if rho.shape() != (d_in, d_in) {
            return Err(Error::Shape(format!(
                "density matrix is {:?}, expected {d_in}x{d_in}",
                rho.shape()
            )));
        }
        let mut out = DMatrix::from_element(d_out, d_out, c_zero());
        for (idx, v) in &self.entries {
            let (Some(r), Some(c), Some(i), Some(j)) = (
                self.trunc.output_position(idx.out_ket),
                self.trunc.output_position(idx.out_bra),
                self.trunc.input_position(idx.in_ket),
                self.trunc.input_position(idx.in_bra),
            ) else {
                continue;
            };
            out[(r, c)] += *v * rho[(i, j)];
        }
        Ok(out)
    }

    /// `max |T(a) - conj(T(conj a))|` over stored entries.
    pub fn hermiticity_defect(&self) -> S {
        self.entries
            .iter()
            .map(|(idx, v)| cabs(*v - self.get(&idx.conjugate()).conj()))
            .fold(S::zero(), |a, b| a.max(b))
    }

    /// `1 - Σ_{m} T_{(m,m),(in,in)}`: population of `|in⟩` lost out of the output space.
    pub fn leakage_deficiency(&self, input: ModeIndex) -> S {
        let kept = self
            .trunc
            .output_basis()
            .into_iter()
            .map(|m| self.get(&SuperopIndex::new(m, m, input, input)).re)
            .fold(S::zero(), |a, b| a + b);
        S::one() - kept
    }

    /// `max |T - other|` over the union of stored tuples.
    pub fn max_abs_difference(&self, other: &SuperopMatrix<S>) -> S {
        let a = self.entries.keys().map(|k| cabs(self.get(k) - other.get(k)));
        let b = other.entries.keys().map(|k| cabs(self.get(k) - other.get(k)));
        a.chain(b).fold(S::zero(), |x, y| x.max(y))
    }

    pub(crate) fn insert_unchecked(&mut self, index: SuperopIndex, value: Complex<S>) {
        self.entries.insert(index, value);
    }
}

/// Metadata for freshly assembled channels.
pub fn metadata_for<S: Real>(
    geom: &BeamGeometry<S>,
    turb: &TurbulenceParams<S>,
    z: S,
    opts: &AssemblyOptions<S>,
) -> SuperopMetadata {
    SuperopMetadata {
        w0: geom.waist().as_f64(),
        lambda: geom.wavelength().as_f64(),
        cn2: turb.cn2.as_f64(),
        z: z.as_f64(),
        rel_tol: opts.tolerance.rel_tol.as_f64(),
        abs_tol: opts.tolerance.abs_tol.as_f64(),
        method: opts.method,
        max_error_estimate: 0.0,
    }
}

/// Assembles every selection-rule-allowed element of `T` for one propagation distance.
pub fn assemble_superop<S: Real>(
    trunc: TruncationSpec,
    geom: &BeamGeometry<S>,
    turb: &TurbulenceParams<S>,
    z: S,
    opts: &AssemblyOptions<S>,
) -> Result<SuperopMatrix<S>> {
    with_workers(opts.workers, || match opts.method {
        AssemblyMethod::Separable => {
            let sf = turb.structure_function(geom.wavelength(), z)?;
            let ladder = KernelLadder::new(
                sf,
                geom.beam_width(z),
                opts.radial_cutoff,
                trunc.max_in() + trunc.max_out(),
                opts.max_refinements,
            );
            separable::assemble_with_kernel(trunc, geom, turb, z, opts, &ladder)
        }
        AssemblyMethod::Adaptive => assemble_adaptive(trunc, geom, turb, z, opts),
    })
}

/// Separable assembly against a caller-owned kernel ladder, so several
/// truncations at the same `z` share the angular kernels.
pub fn assemble_with_kernel<S: Real>(
    trunc: TruncationSpec,
    geom: &BeamGeometry<S>,
    turb: &TurbulenceParams<S>,
    z: S,
    opts: &AssemblyOptions<S>,
    ladder: &KernelLadder<S>,
) -> Result<SuperopMatrix<S>> {
    with_workers(opts.workers, || {
        separable::assemble_with_kernel(trunc, geom, turb, z, opts, ladder)
    })
}

fn assemble_adaptive<S: Real>(
    trunc: TruncationSpec,
    geom: &BeamGeometry<S>,
    turb: &TurbulenceParams<S>,
    z: S,
    opts: &AssemblyOptions<S>,
) -> Result<SuperopMatrix<S>> {
    let representatives: Vec<SuperopIndex> = allowed_indices(&trunc)
        .into_iter()
        .filter(|idx| *idx <= idx.conjugate())
        .collect();
    let values: Vec<Result<(SuperopIndex, element::ElementValue<S>)>> = representatives
        .par_iter()
        .map(|idx| superop_element(*idx, geom, turb, z, opts).map(|v| (*idx, v)))
        .collect();
    let mut t = SuperopMatrix::new(trunc, metadata_for(geom, turb, z, opts));
    let mut max_err = S::zero();
    for item in values {
        let (idx, v) = item?;
        max_err = max_err.max(v.error_estimate);
        t.insert_unchecked(idx, v.value);
        t.insert_unchecked(idx.conjugate(), v.value.conj());
    }
    t.metadata.max_error_estimate = max_err.as_f64();
    Ok(t)
}

pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

pub use element::ElementValue;

#[cfg(test)]
mod tests {
    use super::*;

    fn m(l: i32, p: u32) -> ModeIndex {
        ModeIndex::new(l, p)
    }

    fn meta() -> SuperopMetadata {
        SuperopMetadata {
            w0: 0.01,
            lambda: 1e-6,
            cn2: 0.0,
            z: 0.0,
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            method: AssemblyMethod::Separable,
            max_error_estimate: 0.0,
        }
    }

    #[test]
    fn selection_rule() {
        let bad = SuperopIndex::new(m(2, 0), m(0, 0), m(0, 0), m(1, 0));
        assert!(!bad.satisfies_selection_rule());
        let good = SuperopIndex::new(m(2, 0), m(3, 0), m(0, 0), m(1, 0));
        assert!(good.satisfies_selection_rule());
        assert_eq!(good.conjugate().conjugate(), good);
        assert!(good.conjugate().satisfies_selection_rule());
    }

    #[test]
    fn insert_rejects_bad_tuples() {
        let t = TruncationSpec::new(1, 1).unwrap();
        let mut s = SuperopMatrix::<f64>::new(t, meta());
        let bad = SuperopIndex::new(m(1, 0), m(0, 0), m(0, 0), m(1, 0));
        assert!(s.insert(bad, Complex::new(1.0, 0.0)).is_err());
        let outside = SuperopIndex::new(m(2, 0), m(2, 0), m(0, 0), m(0, 0));
        assert!(s.insert(outside, Complex::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn allowed_count_matches_enumeration() {
        let t = TruncationSpec::new(1, 2).unwrap();
        let allowed = allowed_indices(&t);
        let (out, inp) = (t.output_basis(), t.input_basis());
        let mut brute = 0;
        for a in &out {
            for b in &out {
                for c in &inp {
                    for d in &inp {
                        if b.l - d.l == a.l - c.l {
                            brute += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(allowed.len(), brute);
        assert!(allowed.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn identity_apply_embeds() {
        let t = TruncationSpec::new(1, 2).unwrap();
        let id = SuperopMatrix::<f64>::embedding_identity(t, meta());
        assert_eq!((id.rows(), id.cols()), (225, 36));
        let d = t.input_dim();
        let rho = DMatrix::from_fn(d, d, |i, j| Complex::new((i + 2 * j) as f64, i as f64 - j as f64));
        let out = id.apply(&rho).unwrap();
        let emb = t.embedding();
        for i in 0..d {
            for j in 0..d {
                assert_eq!(out[(emb[i], emb[j])], rho[(i, j)]);
            }
        }
        assert_eq!(id.hermiticity_defect(), 0.0);
        assert_eq!(id.leakage_deficiency(m(0, 0)), 0.0);
    }
}
