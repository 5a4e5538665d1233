//! Two-dimensional OAM code, transpose-channel recovery and channel fidelity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::beam::{ModeIndex, TruncationSpec};
use crate::error::{Error, Result};
use crate::kraus::{CMatrix, KrausSet, PSD_TOLERANCE};
use crate::scalar::{c_real, c_zero, Complex, Real};

/// Default support cut for `ℰ(P)^{-1/2}`, relative to its largest eigenvalue.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Logical basis and code projector on the input space.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec<S> {
    pub logical_zero: DVector<Complex<S>>,
    pub logical_one: DVector<Complex<S>>,
    pub projector: CMatrix<S>,
}

impl<S: Real> CodeSpec<S> {
    /// Validates orthonormality and forms `P = |0_L⟩⟨0_L| + |1_L⟩⟨1_L|`.
    pub fn from_vectors(zero: DVector<Complex<S>>, one: DVector<Complex<S>>) -> Result<Self> {
        if zero.len() != one.len() {
            return Err(Error::Shape("logical vectors differ in length".into()));
        }
        let tol = S::lit(1e-9);
        let norm = |v: &DVector<Complex<S>>| v.iter().fold(S::zero(), |s, z| s + z.norm_sqr()).sqrt();
        if (norm(&zero) - S::one()).abs() > tol || (norm(&one) - S::one()).abs() > tol {
            return Err(Error::Domain("logical vectors must be unit norm".into()));
        }
        let overlap = zero.dotc(&one);
        if overlap.re.hypot(overlap.im) > tol {
            return Err(Error::Domain("logical vectors must be orthogonal".into()));
        }
        let projector = &zero * zero.adjoint() + &one * one.adjoint();
        Ok(Self {
            logical_zero: zero,
            logical_one: one,
            projector,
        })
    }

    pub fn dim(&self) -> usize {
        self.logical_zero.len()
    }

    /// `[|0_L⟩ |1_L⟩]` as a `d_in × 2` isometry.
    pub fn basis(&self) -> CMatrix<S> {
        CMatrix::from_columns(&[self.logical_zero.clone(), self.logical_one.clone()])
    }
}

/// `|0_L⟩ = (|-m,0⟩ + |-m,1⟩)/√2`, `|1_L⟩ = (|m,m-1⟩ + |m,m⟩)/√2` with `m = max_in`.
pub fn build_code<S: Real>(trunc: &TruncationSpec) -> Result<CodeSpec<S>> {
    let m = trunc.max_in();
    if m == 0 {
        return Err(Error::Unsupported("the code needs max_in >= 1".into()));
    }
    let d = trunc.input_dim();
    let amp = c_real(S::lit(std::f64::consts::FRAC_1_SQRT_2));
    let vector = |modes: [ModeIndex; 2]| -> Result<DVector<Complex<S>>> {
        let mut v = DVector::from_element(d, c_zero());
        for mode in modes {
            let pos = trunc
                .input_position(mode)
                .ok_or_else(|| Error::Truncation(format!("{mode} outside the input space")))?;
            v[pos] = amp;
        }
        Ok(v)
    };
    let mi = m as i32;
    CodeSpec::from_vectors(
        vector([ModeIndex::new(-mi, 0), ModeIndex::new(-mi, 1)])?,
        vector([ModeIndex::new(mi, m - 1), ModeIndex::new(mi, m)])?,
    )
}

/// `ℰ(P) = Σ_k A_k P A_k†`.
pub fn error_on_projector<S: Real>(k: &KrausSet<S>, p: &CMatrix<S>) -> Result<CMatrix<S>> {
    if p.shape() != (k.input_dim(), k.input_dim()) {
        return Err(Error::Shape(format!(
            "projector is {:?}, channel input dimension {}",
            p.shape(),
            k.input_dim()
        )));
    }
    k.apply(p)
}

/// Pseudo-inverse square root on the support of a PSD matrix.
///
/// Returns `(M^{-1/2}, Π)` where `Π` projects onto eigenvectors with
/// `σ > rank_tol·σ_max`.
pub fn inverse_sqrt_psd<S: Real>(m: &CMatrix<S>, rank_tol: S) -> Result<(CMatrix<S>, CMatrix<S>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape(format!(
            "matrix is {:?}, expected square",
            m.shape()
        )));
    }
    let h = (m + m.adjoint()) * c_real(S::lit(0.5));
    let eig = SymmetricEigen::new(h);
    let sigma_max = eig.eigenvalues.iter().copied().fold(S::zero(), |a, b| a.max(b));
    let sigma_min = eig.eigenvalues.iter().copied().fold(S::zero(), |a, b| a.min(b));
    if sigma_min < -S::lit(PSD_TOLERANCE) * sigma_max.max(S::epsilon()) {
        return Err(Error::Positivity {
            eigenvalue: sigma_min.as_f64(),
            threshold: (S::lit(PSD_TOLERANCE) * sigma_max).as_f64(),
        });
    }
    let threshold = rank_tol * sigma_max;
    let mut inv = CMatrix::from_element(n, n, c_zero());
    let mut support = CMatrix::from_element(n, n, c_zero());
    for (i, sigma) in eig.eigenvalues.iter().enumerate() {
        if *sigma > threshold && *sigma > S::zero() {
            let u = eig.eigenvectors.column(i);
            let dyad = u * u.adjoint();
            inv += &dyad * c_real(S::one() / sigma.sqrt());
            support += dyad;
        }
    }
    Ok((inv, support))
}

/// Recovery channel `R_k = P A_k† ℰ(P)^{-1/2}`, each `d_in × d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryMap<S> {
    pub operators: Vec<CMatrix<S>>,
    pub support_projector: CMatrix<S>,
}

impl<S: Real> RecoveryMap<S> {
    /// `Σ_k R_k σ R_k†` for an output-space state `σ`.
    pub fn apply(&self, sigma: &CMatrix<S>) -> Result<CMatrix<S>> {
        let Some(first) = self.operators.first() else {
            return Err(Error::Shape("empty recovery map".into()));
        };
        if sigma.shape() != (first.ncols(), first.ncols()) {
            return Err(Error::Shape(format!(
                "state is {:?}, recovery expects {}x{}",
                sigma.shape(),
                first.ncols(),
                first.ncols()
            )));
        }
        let d = first.nrows();
        let mut out = CMatrix::from_element(d, d, c_zero());
        for r in &self.operators {
            out += r * sigma * r.adjoint();
        }
        Ok(out)
    }

    /// `Σ_k R_k†R_k`.
    pub fn completeness(&self) -> CMatrix<S> {
        let d = self.operators.first().map_or(0, |r| r.ncols());
        let mut s = CMatrix::from_element(d, d, c_zero());
        for r in &self.operators {
            s += r.adjoint() * r;
        }
        s
    }
}

pub fn transpose_recovery<S: Real>(
    k: &KrausSet<S>,
    code: &CodeSpec<S>,
    rank_tol: S,
) -> Result<RecoveryMap<S>> {
    let ep = error_on_projector(k, &code.projector)?;
    let (inv, support) = inverse_sqrt_psd(&ep, rank_tol)?;
    let operators = k
        .operators
        .iter()
        .map(|a| &code.projector * a.adjoint() * &inv)
        .collect();
    Ok(RecoveryMap {
        operators,
        support_projector: support,
    })
}

/// Entanglement fidelity of recovery∘channel on the maximally mixed code state:
/// `(1/d²)·Σ_{k,l} |tr(P A_k† ℰ(P)^{-1/2} A_l)|²` with `d = 2`.
pub fn channel_fidelity<S: Real>(k: &KrausSet<S>, code: &CodeSpec<S>, rank_tol: S) -> Result<S> {
    let ep = error_on_projector(k, &code.projector)?;
    let (inv, _) = inverse_sqrt_psd(&ep, rank_tol)?;
    let v = code.basis();
    let d_out = k.output_dim();
    let n = k.len();
    // With P = V V†, tr(P A_k† X A_l) = Σ_j ⟨A_k v_j, X A_l v_j⟩: stack the
    // columns A_k v_j and X A_l v_j and take one matrix product.
    let mut left = CMatrix::from_element(2 * d_out, n, c_zero());
    let mut right = CMatrix::from_element(2 * d_out, n, c_zero());
    for (col, a) in k.operators.iter().enumerate() {
        let av = a * &v;
        let xav = &inv * &av;
        for j in 0..2 {
            for r in 0..d_out {
                left[(j * d_out + r, col)] = av[(r, j)];
                right[(j * d_out + r, col)] = xav[(r, j)];
            }
        }
    }
    let m = left.adjoint() * right;
    let total = m.iter().fold(S::zero(), |s, z| s + z.norm_sqr());
    Ok(total / S::lit(4.0))
}

/// `Σ_m R_m (Σ_k A_k ρ A_k†) R_m†`.
pub fn apply_channel_and_recover<S: Real>(
    k: &KrausSet<S>,
    recovery: &RecoveryMap<S>,
    rho: &CMatrix<S>,
) -> Result<CMatrix<S>> {
    recovery.apply(&k.apply(rho)?)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue<S: Real>(m: &DMatrix<Complex<S>>) -> S {
    let h = (m + m.adjoint()) * c_real(S::lit(0.5));
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(S::min_value().unwrap_or(-S::one() / S::epsilon()), |a, b| {
            a.max(b)
        })
}
