//! Rearrangement of the superoperator into a Hermitian Choi-like matrix and
//! extraction of Kraus operators from its eigendecomposition.
//!
//! The rearranged matrix `R_{(l̃,p̃,l,p),(l̃',p̃',l',p')} = T_{(l̃,p̃,l̃',p̃'),(l,p,l',p')}`
//! is block diagonal in the OAM shift `l̃ - l`, because turbulence only couples
//! tuples with `l̃ - l = l̃' - l'`. Blocks are diagonalized separately, so every
//! Kraus operator moves OAM by a single definite shift.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::beam::{ModeIndex, TruncationSpec};
use crate::error::{Error, Result};
use crate::scalar::{c_real, c_zero, cabs, Complex, Real};
use crate::superop::{SuperopIndex, SuperopMatrix, SuperopMetadata};
use crate::util::{sha256_hex, write_atomic};

/// Relative size of negative eigenvalues that are treated as rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-8;
/// Default relative cutoff below which Kraus operators are dropped.
pub const DEFAULT_CUTOFF_RATIO: f64 = 1e-12;
/// Relative eigenvalue gap below which two operators form a degenerate pair.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;

pub type CMatrix<S> = DMatrix<Complex<S>>;

/// One diagonal block of the Choi-like matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiBlock<S> {
    /// OAM shift `l̃ - l` shared by every row, or `None` for unstructured matrices.
    pub shift: Option<i32>,
    /// Row positions `out·d_in + in` in the dense matrix.
    pub positions: Vec<usize>,
    pub matrix: CMatrix<S>,
}

/// Square Hermitian matrix of side `d_out·d_in`, stored as diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiLikeMatrix<S> {
    output_dim: usize,
    input_dim: usize,
    trunc: Option<TruncationSpec>,
    pub blocks: Vec<ChoiBlock<S>>,
    pub metadata: Option<SuperopMetadata>,
}

impl<S: Real> ChoiLikeMatrix<S> {
    /// Wraps a dense `d_out·d_in` square matrix as a single block.
    pub fn from_dense(r: CMatrix<S>, output_dim: usize, input_dim: usize) -> Result<Self> {
        let n = output_dim * input_dim;
        if r.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "Choi-like matrix is {:?}, expected {n}x{n}",
                r.shape()
            )));
        }
        Ok(Self {
            output_dim,
            input_dim,
            trunc: None,
            blocks: vec![ChoiBlock {
                shift: None,
                positions: (0..n).collect(),
                matrix: r,
            }],
            metadata: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.output_dim * self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn truncation(&self) -> Option<TruncationSpec> {
        self.trunc
    }

    pub fn to_dense(&self) -> CMatrix<S> {
        let n = self.dim();
        let mut r = CMatrix::from_element(n, n, c_zero());
        for b in &self.blocks {
            for (i, &pi) in b.positions.iter().enumerate() {
                for (j, &pj) in b.positions.iter().enumerate() {
                    r[(pi, pj)] = b.matrix[(i, j)];
                }
            }
        }
        r
    }

    /// `max |R - R†|`.
    pub fn hermiticity_defect(&self) -> S {
        self.blocks
            .iter()
            .flat_map(|b| {
                let m = &b.matrix;
                (0..m.nrows())
                    .flat_map(move |i| (0..m.ncols()).map(move |j| cabs(m[(i, j)] - m[(j, i)].conj())))
            })
            .fold(S::zero(), |a, b| a.max(b))
    }

    /// Inverse rearrangement back to the sparse superoperator; exact zeros are not stored.
    pub fn to_superop(&self) -> Result<SuperopMatrix<S>> {
        let (Some(trunc), Some(metadata)) = (self.trunc, self.metadata.clone()) else {
            return Err(Error::Unsupported(
                "inverse rearrangement needs an OAM-indexed matrix".into(),
            ));
        };
        let out = trunc.output_basis();
        let inp = trunc.input_basis();
        let mode = |pos: usize| (out[pos / self.input_dim], inp[pos % self.input_dim]);
        let mut t = SuperopMatrix::new(trunc, metadata);
        for b in &self.blocks {
            for (i, &pi) in b.positions.iter().enumerate() {
                let (ok, ik) = mode(pi);
                for (j, &pj) in b.positions.iter().enumerate() {
                    let v = b.matrix[(i, j)];
                    if v != c_zero() {
                        let (ob, ib) = mode(pj);
                        t.insert(SuperopIndex::new(ok, ob, ik, ib), v)?;
                    }
                }
            }
        }
        Ok(t)
    }
}

/// Rearranges `T` into its block-diagonal Choi-like form.
pub fn rearrange<S: Real>(t: &SuperopMatrix<S>) -> ChoiLikeMatrix<S> {
    let trunc = t.truncation();
    let out = trunc.output_basis();
    let inp = trunc.input_basis();
    let d_in = inp.len();
    let span = (trunc.max_in() + trunc.max_out()) as i32;
    let mut blocks = Vec::new();
    for shift in -span..=span {
        let members: Vec<(usize, ModeIndex, ModeIndex)> = out
            .iter()
            .enumerate()
            .flat_map(|(a, o)| inp.iter().enumerate().map(move |(c, i)| (a * d_in + c, *o, *i)))
            .filter(|(_, o, i)| o.l - i.l == shift)
            .collect();
        if members.is_empty() {
            continue;
        }
        let matrix = CMatrix::from_fn(members.len(), members.len(), |x, y| {
            let (_, ok, ik) = members[x];
            let (_, ob, ib) = members[y];
            t.get(&SuperopIndex::new(ok, ob, ik, ib))
        });
        blocks.push(ChoiBlock {
            shift: Some(shift),
            positions: members.iter().map(|m| m.0).collect(),
            matrix,
        });
    }
    ChoiLikeMatrix {
        output_dim: out.len(),
        input_dim: d_in,
        trunc: Some(trunc),
        blocks,
        metadata: Some(t.metadata.clone()),
    }
}

/// Rearranges a dense superoperator (`d_out² × d_in²`, row `a·d_out+b`, column
/// `c·d_in+d` for `ρ̃_{ab} = Σ T ρ_{cd}`) into `R_{(a,c),(b,d)}`.
pub fn rearrange_dense<S: Real>(
    t: &CMatrix<S>,
    output_dim: usize,
    input_dim: usize,
) -> Result<ChoiLikeMatrix<S>> {
    if t.shape() != (output_dim * output_dim, input_dim * input_dim) {
        return Err(Error::Shape(format!(
            "dense superoperator is {:?}, expected {}x{}",
            t.shape(),
            output_dim * output_dim,
            input_dim * input_dim
        )));
    }
    let n = output_dim * input_dim;
    let r = CMatrix::from_fn(n, n, |row, col| {
        let (a, c) = (row / input_dim, row % input_dim);
        let (b, d) = (col / input_dim, col % input_dim);
        t[(a * output_dim + b, c * input_dim + d)]
    });
    ChoiLikeMatrix::from_dense(r, output_dim, input_dim)
}

/// Ordered Kraus operators `A_k = √λ_k · reshape(v_k)`, each `d_out × d_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet<S> {
    pub operators: Vec<CMatrix<S>>,
    /// Non-increasing, non-negative.
    pub eigenvalues: Vec<S>,
    /// OAM shift carried by each operator, when known.
    pub shifts: Vec<Option<i32>>,
    output_dim: usize,
    input_dim: usize,
    trunc: Option<TruncationSpec>,
    pub metadata: Option<SuperopMetadata>,
}

impl<S: Real> KrausSet<S> {
    /// Builds a set from explicit operators, ordered by decreasing Frobenius weight.
    pub fn from_operators(mut operators: Vec<CMatrix<S>>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::Shape("empty Kraus set".into()));
        };
        let (d_out, d_in) = first.shape();
        if operators.iter().any(|a| a.shape() != (d_out, d_in)) {
            return Err(Error::Shape("Kraus operators differ in shape".into()));
        }
        let weight = |a: &CMatrix<S>| a.iter().fold(S::zero(), |s, z| s + z.norm_sqr());
        operators.sort_by(|a, b| {
            weight(b)
                .partial_cmp(&weight(a))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(Self {
            eigenvalues: operators.iter().map(weight).collect(),
            shifts: vec![None; operators.len()],
            operators,
            output_dim: d_out,
            input_dim: d_in,
            trunc: None,
            metadata: None,
        })
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn truncation(&self) -> Option<TruncationSpec> {
        self.trunc
    }

    /// `Σ_k A_k ρ A_k†`.
    pub fn apply(&self, rho: &CMatrix<S>) -> Result<CMatrix<S>> {
        if rho.shape() != (self.input_dim, self.input_dim) {
            return Err(Error::Shape(format!(
                "density matrix is {:?}, expected {}x{}",
                rho.shape(),
                self.input_dim,
                self.input_dim
            )));
        }
        let mut out = CMatrix::from_element(self.output_dim, self.output_dim, c_zero());
        for a in &self.operators {
            out += a * rho * a.adjoint();
        }
        Ok(out)
    }

    /// The isometry `E` embedding the input space into the output space.
    pub fn embedding(&self) -> CMatrix<S> {
        let mut e = CMatrix::from_element(self.output_dim, self.input_dim, c_zero());
        match self.trunc {
            Some(t) => {
                for (i, o) in t.embedding().into_iter().enumerate() {
                    e[(o, i)] = c_real(S::one());
                }
            }
            None => {
                for i in 0..self.input_dim.min(self.output_dim) {
                    e[(i, i)] = c_real(S::one());
                }
            }
        }
        e
    }
}

/// Eigendecomposes each block of `r` and emits Kraus operators.
///
/// Eigenvalues in `[-ε, 0)` with `ε = 1e-8·λ₁` are clamped to zero; anything
/// more negative is reported as a positivity violation. Operators with
/// `λ < cutoff_ratio·λ₁` are dropped. Each eigenvector is phase-fixed so its
/// largest component is real and positive.
pub fn kraus_decompose<S: Real>(r: &ChoiLikeMatrix<S>, cutoff_ratio: S) -> Result<KrausSet<S>> {
    struct Candidate<S> {
        lambda: S,
        block: usize,
        vector: DVector<Complex<S>>,
    }
    let mut candidates = Vec::new();
    for (bi, b) in r.blocks.iter().enumerate() {
        // Hermitian part; the solver reads only one triangle.
        let h = (&b.matrix + b.matrix.adjoint()) * c_real(S::lit(0.5));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&x, &y| {
            eig.eigenvalues[y]
                .partial_cmp(&eig.eigenvalues[x])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for k in order {
            candidates.push(Candidate {
                lambda: eig.eigenvalues[k],
                block: bi,
                vector: eig.eigenvectors.column(k).into_owned(),
            });
        }
    }
    let lambda1 = candidates
        .iter()
        .map(|c| c.lambda)
        .fold(S::zero(), |a, b| a.max(b));
    let eps = S::lit(PSD_TOLERANCE) * lambda1;
    if let Some(bad) = candidates.iter().find(|c| c.lambda < -eps) {
        return Err(Error::Positivity {
            eigenvalue: bad.lambda.as_f64(),
            threshold: eps.as_f64(),
        });
    }
    // Stable: ties keep block order, then in-block order.
    candidates.sort_by(|a, b| {
        b.lambda
            .partial_cmp(&a.lambda)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let (d_out, d_in) = (r.output_dim, r.input_dim);
    let mut set = KrausSet {
        operators: Vec::new(),
        eigenvalues: Vec::new(),
        shifts: Vec::new(),
        output_dim: d_out,
        input_dim: d_in,
        trunc: r.trunc,
        metadata: r.metadata.clone(),
    };
    for c in candidates {
        let lambda = c.lambda.max(S::zero());
        if lambda < cutoff_ratio * lambda1 || (lambda == S::zero() && lambda1 == S::zero()) {
            continue;
        }
        let block = &r.blocks[c.block];
        let v = phase_fixed(c.vector);
        let scale = lambda.sqrt();
        let mut a = CMatrix::from_element(d_out, d_in, c_zero());
        for (x, &pos) in block.positions.iter().enumerate() {
            a[(pos / d_in, pos % d_in)] = v[x] * scale;
        }
        set.operators.push(a);
        set.eigenvalues.push(lambda);
        set.shifts.push(block.shift);
    }
    Ok(set)
}

fn phase_fixed<S: Real>(mut v: DVector<Complex<S>>) -> DVector<Complex<S>> {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if cabs(*z) > cabs(v[best]) {
            best = i;
        }
    }
    let m = cabs(v[best]);
    if m > S::zero() {
        let phase = v[best].conj() / c_real(m);
        v *= phase;
        v[best] = c_real(v[best].re);
    }
    v
}

/// `D = I - Σ A_k†A_k` and its largest-magnitude eigenvalue.
pub fn completeness_deficiency<S: Real>(k: &KrausSet<S>) -> (CMatrix<S>, S) {
    let mut d = CMatrix::identity(k.input_dim, k.input_dim);
    for a in &k.operators {
        d -= a.adjoint() * a;
    }
    let h = (&d + d.adjoint()) * c_real(S::lit(0.5));
    let eig = SymmetricEigen::new(h);
    let largest = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(S::zero(), |a: S, b: S| if b.abs() > a.abs() { b } else { a });
    (d, largest)
}

/// A near-degenerate pair of Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneratePair<S> {
    /// Positions in the Kraus ordering.
    pub indices: (usize, usize),
    pub eigenvalues: (S, S),
    /// Dominant OAM shift `l̃ - l` of each operator.
    pub shifts: (Option<i32>, Option<i32>),
}

impl<S> DegeneratePair<S> {
    /// Both operators shift OAM by equal and opposite nonzero amounts.
    pub fn is_raising_lowering(&self) -> bool {
        matches!(self.shifts, (Some(a), Some(b)) if a != 0 && a == -b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadingKrausReport<S> {
    /// `tr(E†A₁)/d_in`.
    pub overlap: Complex<S>,
    /// Spectral norm `‖A₁ - c·E‖`.
    pub residual: S,
    pub pairs: Vec<DegeneratePair<S>>,
}

/// Compares `A₁` with a multiple of the embedding isometry and finds
/// degenerate eigenvalue pairs.
pub fn leading_kraus_analysis<S: Real>(k: &KrausSet<S>) -> Result<LeadingKrausReport<S>> {
    let a1 = k
        .operators
        .first()
        .ok_or_else(|| Error::Shape("empty Kraus set".into()))?;
    let e = k.embedding();
    let overlap = (e.adjoint() * a1).trace() / c_real(S::from_usize_lossy(k.input_dim));
    let diff = a1 - &e * overlap;
    let residual = diff
        .singular_values()
        .iter()
        .copied()
        .fold(S::zero(), |a, b| a.max(b));

    let lambda1 = k.eigenvalues[0];
    let tol = S::lit(DEGENERACY_THRESHOLD) * lambda1;
    let mut pairs = Vec::new();
    let mut i = 0;
    while i + 1 < k.len() {
        let (x, y) = (k.eigenvalues[i], k.eigenvalues[i + 1]);
        if (x - y).abs() < tol && y > S::zero() {
            pairs.push(DegeneratePair {
                indices: (i, i + 1),
                eigenvalues: (x, y),
                shifts: (dominant_shift(k, i), dominant_shift(k, i + 1)),
            });
            i += 2;
        } else {
            i += 1;
        }
    }
    Ok(LeadingKrausReport {
        overlap,
        residual,
        pairs,
    })
}

/// Shift carried by operator `i`, or the shift holding most of its weight.
fn dominant_shift<S: Real>(k: &KrausSet<S>, i: usize) -> Option<i32> {
    if let Some(s) = k.shifts[i] {
        return Some(s);
    }
    let t = k.trunc?;
    let (out, inp) = (t.output_basis(), t.input_basis());
    let a = &k.operators[i];
    let mut weights = std::collections::BTreeMap::<i32, S>::new();
    for (r, o) in out.iter().enumerate() {
        for (c, m) in inp.iter().enumerate() {
            *weights.entry(o.l - m.l).or_insert(S::zero()) += a[(r, c)].norm_sqr();
        }
    }
    weights
        .into_iter()
        .fold(None, |best: Option<(i32, S)>, (s, w)| match best {
            Some((_, bw)) if bw >= w => best,
            _ => Some((s, w)),
        })
        .map(|(s, _)| s)
}

pub const KRAUS_FORMAT_VERSION: u32 = 1;

/// Sidecar of an exported Kraus set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrausSidecar {
    pub format_version: u32,
    pub output_dim: usize,
    pub input_dim: usize,
    pub max_in: Option<u32>,
    pub max_out: Option<u32>,
    pub basis_order: String,
    pub count: usize,
    pub eigenvalues: Vec<f64>,
    pub shifts: Vec<Option<i32>>,
    pub payload_sha256: String,
    pub superop: Option<SuperopMetadata>,
}

/// Writes the operators to `path` (per operator: `λ` then `d_out·d_in` complex
/// doubles, row-major, little-endian) and metadata to `path.json`.
pub fn save_kraus<S: Real>(k: &KrausSet<S>, path: &Path) -> Result<KrausSidecar> {
    let mut payload = Vec::with_capacity(k.len() * (8 + 16 * k.output_dim * k.input_dim));
    for (a, lambda) in k.operators.iter().zip(&k.eigenvalues) {
        payload.extend_from_slice(&lambda.as_f64().to_le_bytes());
        for r in 0..k.output_dim {
            for c in 0..k.input_dim {
                payload.extend_from_slice(&a[(r, c)].re.as_f64().to_le_bytes());
                payload.extend_from_slice(&a[(r, c)].im.as_f64().to_le_bytes());
            }
        }
    }
    let sidecar = KrausSidecar {
        format_version: KRAUS_FORMAT_VERSION,
        output_dim: k.output_dim,
        input_dim: k.input_dim,
        max_in: k.trunc.map(|t| t.max_in()),
        max_out: k.trunc.map(|t| t.max_out()),
        basis_order: "l ascending then p ascending".into(),
        count: k.len(),
        eigenvalues: k.eigenvalues.iter().map(|x| x.as_f64()).collect(),
        shifts: k.shifts.clone(),
        payload_sha256: sha256_hex(&payload),
        superop: k.metadata.clone(),
    };
    write_atomic(path, &payload)?;
    write_atomic(
        &path.with_extension("json"),
        &serde_json::to_vec_pretty(&sidecar)?,
    )?;
    Ok(sidecar)
}

/// Reads a set written by [`save_kraus`].
pub fn load_kraus(path: &Path) -> Result<KrausSet<f64>> {
    let side_path = path.with_extension("json");
    let sidecar: KrausSidecar =
        serde_json::from_slice(&fs::read(&side_path)?).map_err(|e| Error::CacheFormat {
            path: side_path.clone(),
            reason: e.to_string(),
        })?;
    let payload = fs::read(path)?;
    if sha256_hex(&payload) != sidecar.payload_sha256 {
        return Err(Error::HashMismatch {
            path: path.to_path_buf(),
            what: "payload sha256".into(),
        });
    }
    let (d_out, d_in) = (sidecar.output_dim, sidecar.input_dim);
    let record = 8 + 16 * d_out * d_in;
    if payload.len() != record * sidecar.count || sidecar.shifts.len() != sidecar.count {
        return Err(Error::CacheFormat {
            path: path.to_path_buf(),
            reason: "payload size does not match the sidecar".into(),
        });
    }
    let f = |b: &[u8], o: usize| f64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
    let mut operators = Vec::with_capacity(sidecar.count);
    let mut eigenvalues = Vec::with_capacity(sidecar.count);
    for rec in payload.chunks_exact(record) {
        eigenvalues.push(f(rec, 0));
        operators.push(CMatrix::from_fn(d_out, d_in, |r, c| {
            let o = 8 + 16 * (r * d_in + c);
            Complex::new(f(rec, o), f(rec, o + 8))
        }));
    }
    let trunc = match (sidecar.max_in, sidecar.max_out) {
        (Some(i), Some(o)) => Some(TruncationSpec::new(i, o)?),
        _ => None,
    };
    Ok(KrausSet {
        operators,
        eigenvalues,
        shifts: sidecar.shifts,
        output_dim: d_out,
        input_dim: d_in,
        trunc,
        metadata: sidecar.superop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superop::AssemblyMethod;

    fn meta() -> SuperopMetadata {
        SuperopMetadata {
            w0: 0.01,
            lambda: 1e-6,
            cn2: 0.0,
            z: 1.0,
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            method: AssemblyMethod::Separable,
            max_error_estimate: 0.0,
        }
    }

    fn m(l: i32, p: u32) -> ModeIndex {
        ModeIndex::new(l, p)
    }

    /// Qubit dephasing: coherences scaled by `1 - 2q`.
    fn dephasing(q: f64) -> CMatrix<f64> {
        let mut t = CMatrix::from_element(4, 4, c_zero());
        t[(0, 0)] = c_real(1.0);
        t[(3, 3)] = c_real(1.0);
        t[(1, 1)] = c_real(1.0 - 2.0 * q);
        t[(2, 2)] = c_real(1.0 - 2.0 * q);
        t
    }

    #[test]
    fn dephasing_spectrum() {
        let q = 0.15;
        let r = rearrange_dense(&dephasing(q), 2, 2).unwrap();
        let k = kraus_decompose(&r, 1e-12).unwrap();
        assert_eq!(k.len(), 2);
        assert!((k.eigenvalues[0] - 2.0 * (1.0 - q)).abs() < 1e-12);
        assert!((k.eigenvalues[1] - 2.0 * q).abs() < 1e-12);
        let (_, def) = completeness_deficiency(&k);
        assert!(def.abs() < 1e-12);
        let rho = CMatrix::from_row_slice(
            2,
            2,
            &[
                c_real(0.6),
                Complex::new(0.1, 0.2),
                Complex::new(0.1, -0.2),
                c_real(0.4),
            ],
        );
        let out = k.apply(&rho).unwrap();
        assert!((out[(0, 1)] - rho[(0, 1)] * c_real(1.0 - 2.0 * q)).norm() < 1e-12);
        assert!((out[(0, 0)] - rho[(0, 0)]).norm() < 1e-12);
    }

    #[test]
    fn single_entry_lands_in_place() {
        let t = TruncationSpec::new(1, 1).unwrap();
        let mut s = SuperopMatrix::<f64>::new(t, meta());
        let c = Complex::new(0.3, -0.2);
        s.insert(SuperopIndex::new(m(1, 0), m(1, 0), m(0, 0), m(0, 0)), c)
            .unwrap();
        let r = rearrange(&s).to_dense();
        let d_in = t.input_dim();
        let row = t.output_position(m(1, 0)).unwrap() * d_in + t.input_position(m(0, 0)).unwrap();
        assert_eq!(r[(row, row)], c);
        assert_eq!(r.iter().filter(|z| **z != c_zero()).count(), 1);
    }

    #[test]
    fn identity_channel() {
        let t = TruncationSpec::new(1, 1).unwrap();
        let id = SuperopMatrix::<f64>::embedding_identity(t, meta());
        let r = rearrange(&id);
        let dense = r.to_dense();
        assert_eq!(dense.shape(), (36, 36));
        let trace: f64 = (0..36).map(|i| dense[(i, i)].re).sum();
        assert_eq!(trace, 6.0);
        let k = kraus_decompose(&r, DEFAULT_CUTOFF_RATIO).unwrap();
        assert_eq!(k.len(), 1);
        assert!((k.eigenvalues[0] - 6.0).abs() < 1e-12);
        let (d, def) = completeness_deficiency(&k);
        assert!(def.abs() < 1e-12 && d.iter().all(|z| z.norm() < 1e-12));
        let rep = leading_kraus_analysis(&k).unwrap();
        assert!((rep.overlap - c_real(1.0)).norm() < 1e-12);
        assert!(rep.residual < 1e-12);
        assert!(rep.pairs.is_empty());
        assert_eq!(r.to_superop().unwrap(), id);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut r = CMatrix::from_element(4, 4, c_zero());
        r[(0, 0)] = c_real(1.0);
        r[(1, 1)] = c_real(-1e-3);
        let r = ChoiLikeMatrix::from_dense(r, 2, 2).unwrap();
        assert!(matches!(
            kraus_decompose(&r, 1e-12),
            Err(Error::Positivity { .. })
        ));
    }

    #[test]
    fn tiny_negative_eigenvalues_are_clamped() {
        let mut r = CMatrix::from_element(4, 4, c_zero());
        r[(0, 0)] = c_real(1.0);
        r[(1, 1)] = c_real(-1e-10);
        let r = ChoiLikeMatrix::from_dense(r, 2, 2).unwrap();
        let k = kraus_decompose(&r, 0.0).unwrap();
        assert!(k.eigenvalues.iter().all(|l| *l >= 0.0));
        assert!(k.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn export_round_trip() {
        let r = rearrange_dense(&dephasing(0.2), 2, 2).unwrap();
        let k = kraus_decompose(&r, 1e-12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.bin");
        save_kraus(&k, &path).unwrap();
        let back = load_kraus(&path).unwrap();
        assert_eq!(back.operators, k.operators);
        assert_eq!(back.eigenvalues, k.eigenvalues);
        assert_eq!(fs::metadata(&path).unwrap().len(), 2 * (8 + 16 * 4));
    }
}
