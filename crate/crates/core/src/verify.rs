//! Independent cross-checks of the numerical pipeline.
//!
//! The element oracle evaluates the channel integral as three nested adaptive
//! 1-D quadratures (μ innermost over the full `[-π, π]` with the complex
//! azimuthal factor, then `r'`, then `r`), splitting each at the points where
//! the structure function has a cusp. It shares only the mode functions and the
//! structure function with the production route.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aqec::{channel_fidelity, CodeSpec, DEFAULT_RANK_TOL};
use crate::beam::{
    basis_dim, mode_basis, mode_field, radial_mode, radial_profile, BeamGeometry, ModeIndex, TruncationSpec,
};
use crate::error::{Error, Result};
use crate::kraus::{completeness_deficiency, kraus_decompose, rearrange, rearrange_dense, CMatrix, KrausSet};
use crate::quadrature::{integrate_1d, Tolerance};
use crate::scalar::{c_real, c_zero, Complex};
use crate::superop::{
    allowed_indices, assemble_superop, superop_element, AssemblyOptions, SuperopIndex, SuperopMatrix,
};
use crate::turbulence::TurbulenceParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    Fast,
    Full,
}

impl FromStr for VerifyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Self::Fast),
            "full" => Ok(Self::Full),
            other => Err(Error::Config(format!(
                "unknown verify level {other:?} (fast|full)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Nested 1-D oracle for one superoperator element (f64 only).
///
/// `radial_cutoff` is in beam widths; `rel_tol` applies to the outer
/// integral, the inner levels run two and one decades tighter.
pub fn nested_element_oracle(
    index: SuperopIndex,
    geom: &BeamGeometry<f64>,
    turb: &TurbulenceParams<f64>,
    z: f64,
    radial_cutoff: f64,
    rel_tol: f64,
) -> Result<Complex<f64>> {
    if !index.satisfies_selection_rule() {
        return Ok(c_zero());
    }
    use std::f64::consts::PI;
    let sf = turb.structure_function(geom.wavelength(), z)?;
    let r_max = radial_cutoff * geom.beam_width(z);
    let delta = (index.in_ket.l - index.out_ket.l) as f64;
    let budget = 20_000_000;
    let tol_mu = Tolerance::new(rel_tol * 1e-2, 1e-15, budget);
    let tol_rp = Tolerance::new(rel_tol * 1e-1, 1e-14, budget);
    let tol_r = Tolerance::new(rel_tol, 1e-13, budget);
    let failed = std::cell::Cell::new(false);

    let angular = |r: f64, rp: f64| -> Complex<f64> {
        let f = |mu: f64| {
            let sep = (r * r + rp * rp - 2.0 * r * rp * mu.cos()).max(0.0).sqrt();
            Complex::new(0.0, delta * mu).exp() * (-0.5 * sf.phase_variance(sep)).exp()
        };
        let a = integrate_1d(f, -PI, 0.0, tol_mu);
        let b = integrate_1d(f, 0.0, PI, tol_mu);
        if !(a.converged && b.converged) {
            failed.set(true);
        }
        a.value + b.value
    };
    let outer = |r: f64| -> Complex<f64> {
        let left = radial_mode(geom, index.out_ket, r, z).conj() * radial_mode(geom, index.in_ket, r, z) * r;
        let g = |rp: f64| {
            radial_mode(geom, index.out_bra, rp, z)
                * radial_mode(geom, index.in_bra, rp, z).conj()
                * rp
                * angular(r, rp)
        };
        let a = integrate_1d(g, 0.0, r, tol_rp);
        let b = integrate_1d(g, r, r_max, tol_rp);
        if !(a.converged && b.converged) {
            failed.set(true);
        }
        left * (a.value + b.value)
    };
    let res = integrate_1d(outer, 0.0, r_max, tol_r);
    if !res.converged || failed.get() {
        return Err(Error::ElementNotConverged {
            index,
            value_re: res.value.re,
            value_im: res.value.im,
            error_estimate: res.error_estimate,
        });
    }
    Ok(res.value / (2.0 * PI))
}

/// Random density matrix `G G†/tr(G G†)` with Gaussian-ish entries.
pub fn random_density_matrix(d: usize, rng: &mut impl Rng) -> CMatrix<f64> {
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let rho = &g * g.adjoint();
    let tr: f64 = (0..d).map(|i| rho[(i, i)].re).sum();
    rho / c_real(tr)
}

/// Max-norm gap between `Σ A ρ A†` and the direct contraction `T·vec(ρ)`
/// over `samples` random density matrices.
pub fn reconstruction_error(
    t: &SuperopMatrix<f64>,
    k: &KrausSet<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = t.truncation().input_dim();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let rho = random_density_matrix(d, &mut rng);
        let a = t.apply(&rho)?;
        let b = k.apply(&rho)?;
        worst = worst.max((a - b).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok(worst)
}

/// Two-qubit repetition code `{|00⟩, |11⟩}` under a bit flip on the first
/// qubit: exactly correctable.
pub fn knill_laflamme_toy(p: f64) -> Result<(KrausSet<f64>, CodeSpec<f64>)> {
    let x = CMatrix::from_row_slice(2, 2, &[c_zero(), c_real(1.0), c_real(1.0), c_zero()]);
    let a0 = CMatrix::<f64>::identity(4, 4) * c_real((1.0 - p).sqrt());
    let a1 = x.kronecker(&CMatrix::<f64>::identity(2, 2)) * c_real(p.sqrt());
    let k = KrausSet::from_operators(vec![a0, a1])?;
    let e = |i: usize| {
        let mut v = DVector::from_element(4, c_zero());
        v[i] = c_real(1.0);
        v
    };
    Ok((k, CodeSpec::from_vectors(e(0), e(3))?))
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let t0 = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn reference_geometry() -> (BeamGeometry<f64>, TurbulenceParams<f64>) {
    (
        BeamGeometry::new(0.01, 1e-6).expect("valid geometry"),
        TurbulenceParams::kolmogorov(1e-14).expect("valid cn2"),
    )
}

fn element_cross_check(trunc: TruncationSpec, z: f64, picks: &[usize]) -> Result<(bool, String)> {
    let (geom, turb) = reference_geometry();
    let opts = AssemblyOptions::default();
    let t = assemble_superop(trunc, &geom, &turb, z, &opts)?;
    let allowed = allowed_indices(&trunc);
    let mut worst = 0.0f64;
    for &i in picks {
        let idx = allowed[i % allowed.len()];
        let oracle = nested_element_oracle(idx, &geom, &turb, z, opts.radial_cutoff, 1e-9)?;
        worst = worst.max((t.get(&idx) - oracle).norm());
    }
    Ok((
        worst <= 1e-6,
        format!("max |T - oracle| = {worst:.2e} over {} elements", picks.len()),
    ))
}

/// Runs the oracle suite.
pub fn run_checks(level: VerifyLevel) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(check("gram-orthonormality", || {
        let tol = Tolerance::new(1e-13, 1e-15, 1_000_000);
        let mut worst = 0.0f64;
        for l in 0..=6i32 {
            for p in 0..=6u32 {
                for q in 0..=p {
                    let (a, b) = (ModeIndex::new(l, p), ModeIndex::new(l, q));
                    let g = integrate_1d(
                        |x: f64| c_real(radial_profile(a, x) * radial_profile(b, x) * x),
                        0.0,
                        15.0,
                        tol,
                    );
                    let want = if p == q { 1.0 } else { 0.0 };
                    worst = worst.max((g.value.re - want).abs());
                }
            }
        }
        Ok((worst < 1e-10, format!("max |G - I| = {worst:.2e} for |l|,p <= 6")))
    }));

    out.push(check("field-norm-2d", || {
        let geom = BeamGeometry::new(0.01, 1e-6)?;
        let z = 500.0;
        let h = 6.0 * geom.beam_width(z);
        let n = 301;
        let step = 2.0 * h / (n - 1) as f64;
        let mut worst = 0.0f64;
        for m in [ModeIndex::new(0, 0), ModeIndex::new(2, 1), ModeIndex::new(-3, 2)] {
            let mut s = 0.0;
            for iy in 0..n {
                let y = -h + iy as f64 * step;
                for ix in 0..n {
                    let x = -h + ix as f64 * step;
                    s += mode_field(&geom, m, x.hypot(y), y.atan2(x), z).norm_sqr();
                }
            }
            worst = worst.max((s * step * step - 1.0).abs());
        }
        Ok((worst < 1e-6, format!("max |∫|ψ|² - 1| = {worst:.2e}")))
    }));

    out.push(check("zero-turbulence-identity", || {
        let geom = BeamGeometry::new(0.01, 1e-6)?;
        let trunc = TruncationSpec::new(1, 2)?;
        let t = assemble_superop(
            trunc,
            &geom,
            &TurbulenceParams::none(),
            500.0,
            &AssemblyOptions::default(),
        )?;
        let id = SuperopMatrix::embedding_identity(trunc, t.metadata.clone());
        let gap = t.max_abs_difference(&id);
        let k = kraus_decompose(&rearrange(&t), 1e-12)?;
        let code = crate::aqec::build_code(&trunc)?;
        let f = channel_fidelity(&k, &code, DEFAULT_RANK_TOL)?;
        Ok((
            gap <= 1e-6 && k.len() == 1 && (f - 1.0).abs() <= 1e-6,
            format!(
                "‖T - I‖max = {gap:.2e}, {} Kraus operator(s), fidelity {f:.12}",
                k.len()
            ),
        ))
    }));

    out.push(check("element-oracle-small", || {
        element_cross_check(TruncationSpec::new(1, 1)?, 500.0, &[0, 37, 101, 211])
    }));

    out.push(check("kraus-reconstruction", || {
        let (geom, turb) = reference_geometry();
        let t = assemble_superop(
            TruncationSpec::new(1, 1)?,
            &geom,
            &turb,
            500.0,
            &AssemblyOptions::default(),
        )?;
        let k = kraus_decompose(&rearrange(&t), 0.0)?;
        let err = reconstruction_error(&t, &k, 20, 7)?;
        let (_, def) = completeness_deficiency(&k);
        Ok((
            err <= 1e-8 && (0.0..=1.0).contains(&def),
            format!("max reconstruction gap {err:.2e}, deficiency {def:.4}"),
        ))
    }));

    out.push(check("toy-dephasing-kraus", || {
        let q: f64 = 0.2;
        let mut t = CMatrix::from_element(4, 4, c_zero());
        for (i, v) in [1.0, 1.0 - 2.0 * q, 1.0 - 2.0 * q, 1.0].into_iter().enumerate() {
            t[(i, i)] = c_real(v);
        }
        let k = kraus_decompose(&rearrange_dense(&t, 2, 2)?, 1e-12)?;
        let ok = k.len() == 2
            && (k.eigenvalues[0] - 2.0 * (1.0 - q)).abs() < 1e-12
            && (k.eigenvalues[1] - 2.0 * q).abs() < 1e-12;
        Ok((ok, format!("eigenvalues {:?}", k.eigenvalues)))
    }));

    out.push(check("toy-knill-laflamme", || {
        let (k, code) = knill_laflamme_toy(0.3)?;
        let f = channel_fidelity(&k, &code, DEFAULT_RANK_TOL)?;
        Ok(((f - 1.0).abs() <= 1e-9, format!("fidelity {f:.15}")))
    }));

    if level == VerifyLevel::Full {
        out.push(check("element-oracle-z500-1-3", || {
            element_cross_check(TruncationSpec::new(1, 3)?, 500.0, &[5, 1234, 4321, 9876])
        }));

        out.push(check("adaptive-element", || {
            let (geom, turb) = reference_geometry();
            let m0 = ModeIndex::new(0, 0);
            let idx = SuperopIndex::new(m0, m0, m0, m0);
            let opts = AssemblyOptions::default();
            let v = superop_element(idx, &geom, &turb, 500.0, &opts)?;
            let oracle = nested_element_oracle(idx, &geom, &turb, 500.0, opts.radial_cutoff, 1e-9)?;
            let gap = (v.value - oracle).norm();
            Ok((
                gap <= 1e-6 && v.value.re > 0.0 && v.value.re < 1.0,
                format!(
                    "3-D cubature {:.9} vs oracle {:.9} ({} evaluations)",
                    v.value.re, oracle.re, v.evaluations
                ),
            ))
        }));

        out.push(check("basis-dimensions", || {
            let ok = basis_dim(3) == 28 && basis_dim(6) == 91 && mode_basis(6).len() == 91;
            Ok((ok, "d(3)=28, d(6)=91".into()))
        }));
    }
    out
}

/// Hermitian random matrix helper for property tests.
pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> DMatrix<Complex<f64>> {
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    (&g + g.adjoint()) * c_real(0.5)
}
