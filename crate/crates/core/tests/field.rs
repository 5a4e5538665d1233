mod common;

use common::{assemble, geom};
use nalgebra::{Complex, DMatrix};
use oam_channel::aqec::{apply_channel_and_recover, build_code, transpose_recovery};
use oam_channel::beam::{mode_basis, ModeIndex, TruncationSpec};
use oam_channel::field::{state_intensity_grid, BasisTag, FieldGrid, GridSpec, StateOnModes};
use oam_channel::kraus::{kraus_decompose, rearrange, CMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_gap(a: &FieldGrid<f64>, b: &FieldGrid<f64>) -> f64 {
    (&a.intensity - &b.intensity).abs().max()
}

#[test]
fn logical_zero_integrates_to_one() {
    let trunc = TruncationSpec::new(3, 3).unwrap();
    let code = build_code::<f64>(&trunc).unwrap();
    let state = StateOnModes::pure(
        code.logical_zero.clone(),
        trunc.input_basis(),
        BasisTag::Input,
        500.0,
    )
    .unwrap();
    let spec = GridSpec {
        points: 256,
        half_width: 5.0,
    };
    let g = state_intensity_grid(&state, &geom(), &spec).unwrap();
    let total = g.integrated_intensity();
    assert!((total - 1.0).abs() <= 1e-4, "integrated intensity {total}");
    assert!(g.intensity.iter().all(|v| *v >= 0.0));
    // Ring structure: the centre is dark, since every component carries |l| = 3.
    let c = spec.points / 2;
    assert!(g.intensity[(c, c)] < 1e-3 * g.intensity.max());
}

fn random_mixed(basis: &[ModeIndex], rng: &mut ChaCha8Rng) -> CMatrix<f64> {
    let d = basis.len();
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    rho / Complex::new(tr, 0.0)
}

#[test]
fn mixed_grids_are_linear_and_hermitian_consistent() {
    let basis = mode_basis(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r1 = random_mixed(&basis, &mut rng);
    let r2 = random_mixed(&basis, &mut rng);
    let spec = GridSpec {
        points: 33,
        half_width: 3.0,
    };
    let z = 120.0;
    let grid = |rho: CMatrix<f64>| {
        let s = StateOnModes::mixed(rho, basis.clone(), BasisTag::Output, z).unwrap();
        state_intensity_grid(&s, &geom(), &spec).unwrap()
    };
    let (a, b) = (0.3, 0.6);
    let combo = grid(&r1 * Complex::new(a, 0.0) + &r2 * Complex::new(b, 0.0));
    let g1 = grid(r1.clone());
    let g2 = grid(r2);
    let expected = &g1.intensity * a + &g2.intensity * b;
    let scale = g1.intensity.max();
    assert!((&combo.intensity - expected).abs().max() <= 1e-12 * scale);

    // A non-Hermitian operator and its adjoint give the same real intensity.
    let x = CMatrix::from_fn(basis.len(), basis.len(), |_, _| {
        Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.05
    });
    let gx = grid(x.clone());
    let gxd = grid(x.adjoint());
    assert!(grid_gap(&gx, &gxd) <= 1e-12 * gx.intensity.abs().max().max(1e-300));
}

#[test]
fn pure_state_matches_its_density_matrix() {
    let trunc = TruncationSpec::new(1, 1).unwrap();
    let code = build_code::<f64>(&trunc).unwrap();
    let psi = code.logical_one.clone();
    let spec = GridSpec {
        points: 21,
        half_width: 2.5,
    };
    let pure = StateOnModes::pure(psi.clone(), trunc.input_basis(), BasisTag::Input, 200.0).unwrap();
    let mixed =
        StateOnModes::mixed(&psi * psi.adjoint(), trunc.input_basis(), BasisTag::Input, 200.0).unwrap();
    let a = state_intensity_grid(&pure, &geom(), &spec).unwrap();
    let b = state_intensity_grid(&mixed, &geom(), &spec).unwrap();
    assert!(grid_gap(&a, &b) <= 1e-10 * a.intensity.max());
    assert!(b.amplitude.is_none());
    let amp = a.amplitude.unwrap();
    let from_amp = DMatrix::from_fn(21, 21, |i, j| amp[(i, j)].norm_sqr());
    assert!((from_amp - &a.intensity).abs().max() <= 1e-15 * a.intensity.max());
}

#[test]
fn stage_grids_integrate_to_the_state_trace() {
    let z = 500.0;
    let t = assemble(1, 3, z);
    let trunc = t.truncation();
    let k = kraus_decompose(&rearrange(&t), 1e-12).unwrap();
    let code = build_code(&trunc).unwrap();
    let recovery = transpose_recovery(&k, &code, 1e-10).unwrap();
    let psi = &code.logical_zero;
    let rho = psi * psi.adjoint();
    let noisy = k.apply(&rho).unwrap();
    let recovered = apply_channel_and_recover(&k, &recovery, &rho).unwrap();

    let spec = GridSpec {
        points: 256,
        half_width: 5.0,
    };
    let g = geom();
    for (name, state, basis) in [
        ("before", rho, trunc.input_basis()),
        ("after-noise", noisy, trunc.output_basis()),
        ("after-recovery", recovered, trunc.input_basis()),
    ] {
        let tr = state.trace().re;
        let grid = state_intensity_grid(
            &StateOnModes::mixed(state, basis, BasisTag::Input, z).unwrap(),
            &g,
            &spec,
        )
        .unwrap();
        let total = grid.integrated_intensity();
        assert!(
            (total - tr).abs() <= 1e-4,
            "{name}: integral {total} vs trace {tr}"
        );
        assert!(grid.intensity.iter().all(|v| *v >= -1e-12 * grid.intensity.max()));
    }
}
