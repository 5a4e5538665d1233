mod common;

use common::{assemble, max_norm};
use nalgebra::{Complex, DMatrix};
use oam_channel::kraus::{
    completeness_deficiency, kraus_decompose, rearrange, rearrange_dense, CMatrix, ChoiLikeMatrix, KrausSet,
};
use oam_channel::verify::{random_density_matrix, reconstruction_error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix<f64> {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    g.qr().q()
}

fn channel_gap(a: &KrausSet<f64>, b: &KrausSet<f64>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..5)
        .map(|_| {
            let rho = random_density_matrix(a.input_dim(), &mut rng);
            max_norm(&(a.apply(&rho).unwrap() - b.apply(&rho).unwrap()))
        })
        .fold(0.0, f64::max)
}

#[test]
fn reconstruction_matches_direct_action() {
    let t = assemble(1, 3, 500.0);
    let r = rearrange(&t);
    let full = kraus_decompose(&r, 0.0).unwrap();
    assert!(reconstruction_error(&t, &full, 20, 5).unwrap() <= 1e-8);
    let cut = kraus_decompose(&r, 1e-12).unwrap();
    assert!(cut.len() <= full.len());
    assert!(reconstruction_error(&t, &cut, 20, 5).unwrap() <= 1e-8);
}

#[test]
fn eigenvalues_are_non_negative_and_ordered() {
    let t = assemble(2, 3, 1000.0);
    let k = kraus_decompose(&rearrange(&t), 1e-12).unwrap();
    assert!(k.eigenvalues.iter().all(|l| *l >= 0.0));
    assert!(k.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    for (a, l) in k.operators.iter().zip(&k.eigenvalues) {
        assert!((a.norm_squared() - l).abs() <= 1e-10 * l.max(1.0));
    }
}

#[test]
fn rearrangement_is_hermitian_and_inverts() {
    let t = assemble(1, 2, 200.0);
    let r = rearrange(&t);
    assert!(r.hermiticity_defect() <= 2e-10);
    let back = r.to_superop().unwrap();
    assert_eq!(back.max_abs_difference(&t), 0.0);
}

#[test]
fn block_form_matches_dense_rearrangement() {
    let t = assemble(1, 2, 500.0);
    let trunc = t.truncation();
    let (d_out, d_in) = (trunc.output_dim(), trunc.input_dim());
    let mut dense = CMatrix::from_element(d_out * d_out, d_in * d_in, Complex::new(0.0, 0.0));
    for (idx, v) in t.entries() {
        let a = trunc.output_position(idx.out_ket).unwrap();
        let b = trunc.output_position(idx.out_bra).unwrap();
        let c = trunc.input_position(idx.in_ket).unwrap();
        let d = trunc.input_position(idx.in_bra).unwrap();
        dense[(a * d_out + b, c * d_in + d)] = *v;
    }
    let from_dense = rearrange_dense(&dense, d_out, d_in).unwrap().to_dense();
    assert_eq!(max_norm(&(from_dense - rearrange(&t).to_dense())), 0.0);
}

#[test]
fn single_block_and_blockwise_eigensolves_give_the_same_channel() {
    let t = assemble(1, 3, 500.0);
    let r = rearrange(&t);
    let blockwise = kraus_decompose(&r, 0.0).unwrap();
    let dense = ChoiLikeMatrix::from_dense(r.to_dense(), r.output_dim(), r.input_dim()).unwrap();
    let single = kraus_decompose(&dense, 0.0).unwrap();
    assert!(channel_gap(&blockwise, &single, 3) <= 1e-10);
}

#[test]
fn unitary_mixing_leaves_the_channel_unchanged() {
    let t = assemble(1, 2, 1000.0);
    let k = kraus_decompose(&rearrange(&t), 1e-12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u = random_unitary(k.len(), &mut rng);
    let mixed: Vec<CMatrix<f64>> = (0..k.len())
        .map(|j| {
            k.operators
                .iter()
                .enumerate()
                .fold(CMatrix::zeros(k.output_dim(), k.input_dim()), |acc, (i, a)| {
                    acc + a * u[(j, i)]
                })
        })
        .collect();
    let mixed = KrausSet::from_operators(mixed).unwrap();
    assert!(channel_gap(&k, &mixed, 4) <= 1e-10);
}

#[test]
fn completeness_deficiency_is_bounded_and_shrinks() {
    let mut previous = f64::INFINITY;
    for max_out in 1..=4 {
        let t = assemble(1, max_out, 500.0);
        let k = kraus_decompose(&rearrange(&t), 1e-12).unwrap();
        let (d, largest) = completeness_deficiency(&k);
        let eig = nalgebra::SymmetricEigen::new((&d + d.adjoint()) * Complex::new(0.5, 0.0));
        assert!(eig.eigenvalues.iter().all(|e| (-1e-8..=1.0).contains(e)));
        assert!(
            largest <= previous + 1e-9,
            "max_out {max_out}: {largest} > {previous}"
        );
        previous = largest;
    }
}

fn arbitrary_channel() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=3, 1usize..=3, 1usize..=4).prop_flat_map(|(d_out, d_in, n)| {
        proptest::collection::vec(-1.0f64..1.0, 2 * n * d_out * d_in).prop_map(move |v| (d_out, d_in, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_recovers_arbitrary_cp_maps((d_out, d_in, raw) in arbitrary_channel()) {
        let size = d_out * d_in;
        let ops: Vec<CMatrix<f64>> = raw
            .chunks(2 * size)
            .map(|c| DMatrix::from_fn(d_out, d_in, |i, j| Complex::new(c[2 * (i * d_in + j)], c[2 * (i * d_in + j) + 1])))
            .collect();
        let truth = KrausSet::from_operators(ops.clone()).unwrap();
        let n = d_out * d_in;
        // R_{(a,c),(b,d)} = Σ_k A_k[a,c]·conj(A_k[b,d])
        let r = CMatrix::from_fn(n, n, |x, y| {
            ops.iter()
                .map(|a| a[(x / d_in, x % d_in)] * a[(y / d_in, y % d_in)].conj())
                .sum::<Complex<f64>>()
        });
        let choi = ChoiLikeMatrix::from_dense(r, d_out, d_in).unwrap();
        let k = kraus_decompose(&choi, 0.0).unwrap();
        prop_assert!(k.eigenvalues.iter().all(|l| *l >= 0.0));
        prop_assert!(k.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let rank = k.eigenvalues.iter().filter(|l| **l > 1e-12 * k.eigenvalues[0]).count();
        prop_assert!(rank <= ops.len().min(n));
        prop_assert!(channel_gap(&truth, &k, 1) <= 1e-10);
    }
}
