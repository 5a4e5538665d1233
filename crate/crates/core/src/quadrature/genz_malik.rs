use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{IntegrationResult, Tolerance};
use crate::scalar::{c_zero, cabs, Complex, Real};

// Degree-7 rule with embedded degree-5 rule (Genz & Malik), generators on [-1, 1]^N.
const LAMBDA2: f64 = 0.358_568_582_800_318_091_990_645_153_907_937_495_454_1; // √(9/70)
const LAMBDA4: f64 = 0.948_683_298_050_513_799_599_668_063_329_815_560_116_0; // √(9/10)
const LAMBDA5: f64 = 0.688_247_201_611_685_297_721_628_734_293_623_525_126_9; // √(9/19)

struct Weights<S> {
    w1: S,
    w2: S,
    w3: S,
    w4: S,
    w5: S,
    e1: S,
    e2: S,
    e3: S,
    e4: S,
    ratio: S,
}

impl<S: Real> Weights<S> {
    fn new(dim: usize) -> Self {
        let n = dim as f64;
        Self {
            w1: S::lit((12824.0 - 9120.0 * n + 400.0 * n * n) / 19683.0),
            w2: S::lit(980.0 / 6561.0),
            w3: S::lit((1820.0 - 400.0 * n) / 19683.0),
            w4: S::lit(200.0 / 19683.0),
            w5: S::lit(6859.0 / 19683.0 / (1u64 << dim) as f64),
            e1: S::lit((729.0 - 950.0 * n + 50.0 * n * n) / 729.0),
            e2: S::lit(245.0 / 486.0),
            e3: S::lit((265.0 - 100.0 * n) / 1458.0),
            e4: S::lit(25.0 / 729.0),
            ratio: S::lit((LAMBDA2 * LAMBDA2) / (LAMBDA4 * LAMBDA4)),
        }
    }
}

/// Number of integrand evaluations per region for the `N`-dimensional rule.
pub(crate) const fn points_per_region(n: usize) -> usize {
    1 + 4 * n + 2 * n * (n - 1) + (1 << n)
}

struct Region<S, const N: usize> {
    center: [S; N],
    half: [S; N],
    value: Complex<S>,
    error: S,
    split: usize,
    seq: usize,
}

impl<S: Real, const N: usize> PartialEq for Region<S, N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Real, const N: usize> Eq for Region<S, N> {}
impl<S: Real, const N: usize> PartialOrd for Region<S, N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Real, const N: usize> Ord for Region<S, N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn apply_rule<S, F, const N: usize>(
    f: &F,
    w: &Weights<S>,
    center: [S; N],
    half: [S; N],
    seq: usize,
) -> Region<S, N>
where
    S: Real,
    F: Fn(&[S; N]) -> Complex<S>,
{
    let volume = half.iter().fold(S::one(), |acc, h| acc * (*h + *h));
    let (l2, l4, l5) = (S::lit(LAMBDA2), S::lit(LAMBDA4), S::lit(LAMBDA5));
    let f0 = f(&center);
    let two_f0 = f0 + f0;

    let mut sum2 = c_zero::<S>();
    let mut sum3 = c_zero::<S>();
    let mut split = 0;
    let mut best_diff = -S::one();
    for i in 0..N {
        let mut p = center;
        p[i] = center[i] - l2 * half[i];
        let f2m = f(&p);
        p[i] = center[i] + l2 * half[i];
        let f2p = f(&p);
        p[i] = center[i] - l4 * half[i];
        let f3m = f(&p);
        p[i] = center[i] + l4 * half[i];
        let f3p = f(&p);
        sum2 += f2m + f2p;
        sum3 += f3m + f3p;
        let diff = cabs(f2m + f2p - two_f0 - (f3m + f3p - two_f0) * w.ratio);
        // Prefer the wider axis when fourth differences tie.
        let tie = (diff - best_diff).abs() <= S::lit(1e-10) * best_diff.abs();
        if diff > best_diff && !tie || tie && half[i] > half[split] {
            best_diff = diff;
            split = i;
        }
    }

    let mut sum4 = c_zero::<S>();
    for i in 0..N {
        for j in (i + 1)..N {
            let mut p = center;
            for (si, sj) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                p[i] = center[i] + S::lit(si) * l4 * half[i];
                p[j] = center[j] + S::lit(sj) * l4 * half[j];
                sum4 += f(&p);
            }
        }
    }

    let mut sum5 = c_zero::<S>();
    for mask in 0..(1usize << N) {
        let mut p = center;
        for (k, pk) in p.iter_mut().enumerate() {
            let s = if mask >> k & 1 == 1 { l5 } else { -l5 };
            *pk = center[k] + s * half[k];
        }
        sum5 += f(&p);
    }

    let seventh = (f0 * w.w1 + sum2 * w.w2 + sum3 * w.w3 + sum4 * w.w4 + sum5 * w.w5) * volume;
    let fifth = (f0 * w.e1 + sum2 * w.e2 + sum3 * w.e3 + sum4 * w.e4) * volume;
    Region {
        center,
        half,
        value: seventh,
        error: cabs(seventh - fifth),
        split,
        seq,
    }
}

/// Globally adaptive Genz-Malik cubature of a complex integrand on an `N`-box (`N` = 2 or 3).
pub fn integrate_box<S, F, const N: usize>(
    f: &F,
    lower: [S; N],
    upper: [S; N],
    tol: Tolerance<S>,
) -> IntegrationResult<S>
where
    S: Real,
    F: Fn(&[S; N]) -> Complex<S>,
{
    assert!(N >= 2, "Genz-Malik needs at least two dimensions");
    let weights = Weights::<S>::new(N);
    let per_region = points_per_region(N);
    let mut center = [S::zero(); N];
    let mut half = [S::zero(); N];
    for k in 0..N {
        center[k] = (lower[k] + upper[k]) * S::lit(0.5);
        half[k] = (upper[k] - lower[k]) * S::lit(0.5);
    }
    let root = apply_rule(f, &weights, center, half, 0);
    let mut evaluations = per_region;
    let mut total = root.value;
    let mut total_err = root.error;
    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut seq = 1;

    while total_err > tol.target(cabs(total)) && evaluations + 2 * per_region <= tol.max_evaluations {
        let worst = heap.pop().expect("heap is never empty");
        let d = worst.split;
        let mut half = worst.half;
        half[d] *= S::lit(0.5);
        if half[d] <= worst.center[d].abs().max(S::one()) * S::epsilon() * S::lit(16.0) {
            heap.push(worst);
            break;
        }
        let mut lo = worst.center;
        lo[d] -= half[d];
        let mut hi = worst.center;
        hi[d] += half[d];
        let a = apply_rule(f, &weights, lo, half, seq);
        let b = apply_rule(f, &weights, hi, half, seq + 1);
        seq += 2;
        evaluations += 2 * per_region;
        total += a.value + b.value - worst.value;
        total_err += a.error + b.error - worst.error;
        heap.push(a);
        heap.push(b);
    }

    let mut regions = heap.into_vec();
    regions.sort_by(|x, y| {
        x.center
            .iter()
            .zip(&y.center)
            .map(|(a, b)| a.partial_cmp(b).unwrap_or(Ordering::Equal))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then_with(|| x.seq.cmp(&y.seq))
    });
    let mut value = c_zero();
    let mut error = S::zero();
    for r in &regions {
        value += r.value;
        error += r.error;
    }
    IntegrationResult {
        value,
        error_estimate: error,
        evaluations,
        converged: error <= tol.target(cabs(value)),
    }
}
