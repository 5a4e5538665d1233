use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{IntegrationResult, Tolerance};
use crate::scalar::{c_zero, cabs, Complex, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss 7-point weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment<S> {
    a: S,
    b: S,
    value: Complex<S>,
    error: S,
    seq: usize,
}

impl<S: Real> PartialEq for Segment<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Real> Eq for Segment<S> {}
impl<S: Real> PartialOrd for Segment<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Real> Ord for Segment<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn kronrod15<S: Real, F: Fn(S) -> Complex<S>>(f: &F, a: S, b: S) -> (Complex<S>, S) {
    let half = (b - a) * S::lit(0.5);
    let center = (a + b) * S::lit(0.5);
    let fc = f(center);
    let mut kronrod = fc * S::lit(WGK[7]);
    let mut gauss = fc * S::lit(WG[3]);
    for j in 0..7 {
        let dx = half * S::lit(XGK[j]);
        let sum = f(center - dx) + f(center + dx);
        kronrod += sum * S::lit(WGK[j]);
        if j % 2 == 1 {
            gauss += sum * S::lit(WG[j / 2]);
        }
    }
    let value = kronrod * half;
    let error = cabs((kronrod - gauss) * half);
    (value, error)
}

/// Adaptive Gauss-Kronrod (7/15) integration of a complex function on `[a, b]`.
pub fn integrate_1d<S, F>(f: F, a: S, b: S, tol: Tolerance<S>) -> IntegrationResult<S>
where
    S: Real,
    F: Fn(S) -> Complex<S>,
{
    let (value, error) = kronrod15(&f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value,
        error,
        seq: 0,
    });
    let mut total = value;
    let mut total_err = error;
    let mut seq = 1;
    // Bisection stops making sense once segments reach rounding level.
    let min_width = (b - a) * S::epsilon() * S::lit(64.0);

    while total_err > tol.target(cabs(total)) && evaluations + 30 <= tol.max_evaluations {
        let worst = heap.pop().expect("heap is never empty");
        let mid = (worst.a + worst.b) * S::lit(0.5);
        if worst.b - worst.a <= min_width {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(&f, worst.a, mid);
        let (v2, e2) = kronrod15(&f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            seq,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            seq: seq + 1,
        });
        seq += 2;
    }

    // Re-sum to shed the drift of incremental updates; order by position for determinism.
    let mut segments = heap.into_vec();
    segments.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap_or(Ordering::Equal));
    let mut value = c_zero();
    let mut error = S::zero();
    for s in &segments {
        value += s.value;
        error += s.error;
    }
    IntegrationResult {
        value,
        error_estimate: error,
        evaluations,
        converged: error <= tol.target(cabs(value)),
    }
}
