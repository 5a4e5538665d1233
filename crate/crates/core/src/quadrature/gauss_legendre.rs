use crate::scalar::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre<S: Real>(n: usize) -> (Vec<S>, Vec<S>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (
        nodes.into_iter().map(S::lit).collect(),
        weights.into_iter().map(S::lit).collect(),
    )
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Composite Gauss-Legendre rule: `order` nodes on each panel between consecutive breakpoints.
#[derive(Debug, Clone)]
pub struct CompositeRule<S> {
    pub nodes: Vec<S>,
    pub weights: Vec<S>,
}

impl<S: Real> CompositeRule<S> {
    pub fn new(breakpoints: &[S], order: usize) -> Self {
        let (x, w) = gauss_legendre::<S>(order);
        let mut nodes = Vec::with_capacity(order * breakpoints.len().saturating_sub(1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in breakpoints.windows(2) {
            let half = (pair[1] - pair[0]) * S::lit(0.5);
            let mid = (pair[1] + pair[0]) * S::lit(0.5);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + half * *xi);
                weights.push(half * *wi);
            }
        }
        Self { nodes, weights }
    }

    /// `panels` equal panels on `[a, b]`.
    pub fn uniform(a: S, b: S, panels: usize, order: usize) -> Self {
        let h = (b - a) / S::from_usize_lossy(panels);
        let bps: Vec<S> = (0..=panels).map(|i| a + h * S::from_usize_lossy(i)).collect();
        Self::new(&bps, order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(S) -> S>(&self, f: F) -> S {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(S::zero(), |acc, (x, w)| acc + *w * f(*x))
    }
}
