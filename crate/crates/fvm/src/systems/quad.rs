//! Gauss-Legendre quadrature nodes and weights.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre polynomial with the usual
/// Chebyshev-based starting guesses. Nodes are in ascending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for k in 0..m {
        // Root k (counted from the upper end) of P_n.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-15 {
                let (p2, d2) = legendre_with_derivative(n, x);
                x -= p2 / d2;
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - k] = x;
        weights[n - 1 - k] = w;
        nodes[k] = -x;
        weights[k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// The `n`-point rule mapped to [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|&v| 0.5 * (v + 1.0)).collect(),
        w.iter().map(|&v| 0.5 * v).collect(),
    )
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`, via the
/// Bonnet recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
