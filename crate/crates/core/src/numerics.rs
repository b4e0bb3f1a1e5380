//! Small deterministic numerical kernels shared across the crate.
//!
//! Everything here is sequential and order-fixed so that repeated runs of the
//! same problem produce bitwise-identical results.

/// Pairwise (cascade) summation.
///
/// Error grows like O(log n) in the term count rather than O(n) for a naive
/// running sum, which matters for the N² cell sums behind every quadrature.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    // Below this length a straight loop is both faster and accurate enough.
    const CUTOFF: usize = 64;
    if xs.len() <= CUTOFF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// log(Σ exp(xᵢ)) with the usual max shift, so huge exponents never
/// materialize. Returns -inf for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let mut s = 0.0;
    for &x in xs {
        s += (x - m).exp();
    }
    m + s.ln()
}

/// Least-squares slope and intercept of y against x.
///
/// Used for log-log decay rates and for extrapolating ball masses to zero
/// radius. Panics if fewer than two points are supplied.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert!(x.len() == y.len() && x.len() >= 2, "need at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
