//! Composite Simpson quadrature.
//!
//! Every deterministic integral in the crate (masses, moments, projections,
//! CDF tables) goes through these rules so that node conventions stay uniform.
//! The default 201-node rule matches the verification tolerances on smooth
//! kernels; callers integrating sharply peaked or highly oscillatory
//! integrands pass a denser (still odd) node count.

/// Default node count for verification-grade integrals.
pub const DEFAULT_NODES: usize = 201;

/// Composite Simpson rule on `[a, b]` with `nodes` equally spaced nodes.
///
/// `nodes` must be odd and at least 3; panics otherwise (caller bug, not a
/// data error).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, nodes: usize) -> f64 {
    assert!(nodes >= 3 && nodes % 2 == 1, "Simpson needs an odd node count >= 3");
    let n = nodes - 1;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        sum += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    sum * h / 3.0
}

/// Simpson rule over pre-tabulated samples on a uniform grid of spacing `h`.
///
/// `values.len()` must be odd and at least 3.
pub fn simpson_samples(values: &[f64], h: f64) -> f64 {
    assert!(
        values.len() >= 3 && values.len() % 2 == 1,
        "Simpson needs an odd sample count >= 3"
    );
    let n = values.len() - 1;
    let mut sum = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    sum * h / 3.0
}

/// Cumulative trapezoid integral of tabulated samples; `out[0] = 0`.
///
/// Used to build CDF tables for inverse-transform sampling.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * h;
        out.push(acc);
    }
    out
}

/// Uniform grid of `nodes` points spanning `[a, b]` inclusive.
pub fn grid(a: f64, b: f64, nodes: usize) -> Vec<f64> {
    assert!(nodes >= 2);
    let h = (b - a) / (nodes - 1) as f64;
    (0..nodes).map(|i| a + h * i as f64).collect()
}
