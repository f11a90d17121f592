//! One-dimensional difference stencils shared by the trace extraction and the
//! diagnostics, plus the quadrature that is exactly compatible with them.
//!
//! Two derivative families are used on a column of `n + 1` nodes:
//!
//! * `deriv_column`: centered second order in the interior, one-sided fourth
//!   order at the two boundary nodes. This is the reconstruction family for
//!   nodal fields.
//! * `deriv_column_order4`: fourth order everywhere (centered inside, skewed
//!   and one-sided five-point stencils near the ends). Used for the inflow
//!   trace, where the whole fixed-point coupling flows through one derivative.
//!
//! `compatible_weights` returns quadrature weights `w` built so that
//! `sum_j w_j (D f)_j = f_n - f_0` holds exactly for every `f` when `D` is the
//! reconstruction family. Integrating a derivative with these weights
//! telescopes to the boundary values with no discretization error at all,
//! which is what makes the per-section mass-flux check exact on any grid.

/// One-sided fourth-order five-point stencil at the left end, `h = 1`.
const FWD4: [f64; 5] = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
/// Skewed fourth-order stencil one node in from the left end, `h = 1`.
const SKEW4: [f64; 5] = [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0];
/// Centered fourth-order stencil, `h = 1`.
const CENT4: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

/// Derivative of nodal values along a column: centered second order in the
/// interior, one-sided fourth order at the boundary nodes.
pub fn deriv_column(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len() - 1;
    assert!(n >= 4, "need at least 5 nodes");
    let mut d = vec![0.0; n + 1];
    d[0] = FWD4.iter().zip(&f[0..5]).map(|(c, v)| c * v).sum::<f64>() / h;
    for j in 1..n {
        d[j] = (f[j + 1] - f[j - 1]) / (2.0 * h);
    }
    d[n] = -FWD4
        .iter()
        .zip(f[n - 4..=n].iter().rev())
        .map(|(c, v)| c * v)
        .sum::<f64>()
        / h;
    d
}

/// Derivative of nodal values along a column, fourth order at every node.
pub fn deriv_column_order4(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len() - 1;
    assert!(n >= 4, "need at least 5 nodes");
    let mut d = vec![0.0; n + 1];
    let dot = |c: &[f64; 5], w: &[f64]| -> f64 { c.iter().zip(w).map(|(a, b)| a * b).sum() };
    d[0] = dot(&FWD4, &f[0..5]) / h;
    d[1] = dot(&SKEW4, &f[0..5]) / h;
    for j in 2..n - 1 {
        d[j] = dot(&CENT4, &f[j - 2..=j + 2]) / h;
    }
    let rev = |s: &[f64]| -> Vec<f64> { s.iter().rev().cloned().collect() };
    d[n - 1] = -dot(&SKEW4, &rev(&f[n - 4..=n])) / h;
    d[n] = -dot(&FWD4, &rev(&f[n - 4..=n])) / h;
    d
}

/// Quadrature weights (including the `h` factor) exactly compatible with
/// [`deriv_column`]: `sum_j w_j (D f)_j = f_n - f_0` for every `f`.
///
/// Requires at least 11 nodes so the two boundary blocks do not interact.
pub fn compatible_weights(num_nodes: usize, h: f64) -> Vec<f64> {
    let n = num_nodes - 1;
    assert!(n >= 10, "compatible weights need at least 11 nodes");
    let mut w = vec![h; num_nodes];
    let edge = [3.0 / 32.0, 103.0 / 64.0, 0.75, 67.0 / 64.0, 1.0];
    for (k, &v) in edge.iter().enumerate() {
        w[k] = v * h;
        w[n - k] = v * h;
    }
    w
}

/// Trapezoid weights including the `h` factor.
pub fn trapezoid_weights(num_nodes: usize, h: f64) -> Vec<f64> {
    let n = num_nodes - 1;
    let mut w = vec![h; num_nodes];
    w[0] = 0.5 * h;
    w[n] = 0.5 * h;
    w
}
