//! Trapezoid quadrature on radial grids.

/// Trapezoid rule for samples `f` at strictly increasing `nodes`.
pub fn trapz(nodes: &[f64], f: &[f64]) -> f64 {
    assert_eq!(nodes.len(), f.len());
    let mut acc = 0.0;
    for i in 1..nodes.len() {
        acc += 0.5 * (nodes[i] - nodes[i - 1]) * (f[i] + f[i - 1]);
    }
    acc
}

/// Cumulative trapezoid from the left endpoint; `out[i] = ∫_{r_0}^{r_i} f`.
pub fn cumtrapz(nodes: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; nodes.len()];
    for i in 1..nodes.len() {
        out[i] = out[i - 1] + 0.5 * (nodes[i] - nodes[i - 1]) * (f[i] + f[i - 1]);
    }
    out
}

/// Cumulative trapezoid from the right endpoint; `out[i] = ∫_{r_i}^{r_max} f`.
pub fn cumtrapz_right(nodes: &[f64], f: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut out = vec![0.0; n];
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] + 0.5 * (nodes[i + 1] - nodes[i]) * (f[i + 1] + f[i]);
    }
    out
}

/// 2D mass of a radial density: `2π ∫ f(r) r dr`.
pub fn radial_mass(nodes: &[f64], f: &[f64]) -> f64 {
    let weighted: Vec<f64> = nodes.iter().zip(f).map(|(r, v)| r * v).collect();
    2.0 * std::f64::consts::PI * trapz(nodes, &weighted)
}

/// Fourth-order cumulative integral on a uniform grid (Gregory-type rule:
/// each interval integrates the cubic through its four nearest nodes).
pub fn cumint4(step: f64, f: &[f64]) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4, "cumint4 needs at least 4 samples");
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let inc = if i == 0 {
            step * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
        } else if i == n - 2 {
            step * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]) / 24.0
        } else {
            step * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]) / 24.0
        };
        acc += inc;
        out[i + 1] = acc;
    }
    out
}
