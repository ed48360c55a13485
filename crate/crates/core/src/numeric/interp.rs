//! Four-point Lagrange interpolation on uniform grids, used to sample
//! gridded fundamental-form fields at Runge-Kutta midpoints.

/// Interpolate `values` (uniform spacing, node j at coordinate j) at the
/// fractional index `q`. Cubic in the interior, clamped stencil at the
/// edges; exact at the nodes.
pub fn cubic_at(values: &[f64], q: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    if n < 4 {
        // linear fallback for degenerate rows
        let j = (q.floor() as isize).clamp(0, n as isize - 2) as usize;
        let s = q - j as f64;
        return values[j] * (1.0 - s) + values[j + 1] * s;
    }
    let j = (q.floor() as isize).clamp(1, n as isize - 3) as usize;
    let s = q - j as f64;
    let (a, b, c, d) = (values[j - 1], values[j], values[j + 1], values[j + 2]);
    // Lagrange basis on stencil offsets {-1, 0, 1, 2}
    let wa = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let wb = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    let wc = -(s + 1.0) * s * (s - 2.0) / 2.0;
    let wd = (s + 1.0) * s * (s - 1.0) / 6.0;
    wa * a + wb * b + wc * c + wd * d
}
