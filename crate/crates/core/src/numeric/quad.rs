//! Quadrature helpers: adaptive Simpson for smooth time integrands and a
//! fixed Runge-Kutta sweep for cumulative integrals recorded on a grid.

/// Adaptive Simpson on [a, b] with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Cumulative integrals of several integrands at the requested output
/// times (strictly increasing, first entry = lower limit). Classical RK4
/// with `substeps` sub-intervals between consecutive outputs.
pub fn cumulative_rk4(
    integrands: &[&dyn Fn(f64) -> f64],
    times: &[f64],
    substeps: usize,
) -> Vec<Vec<f64>> {
    let k = integrands.len();
    let mut acc = vec![0.0f64; k];
    let mut out = vec![acc.clone()];
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let h = (t1 - t0) / substeps as f64;
        for j in 0..substeps {
            let a = t0 + j as f64 * h;
            for (i, f) in integrands.iter().enumerate() {
                let k1 = f(a);
                let k2 = f(a + 0.5 * h);
                let k4 = f(a + h);
                // k2 == k3 for a pure quadrature problem
                acc[i] += h / 6.0 * (k1 + 4.0 * k2 + k4);
            }
        }
        out.push(acc.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|t: f64| t.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert_relative_eq!(v, 2.0, max_relative = 1e-10);
        let v = adaptive_simpson(&|t: f64| (-t).exp(), 0.0, 3.0, 1e-12);
        assert_relative_eq!(v, 1.0 - (-3.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn cumulative_matches_closed_form() {
        let times: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let f: &dyn Fn(f64) -> f64 = &|t: f64| t * t;
        let vals = cumulative_rk4(&[f], &times, 16);
        for (i, t) in times.iter().enumerate() {
            assert_relative_eq!(vals[i][0], t * t * t / 3.0, epsilon = 1e-12);
        }
    }
}
