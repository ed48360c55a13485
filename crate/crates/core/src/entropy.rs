//! Entropy pair of the scaled Gauss-Codazzi system and the relative
//! quantities driving the stability estimates.
//!
//! The pair is
//!
//!   eta(ell, m) = -(m^2 + 1)/ell,      q(ell, m; b) = (m^3 - m)/(b ell^2),
//!
//! convex for ell < 0 with Hessian determinant 4/ell^4. Relative
//! quantities follow the usual pattern a(U|V) = a(U) - a(V) - Da(V)(U - V);
//! both the definitional forms and the evaluated closed forms are exposed
//! so each can check the other.

use serde::Serialize;

use crate::error::Error;
use crate::gauss_codazzi::{eigenstructure, flux, ScaledState};
use crate::Result;

fn require_hyperbolic(s: ScaledState) -> Result<()> {
    if !(s.ell < 0.0) {
        return Err(Error::Hyperbolicity { ell: s.ell });
    }
    Ok(())
}

/// eta(ell, m) = -(m^2 + 1)/ell; positive on ell < 0.
pub fn entropy(s: ScaledState) -> Result<f64> {
    require_hyperbolic(s)?;
    Ok(-(s.m * s.m + 1.0) / s.ell)
}

/// q(ell, m; b) = (m^3 - m)/(b ell^2).
pub fn entropy_flux(s: ScaledState, b: f64) -> Result<f64> {
    require_hyperbolic(s)?;
    Ok((s.m * s.m * s.m - s.m) / (b * s.ell * s.ell))
}

/// grad eta = ((m^2+1)/ell^2, -2m/ell).
pub fn entropy_gradient(s: ScaledState) -> Result<[f64; 2]> {
    require_hyperbolic(s)?;
    Ok([(s.m * s.m + 1.0) / (s.ell * s.ell), -2.0 * s.m / s.ell])
}

/// Entropy value, gradient, Hessian, Hessian eigenvalues and determinant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyEval {
    pub eta: f64,
    pub grad: [f64; 2],
    /// row-major symmetric Hessian
    pub hessian: [[f64; 2]; 2],
    /// mu1 <= mu2, from the closed form, both positive on ell < 0
    pub mu: (f64, f64),
    pub det: f64,
}

/// Fill every [`EntropyEval`] field; the Hessian eigenvalues come from the
/// closed form -(1/ell^3)(m^2+1+ell^2) -+ (1/ell^3) sqrt((m^2+1+ell^2)^2 - 4 ell^2),
/// not a generic eigensolver.
pub fn entropy_derivatives(s: ScaledState) -> Result<EntropyEval> {
    require_hyperbolic(s)?;
    let (ell, m) = (s.ell, s.m);
    let eta = -(m * m + 1.0) / ell;
    let grad = [(m * m + 1.0) / (ell * ell), -2.0 * m / ell];
    let pref = -2.0 / ell;
    let hessian = [
        [pref * (m * m + 1.0) / (ell * ell), pref * (-m / ell)],
        [pref * (-m / ell), pref],
    ];
    let trace_half = -(m * m + 1.0 + ell * ell) / (ell * ell * ell);
    let root = ((m * m + 1.0 + ell * ell).powi(2) - 4.0 * ell * ell).max(0.0).sqrt();
    // 1/ell^3 < 0 for ell < 0, so "+" is the smaller eigenvalue
    let mu1 = trace_half + root / (ell * ell * ell);
    let mu2 = trace_half - root / (ell * ell * ell);
    let det = 4.0 / ell.powi(4);
    Ok(EntropyEval { eta, grad, hessian, mu: (mu1, mu2), det })
}

/// Relative entropy eta(U|V) = eta(U) - eta(V) - grad eta(V) . (U - V),
/// evaluated from the definition.
pub fn relative_entropy(s: ScaledState, sb: ScaledState) -> Result<f64> {
    let eta = entropy(s)?;
    let eta_b = entropy(sb)?;
    let grad_b = entropy_gradient(sb)?;
    Ok(eta - eta_b - grad_b[0] * (s.ell - sb.ell) - grad_b[1] * (s.m - sb.m))
}

/// Evaluated closed form of the relative entropy:
/// -(1/ellbar) { (m - mbar)^2 + (1 + mbar^2)/(ell ellbar) (ell - ellbar)^2
///               + (1/ell)(m + mbar)(mbar - m)(ell - ellbar) }.
pub fn relative_entropy_expanded(s: ScaledState, sb: ScaledState) -> Result<f64> {
    require_hyperbolic(s)?;
    require_hyperbolic(sb)?;
    let dm = s.m - sb.m;
    let dl = s.ell - sb.ell;
    Ok(-(1.0 / sb.ell)
        * (dm * dm
            + (1.0 + sb.m * sb.m) / (s.ell * sb.ell) * dl * dl
            + (s.m + sb.m) * (sb.m - s.m) * dl / s.ell))
}

/// Relative flux f(U;b || V;bbar), evaluated closed form:
/// (1/bbar - 1/b) (m, (m^2-1)/ell) + (1/bbar) (0, eta(U|V) + 2 (ell-ellbar)^2/(ell ellbar^2)).
pub fn relative_flux(s: ScaledState, b: f64, sb: ScaledState, bb: f64) -> Result<[f64; 2]> {
    require_hyperbolic(s)?;
    require_hyperbolic(sb)?;
    let rel_eta = relative_entropy(s, sb)?;
    let dinv = 1.0 / bb - 1.0 / b;
    let dl = s.ell - sb.ell;
    Ok([
        dinv * s.m,
        dinv * (s.m * s.m - 1.0) / s.ell
            + (rel_eta + 2.0 * dl * dl / (s.ell * sb.ell * sb.ell)) / bb,
    ])
}

/// Relative flux straight from the definition
/// f(U;b) - f(V;bbar) - Df(V;bbar)(U - V).
pub fn relative_flux_from_definition(
    s: ScaledState,
    b: f64,
    sb: ScaledState,
    bb: f64,
) -> Result<[f64; 2]> {
    let f = flux(s, b)?;
    let fb = flux(sb, bb)?;
    let jac = eigenstructure(sb, bb)?.jacobian;
    let du = [s.ell - sb.ell, s.m - sb.m];
    Ok([
        f[0] - fb[0] - jac[0][0] * du[0] - jac[0][1] * du[1],
        f[1] - fb[1] - jac[1][0] * du[0] - jac[1][1] * du[1],
    ])
}

/// Relative entropy gradient, evaluated closed form:
/// -(1/ellbar) ( -(ell + ellbar)(1 + mbar^2)/(ell^2 ellbar^2) (ell - ellbar)^2 + eta(U|V),
///               -(2/ell)(m - mbar)(ell - ellbar) + (2 mbar/(ell ellbar))(ell - ellbar)^2 ).
pub fn relative_gradient(s: ScaledState, sb: ScaledState) -> Result<[f64; 2]> {
    require_hyperbolic(s)?;
    require_hyperbolic(sb)?;
    let rel_eta = relative_entropy(s, sb)?;
    let dl = s.ell - sb.ell;
    let dm = s.m - sb.m;
    let first = -(s.ell + sb.ell) * (1.0 + sb.m * sb.m) / (s.ell * s.ell * sb.ell * sb.ell)
        * dl
        * dl
        + rel_eta;
    let second = -2.0 / s.ell * dm * dl + 2.0 * sb.m / (s.ell * sb.ell) * dl * dl;
    Ok([-first / sb.ell, -second / sb.ell])
}

/// Relative entropy gradient straight from the definition
/// grad eta(U) - grad eta(V) - Hess eta(V)(U - V).
pub fn relative_gradient_from_definition(s: ScaledState, sb: ScaledState) -> Result<[f64; 2]> {
    let g = entropy_gradient(s)?;
    let gb = entropy_gradient(sb)?;
    let hb = entropy_derivatives(sb)?.hessian;
    let du = [s.ell - sb.ell, s.m - sb.m];
    Ok([
        g[0] - gb[0] - hb[0][0] * du[0] - hb[0][1] * du[1],
        g[1] - gb[1] - hb[1][0] * du[0] - hb[1][1] * du[1],
    ])
}

/// Relative entropy flux
/// q(U;b) - q(V;bbar) - grad eta(V) . (f(U;b) - f(V;bbar)), from the definition.
pub fn relative_entropy_flux(s: ScaledState, b: f64, sb: ScaledState, bb: f64) -> Result<f64> {
    let q = entropy_flux(s, b)?;
    let qb = entropy_flux(sb, bb)?;
    let gb = entropy_gradient(sb)?;
    let f = flux(s, b)?;
    let fb = flux(sb, bb)?;
    Ok(q - qb - gb[0] * (f[0] - fb[0]) - gb[1] * (f[1] - fb[1]))
}

/// Max residual of the pair compatibility grad q = grad eta . Df over the
/// given states, with all gradients analytic. Both sides equal
/// -(1/b) (2m(m^2-1)/ell^3, (1-3m^2)/ell^2) for the true pair.
pub fn check_entropy_compatibility(states: &[ScaledState], b: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for &s in states {
        let grad_q = [
            -2.0 * (s.m * s.m * s.m - s.m) / (b * s.ell * s.ell * s.ell),
            (3.0 * s.m * s.m - 1.0) / (b * s.ell * s.ell),
        ];
        let ge = entropy_gradient(s)?;
        let jac = eigenstructure(s, b)?.jacobian;
        let lhs = [
            ge[0] * jac[0][0] + ge[1] * jac[1][0],
            ge[0] * jac[0][1] + ge[1] * jac[1][1],
        ];
        worst = worst.max((grad_q[0] - lhs[0]).abs()).max((grad_q[1] - lhs[1]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_codazzi::InvariantBox;
    use crate::stability::{sample_state, sampling_rng};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(ScaledState::new(-1.0, 0.0)).unwrap(), 1.0);
        assert_eq!(entropy(ScaledState::new(-2.0, 1.0)).unwrap(), 1.0);
        assert_eq!(entropy(ScaledState::new(-1.0, 2.0)).unwrap(), 5.0);
        assert!(entropy(ScaledState::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn entropy_flux_values() {
        assert_eq!(entropy_flux(ScaledState::new(-1.0, 0.0), 1.0).unwrap(), 0.0);
        assert_eq!(entropy_flux(ScaledState::new(-2.0, 1.0), 1.0).unwrap(), 0.0);
        assert_eq!(entropy_flux(ScaledState::new(-1.0, 2.0), 1.0).unwrap(), 6.0);
    }

    #[test]
    fn entropy_derivatives_closed_forms() {
        let e = entropy_derivatives(ScaledState::new(-1.0, 0.0)).unwrap();
        assert_eq!(e.grad, [1.0, 0.0]);
        assert_eq!(e.hessian, [[2.0, 0.0], [0.0, 2.0]]);
        assert_eq!(e.mu, (2.0, 2.0));
        assert_eq!(e.det, 4.0);

        let e = entropy_derivatives(ScaledState::new(-2.0, 0.0)).unwrap();
        assert_eq!(e.hessian, [[0.25, 0.0], [0.0, 1.0]]);
        assert_relative_eq!(e.mu.0, 0.25, max_relative = 1e-14);
        assert_relative_eq!(e.mu.1, 1.0, max_relative = 1e-14);
        assert_eq!(e.det, 0.25);
    }

    #[test]
    fn hessian_consistency_on_samples() {
        let mut rng = sampling_rng(3);
        let b0 = InvariantBox::default();
        for _ in 0..200 {
            let s = sample_state(&mut rng, &b0);
            let e = entropy_derivatives(s).unwrap();
            // det = mu1 mu2 and det = 4/ell^4
            assert_relative_eq!(e.mu.0 * e.mu.1, e.det, max_relative = 1e-12);
            assert_relative_eq!(e.det, 4.0 / s.ell.powi(4), max_relative = 1e-13);
            assert!(e.mu.0 > 0.0 && e.mu.1 >= e.mu.0);
            // closed-form eigenvalues solve the characteristic polynomial
            for mu in [e.mu.0, e.mu.1] {
                let char_poly = (e.hessian[0][0] - mu) * (e.hessian[1][1] - mu)
                    - e.hessian[0][1] * e.hessian[1][0];
                assert_abs_diff_eq!(char_poly, 0.0, epsilon = 1e-10 * mu.max(1.0));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = sampling_rng(5);
        let b0 = InvariantBox::default();
        let h = 1e-6;
        for _ in 0..100 {
            let s = sample_state(&mut rng, &b0);
            let g = entropy_gradient(s).unwrap();
            let fd0 = (entropy(ScaledState::new(s.ell + h, s.m)).unwrap()
                - entropy(ScaledState::new(s.ell - h, s.m)).unwrap())
                / (2.0 * h);
            let fd1 = (entropy(ScaledState::new(s.ell, s.m + h)).unwrap()
                - entropy(ScaledState::new(s.ell, s.m - h)).unwrap())
                / (2.0 * h);
            assert_abs_diff_eq!(g[0], fd0, epsilon = 1e-6 * g[0].abs().max(1.0));
            assert_abs_diff_eq!(g[1], fd1, epsilon = 1e-6 * g[1].abs().max(1.0));
        }
    }

    #[test]
    fn relative_entropy_examples() {
        let s = ScaledState::new(-1.0, 0.0);
        assert_eq!(relative_entropy(s, s).unwrap(), 0.0);
        let v = relative_entropy(ScaledState::new(-2.0, 0.0), ScaledState::new(-1.0, 0.0)).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-14);
        let v2 =
            relative_entropy_expanded(ScaledState::new(-2.0, 0.0), ScaledState::new(-1.0, 0.0))
                .unwrap();
        assert_relative_eq!(v2, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn convexity_on_grid() {
        // min Hessian eigenvalue positive on ell in [-10, -0.1], m in [-1, 1]
        let mut worst = f64::INFINITY;
        for i in 0..200 {
            for j in 0..200 {
                let ell = -10.0 + 9.9 * i as f64 / 199.0;
                let m = -1.0 + 2.0 * j as f64 / 199.0;
                let e = entropy_derivatives(ScaledState::new(ell, m)).unwrap();
                worst = worst.min(e.mu.0);
            }
        }
        assert!(worst > 0.0, "min mu1 = {worst}");
    }

    #[test]
    fn relative_flux_examples() {
        let s = ScaledState::new(-1.0, 0.0);
        assert_eq!(relative_flux(s, 1.0, s, 1.0).unwrap(), [0.0, 0.0]);

        let v = relative_flux(ScaledState::new(-2.0, 0.0), 1.0, ScaledState::new(-1.0, 0.0), 1.0)
            .unwrap();
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(v[1], -0.5, max_relative = 1e-14);

        let v = relative_flux(s, 2.0, s, 1.0).unwrap();
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(v[1], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn relative_gradient_examples() {
        let s = ScaledState::new(-1.0, 0.0);
        assert_eq!(relative_gradient(s, s).unwrap(), [0.0, 0.0]);
        let v =
            relative_gradient(ScaledState::new(-2.0, 0.0), ScaledState::new(-1.0, 0.0)).unwrap();
        assert_relative_eq!(v[0], 1.25, max_relative = 1e-14);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn relative_entropy_flux_examples() {
        let s = ScaledState::new(-1.0, 0.0);
        assert_eq!(relative_entropy_flux(s, 1.0, s, 1.0).unwrap(), 0.0);
        let v = relative_entropy_flux(
            ScaledState::new(-2.0, 0.0),
            1.0,
            ScaledState::new(-1.0, 0.0),
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
        let v = relative_entropy_flux(
            ScaledState::new(-1.0, 0.5),
            1.0,
            ScaledState::new(-1.0, 0.0),
            1.0,
        )
        .unwrap();
        assert_relative_eq!(v, 0.125, max_relative = 1e-14);
    }

    #[test]
    fn closed_forms_agree_with_definitions() {
        let mut rng = sampling_rng(17);
        let b0 = InvariantBox::default();
        for _ in 0..2000 {
            let s = sample_state(&mut rng, &b0);
            let sb = sample_state(&mut rng, &b0);
            let b = 0.5 + 2.0 * rand::Rng::gen::<f64>(&mut rng);
            let bb = 0.5 + 2.0 * rand::Rng::gen::<f64>(&mut rng);

            let a = relative_entropy(s, sb).unwrap();
            let c = relative_entropy_expanded(s, sb).unwrap();
            assert_abs_diff_eq!(a, c, epsilon = 1e-12 * a.abs().max(1.0));

            let fa = relative_flux(s, b, sb, bb).unwrap();
            let fc = relative_flux_from_definition(s, b, sb, bb).unwrap();
            assert_abs_diff_eq!(fa[0], fc[0], epsilon = 1e-12 * fa[0].abs().max(1.0));
            assert_abs_diff_eq!(fa[1], fc[1], epsilon = 1e-12 * fa[1].abs().max(1.0));

            let ga = relative_gradient(s, sb).unwrap();
            let gc = relative_gradient_from_definition(s, sb).unwrap();
            assert_abs_diff_eq!(ga[0], gc[0], epsilon = 1e-12 * ga[0].abs().max(1.0));
            assert_abs_diff_eq!(ga[1], gc[1], epsilon = 1e-12 * ga[1].abs().max(1.0));
        }
    }

    #[test]
    fn relative_entropy_positive_definite_on_boxes() {
        let mut rng = sampling_rng(19);
        let b0 = InvariantBox::default();
        for _ in 0..2000 {
            let s = sample_state(&mut rng, &b0);
            let sb = sample_state(&mut rng, &b0);
            let v = relative_entropy(s, sb).unwrap();
            if s == sb {
                assert_eq!(v, 0.0);
            } else {
                assert!(v > 0.0, "relative entropy not positive at {s:?} | {sb:?}: {v}");
            }
        }
    }

    #[test]
    fn relative_flux_is_quadratic_near_diagonal() {
        // with b = bbar the relative flux is O(|U - V|^2)
        let mut rng = sampling_rng(23);
        let b0 = InvariantBox::default();
        let mut ratio_max = 0.0f64;
        for _ in 0..2000 {
            let s = sample_state(&mut rng, &b0);
            let sb = sample_state(&mut rng, &b0);
            let d2 = (s.ell - sb.ell).powi(2) + (s.m - sb.m).powi(2);
            if d2 < 1e-20 {
                continue;
            }
            let f = relative_flux(s, 1.3, sb, 1.3).unwrap();
            let norm = (f[0] * f[0] + f[1] * f[1]).sqrt();
            ratio_max = ratio_max.max(norm / d2);
        }
        assert!(ratio_max.is_finite() && ratio_max > 0.0);
        // the measured constant stays modest on the default boxes
        assert!(ratio_max < 1e4, "quadratic bound constant blew up: {ratio_max}");
    }

    #[test]
    fn compatibility_residual_is_tiny_and_detects_sign_flip() {
        let mut rng = sampling_rng(29);
        let b0 = InvariantBox::default();
        let states: Vec<ScaledState> = (0..100).map(|_| sample_state(&mut rng, &b0)).collect();
        for &b in &[1.0, 3.0] {
            let r = check_entropy_compatibility(&states, b).unwrap();
            assert!(r <= 1e-10, "compatibility residual {r} at b = {b}");
        }
        // negative control: flipping the flux sign breaks the pair at O(1)
        let mut worst = 0.0f64;
        for &s in &states {
            let grad_q = [
                -2.0 * (s.m * s.m * s.m - s.m) / (s.ell * s.ell * s.ell),
                (3.0 * s.m * s.m - 1.0) / (s.ell * s.ell),
            ];
            let ge = entropy_gradient(s).unwrap();
            let jac = eigenstructure(s, 1.0).unwrap().jacobian;
            let lhs = [
                -(ge[0] * jac[0][0] + ge[1] * jac[1][0]),
                -(ge[0] * jac[0][1] + ge[1] * jac[1][1]),
            ];
            worst = worst.max((grad_q[0] - lhs[0]).abs()).max((grad_q[1] - lhs[1]).abs());
        }
        assert!(worst > 0.1, "sign-flipped pair should fail by O(1), got {worst}");
    }
}
