//! Metric/curvature profiles b(t), K(t) in geodesic coordinates
//! g = dt^2 + b(t)^2 dx^2, normalized so b(0) = 1 and b'(0) = 0, with
//! K < 0 everywhere and the Jacobi relation b'' = -K b tying them together.
//!
//! Families:
//! * `helicoid(c)` — b = sqrt(c^2 + t^2)/c, K = -c^2/(c^2 + t^2)^2, closed form;
//! * `hong(coeff, delta, t_max)` — |K| = coeff/(1 + |t|)^(2+delta) globally,
//!   b integrated from the Jacobi relation by an adaptive 4/5 pair;
//! * `tabulated` — (t, b) samples under monotone cubic interpolation, K
//!   derived from the interpolant (or supplied explicitly);
//! * `frozen(b, k)` — constant coefficients with zero log-derivatives, a
//!   solver fixture that deliberately does not satisfy the Jacobi relation.

use std::sync::Arc;

use serde::Serialize;

use crate::error::Error;
use crate::numeric::ode::{integrate_linear_second_order, OdeTable};
use crate::numeric::pchip::Pchip;
use crate::Result;

/// Relative tolerance of the curvature-decay family's ODE integration.
pub const HONG_ODE_RTOL: f64 = 1e-10;

/// Value of b(t), its derivatives, and the curvature bundle used by the
/// balance-law source at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSample {
    pub b: f64,
    pub db_dt: f64,
    /// d/dt ln b
    pub dlog_b: f64,
    pub k: f64,
    /// d/dt ln |K|
    pub dlog_k: f64,
}

/// Family tag carried for reporting and scenario echo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricFamily {
    Helicoid,
    Hong,
    Tabulated,
    Frozen,
}

#[derive(Debug, Clone)]
enum Backend {
    Helicoid {
        c: f64,
    },
    Hong {
        coeff: f64,
        delta: f64,
        /// dense solution of b'' = |K| b on [0, t_max]; negative t by parity
        half: Arc<OdeTable>,
    },
    Tabulated {
        b: Arc<Pchip>,
        /// explicit curvature table; when absent K = -b''/b from the interpolant
        k: Option<Arc<Pchip>>,
    },
    Frozen {
        b: f64,
        k: f64,
    },
}

/// An immutable metric/curvature profile on a time interval.
#[derive(Debug, Clone)]
pub struct MetricProfile {
    backend: Backend,
    domain: (f64, f64),
}

/// Construct the helicoid-family profile with parameter c > 0.
pub fn helicoid_metric(c: f64) -> Result<MetricProfile> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Parameter(format!("helicoid parameter c must be positive, got {c}")));
    }
    Ok(MetricProfile {
        backend: Backend::Helicoid { c },
        domain: (f64::NEG_INFINITY, f64::INFINITY),
    })
}

/// Construct the curvature-decay profile |K| = coeff/(1+|t|)^(2+delta) on
/// [-t_max, t_max], integrating b'' = -K b with b(0) = 1, b'(0) = 0.
pub fn hong_metric(coeff: f64, delta: f64, t_max: f64) -> Result<MetricProfile> {
    if !(coeff > 0.0) || !coeff.is_finite() {
        return Err(Error::Parameter(format!("curvature coefficient must be positive, got {coeff}")));
    }
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::Parameter(format!("decay exponent delta must lie in (0, 2), got {delta}")));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::Parameter(format!("t_max must be positive, got {t_max}")));
    }
    let absk = move |t: f64| coeff / (1.0 + t.abs()).powf(2.0 + delta);
    // step cap keeps the dense interpolant's second derivative accurate to
    // ~rtol*10 so Jacobi-residual checks see the integration error, not the
    // interpolation error
    let half = integrate_linear_second_order(
        absk,
        0.0,
        t_max,
        1.0,
        0.0,
        HONG_ODE_RTOL,
        1e-12,
        |t| 0.006 * (1.0 + t),
    )?;
    Ok(MetricProfile {
        backend: Backend::Hong { coeff, delta, half: Arc::new(half) },
        domain: (-t_max, t_max),
    })
}

/// Construct a profile from (t, b) samples; K is taken from the second
/// derivative of the monotone cubic interpolant via the Jacobi relation.
pub fn tabulated_metric(ts: Vec<f64>, bs: Vec<f64>) -> Result<MetricProfile> {
    build_tabulated(ts, bs, None)
}

/// Tabulated profile with an explicit curvature column.
pub fn tabulated_metric_with_curvature(
    ts: Vec<f64>,
    bs: Vec<f64>,
    ks: Vec<f64>,
) -> Result<MetricProfile> {
    if ks.len() != ts.len() {
        return Err(Error::Parameter("curvature column length mismatch".into()));
    }
    let k = Pchip::new(ts.clone(), ks)?;
    build_tabulated(ts, bs, Some(Arc::new(k)))
}

fn build_tabulated(ts: Vec<f64>, bs: Vec<f64>, k: Option<Arc<Pchip>>) -> Result<MetricProfile> {
    if bs.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::Parameter("tabulated b must be positive everywhere".into()));
    }
    let interp = Pchip::new(ts, bs)?;
    let (lo, hi) = (interp.t_start(), interp.t_end());
    if lo > 0.0 || hi < 0.0 {
        return Err(Error::Parameter("tabulated domain must contain t = 0".into()));
    }
    let (b0, db0, _, _) = interp.eval_all(0.0);
    if (b0 - 1.0).abs() > 1e-8 {
        return Err(Error::Parameter(format!("normalization requires b(0) = 1, table gives {b0}")));
    }
    if db0.abs() > 1e-6 {
        return Err(Error::Parameter(format!("normalization requires b'(0) = 0, table gives {db0}")));
    }
    Ok(MetricProfile {
        backend: Backend::Tabulated { b: Arc::new(interp), k },
        domain: (lo, hi),
    })
}

/// Constant-coefficient fixture: b and K frozen, all log-derivatives zero.
/// Useful for homogeneous solver tests; fails Jacobi validation by design.
pub fn frozen_metric(b: f64, k: f64) -> Result<MetricProfile> {
    if !(b > 0.0) {
        return Err(Error::Parameter(format!("frozen b must be positive, got {b}")));
    }
    if !(k < 0.0) {
        return Err(Error::Parameter(format!("frozen K must be negative, got {k}")));
    }
    Ok(MetricProfile {
        backend: Backend::Frozen { b, k },
        domain: (f64::NEG_INFINITY, f64::INFINITY),
    })
}

impl MetricProfile {
    pub fn family(&self) -> MetricFamily {
        match self.backend {
            Backend::Helicoid { .. } => MetricFamily::Helicoid,
            Backend::Hong { .. } => MetricFamily::Hong,
            Backend::Tabulated { .. } => MetricFamily::Tabulated,
            Backend::Frozen { .. } => MetricFamily::Frozen,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.domain.0 && t <= self.domain.1
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !t.is_finite() || !self.contains(t) {
            return Err(Error::Domain { t, lo: self.domain.0, hi: self.domain.1 });
        }
        Ok(())
    }

    /// b(t), b'(t), d/dt ln b, K(t), d/dt ln |K| as one consistent tuple.
    pub fn sample(&self, t: f64) -> Result<MetricSample> {
        self.check_domain(t)?;
        Ok(match &self.backend {
            Backend::Helicoid { c } => {
                let c2t2 = c * c + t * t;
                MetricSample {
                    b: c2t2.sqrt() / c,
                    db_dt: t / (c * c2t2.sqrt()),
                    dlog_b: t / c2t2,
                    k: -(c * c) / (c2t2 * c2t2),
                    dlog_k: -4.0 * t / c2t2,
                }
            }
            Backend::Hong { coeff, delta, half } => {
                let ta = t.abs();
                let b = half.value(ta);
                let db_abs = half.derivative(ta);
                let db = t.signum() * db_abs;
                let db = if t == 0.0 { 0.0 } else { db };
                MetricSample {
                    b,
                    db_dt: db,
                    dlog_b: db / b,
                    k: -coeff / (1.0 + ta).powf(2.0 + delta),
                    dlog_k: if t == 0.0 { 0.0 } else { -(2.0 + delta) * t.signum() / (1.0 + ta) },
                }
            }
            Backend::Tabulated { b, k } => {
                let (bv, db, d2b, d3b) = b.eval_all(t);
                let (kv, dlog_k) = match k {
                    Some(kt) => {
                        let (kv, dk, _, _) = kt.eval_all(t);
                        (kv, dk / kv)
                    }
                    // Jacobi relation: K = -b''/b
                    None => (-d2b / bv, d3b / d2b - db / bv),
                };
                MetricSample { b: bv, db_dt: db, dlog_b: db / bv, k: kv, dlog_k }
            }
            Backend::Frozen { b, k } => MetricSample {
                b: *b,
                db_dt: 0.0,
                dlog_b: 0.0,
                k: *k,
                dlog_k: 0.0,
            },
        })
    }

    pub fn b(&self, t: f64) -> Result<f64> {
        Ok(self.sample(t)?.b)
    }

    pub fn curvature(&self, t: f64) -> Result<f64> {
        Ok(self.sample(t)?.k)
    }

    /// Second derivative b''(t) used by the Jacobi-residual check. For the
    /// integrated family this is the dense interpolant's second derivative,
    /// so the residual reflects real integration/interpolation error.
    pub fn d2b(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match &self.backend {
            Backend::Helicoid { c } => c / (c * c + t * t).powf(1.5),
            Backend::Hong { half, .. } => half.second_derivative(t.abs()),
            Backend::Tabulated { b, .. } => b.eval_all(t).2,
            Backend::Frozen { .. } => 0.0,
        })
    }
}

/// Bundle b, b', d/dt ln b, K, d/dt ln |K| at a time inside the domain.
pub fn metric_derivatives(g: &MetricProfile, t: f64) -> Result<MetricSample> {
    g.sample(t)
}

/// Outcome of sampling-based profile validation.
#[derive(Debug, Clone, Serialize)]
pub struct MetricValidation {
    pub samples: usize,
    pub max_jacobi_residual: f64,
    /// residuals are measured relative to 1 + |K b|
    pub jacobi_tol: f64,
    pub positivity_ok: bool,
    pub negativity_ok: bool,
    pub jacobi_ok: bool,
    /// offending sample times: (t, what went wrong)
    pub violations: Vec<(f64, String)>,
}

impl MetricValidation {
    pub fn ok(&self) -> bool {
        self.positivity_ok && self.negativity_ok && self.jacobi_ok
    }
}

/// Check b > 0, K < 0 and the Jacobi residual |b'' + K b| <= tol (1 + |K b|)
/// at every sample time.
pub fn validate_metric(g: &MetricProfile, ts: &[f64], jacobi_tol: f64) -> Result<MetricValidation> {
    let mut report = MetricValidation {
        samples: ts.len(),
        max_jacobi_residual: 0.0,
        jacobi_tol,
        positivity_ok: true,
        negativity_ok: true,
        jacobi_ok: true,
        violations: Vec::new(),
    };
    for &t in ts {
        let s = g.sample(t)?;
        if !(s.b > 0.0) {
            report.positivity_ok = false;
            report.violations.push((t, format!("b = {} not positive", s.b)));
        }
        if !(s.k < 0.0) {
            report.negativity_ok = false;
            report.violations.push((t, format!("K = {} not negative", s.k)));
        }
        let residual = (g.d2b(t)? + s.k * s.b).abs() / (1.0 + (s.k * s.b).abs());
        report.max_jacobi_residual = report.max_jacobi_residual.max(residual);
        if residual > jacobi_tol {
            report.jacobi_ok = false;
            report.violations.push((t, format!("Jacobi residual {residual:.3e}")));
        }
    }
    Ok(report)
}

/// Uniform sample grid helper for validation sweeps.
pub fn sample_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
