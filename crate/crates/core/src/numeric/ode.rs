//! Adaptive Dormand-Prince 5(4) integration for the scalar second-order
//! problem b'' = a(t) b, with quintic Hermite dense output.
//!
//! The dense table stores (b, b', b'') at every accepted node, so the
//! interpolant matches value, slope and curvature at both ends of each
//! step. That keeps the interpolated second derivative accurate enough
//! for Jacobi-residual checks at the integration tolerance.

use crate::error::Error;
use crate::Result;

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

/// Dense output of one integration sweep over [t0, t1] (t increasing).
#[derive(Debug, Clone)]
pub struct OdeTable {
    ts: Vec<f64>,
    ys: Vec<f64>,
    dys: Vec<f64>,
    d2ys: Vec<f64>,
}

impl OdeTable {
    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    fn segment(&self, t: f64) -> usize {
        // partition_point returns the first node > t; segment is the one before it
        let idx = self.ts.partition_point(|&node| node <= t);
        idx.clamp(1, self.ts.len() - 1) - 1
    }

    fn hermite(&self, t: f64) -> (f64, f64, f64) {
        let i = self.segment(t);
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        quintic_hermite(
            s,
            h,
            [self.ys[i], self.dys[i], self.d2ys[i]],
            [self.ys[i + 1], self.dys[i + 1], self.d2ys[i + 1]],
        )
    }

    /// Interpolated value.
    pub fn value(&self, t: f64) -> f64 {
        self.hermite(t).0
    }

    /// Interpolated first derivative.
    pub fn derivative(&self, t: f64) -> f64 {
        self.hermite(t).1
    }

    /// Interpolated second derivative.
    pub fn second_derivative(&self, t: f64) -> f64 {
        self.hermite(t).2
    }
}

/// Evaluate the two-point quintic Hermite interpolant at s in [0, 1].
/// Returns (value, d/dt, d2/dt2) with node data [y, y', y''].
fn quintic_hermite(s: f64, h: f64, left: [f64; 3], right: [f64; 3]) -> (f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;

    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    let h3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 0.5 * s3 - s4 + 0.5 * s5;

    let d0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
    let d1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
    let d2 = s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4;
    let d3 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
    let d4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
    let d5 = 1.5 * s2 - 4.0 * s3 + 2.5 * s4;

    let e0 = -60.0 * s + 180.0 * s2 - 120.0 * s3;
    let e1 = -36.0 * s + 96.0 * s2 - 60.0 * s3;
    let e2 = 1.0 - 9.0 * s + 18.0 * s2 - 10.0 * s3;
    let e3 = 60.0 * s - 180.0 * s2 + 120.0 * s3;
    let e4 = -24.0 * s + 84.0 * s2 - 60.0 * s3;
    let e5 = 3.0 * s - 12.0 * s2 + 10.0 * s3;

    let [y0, p0, q0] = left;
    let [y1, p1, q1] = right;
    let hp0 = h * p0;
    let hp1 = h * p1;
    let hq0 = h * h * q0;
    let hq1 = h * h * q1;

    let value = y0 * h0 + hp0 * h1 + hq0 * h2 + y1 * h3 + hp1 * h4 + hq1 * h5;
    let deriv = (y0 * d0 + hp0 * d1 + hq0 * d2 + y1 * d3 + hp1 * d4 + hq1 * d5) / h;
    let second = (y0 * e0 + hp0 * e1 + hq0 * e2 + y1 * e3 + hp1 * e4 + hq1 * e5) / (h * h);
    (value, deriv, second)
}

/// Integrate b'' = a(t) b from (b0, db0) at t0 up to t1 > t0.
///
/// `max_step` limits the step as a function of the current time; pass
/// `|_| f64::INFINITY` to disable. Relative tolerance applies to both
/// components of the (b, b') system.
pub fn integrate_linear_second_order(
    a: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    b0: f64,
    db0: f64,
    rtol: f64,
    atol: f64,
    max_step: impl Fn(f64) -> f64,
) -> Result<OdeTable> {
    assert!(t1 > t0);
    let f = |t: f64, y: [f64; 2]| [y[1], a(t) * y[0]];

    let mut t = t0;
    let mut y = [b0, db0];
    let mut ts = vec![t0];
    let mut ys = vec![b0];
    let mut dys = vec![db0];
    let mut d2ys = vec![a(t0) * b0];

    let mut h = ((t1 - t0) * 1e-4).min(max_step(t0)).max(1e-12);
    let mut k1 = f(t, y);
    let max_steps = 50_000_000usize;
    let mut n_steps = 0usize;

    while t < t1 {
        n_steps += 1;
        if n_steps > max_steps {
            return Err(Error::Numeric("ODE step budget exhausted".into()));
        }
        h = h.min(t1 - t).min(max_step(t));
        if h <= f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::Numeric(format!("ODE step underflow at t = {t}")));
        }

        let (y_new, err, k_last) = dp5_step(&f, t, &y, h, &k1);
        if !y_new.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("ODE produced non-finite state at t = {t}")));
        }

        let mut norm = 0.0f64;
        for i in 0..2 {
            let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
            norm += (err[i] / scale).powi(2);
        }
        norm = (norm / 2.0).sqrt();

        if norm <= 1.0 {
            t += h;
            y = y_new;
            k1 = k_last; // FSAL
            ts.push(t);
            ys.push(y[0]);
            dys.push(y[1]);
            d2ys.push(a(t) * y[0]);
        }

        let scale = if norm == 0.0 {
            MAX_SCALE
        } else {
            (SAFETY * norm.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE)
        };
        h *= scale;
    }

    Ok(OdeTable { ts, ys, dys, d2ys })
}

/// One Dormand-Prince 5(4) step. Returns (5th-order solution, error
/// estimate, last stage slope for FSAL reuse).
fn dp5_step(
    f: &impl Fn(f64, [f64; 2]) -> [f64; 2],
    t: f64,
    y: &[f64; 2],
    h: f64,
    k1: &[f64; 2],
) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let comb = |coeffs: &[(f64, &[f64; 2])]| {
        let mut out = *y;
        for i in 0..2 {
            out[i] += h * coeffs.iter().map(|(c, k)| c * k[i]).sum::<f64>();
        }
        out
    };

    let k2 = f(t + h / 5.0, comb(&[(1.0 / 5.0, k1)]));
    let k3 = f(t + 3.0 * h / 10.0, comb(&[(3.0 / 40.0, k1), (9.0 / 40.0, &k2)]));
    let k4 = f(
        t + 4.0 * h / 5.0,
        comb(&[(44.0 / 45.0, k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)]),
    );
    let k5 = f(
        t + 8.0 * h / 9.0,
        comb(&[
            (19372.0 / 6561.0, k1),
            (-25360.0 / 2187.0, &k2),
            (64448.0 / 6561.0, &k3),
            (-212.0 / 729.0, &k4),
        ]),
    );
    let k6 = f(
        t + h,
        comb(&[
            (9017.0 / 3168.0, k1),
            (-355.0 / 33.0, &k2),
            (46732.0 / 5247.0, &k3),
            (49.0 / 176.0, &k4),
            (-5103.0 / 18656.0, &k5),
        ]),
    );
    let y5 = comb(&[
        (35.0 / 384.0, k1),
        (500.0 / 1113.0, &k3),
        (125.0 / 192.0, &k4),
        (-2187.0 / 6784.0, &k5),
        (11.0 / 84.0, &k6),
    ]);
    let k7 = f(t + h, y5);

    // 4th-order weights for the embedded error estimate
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let stages = [k1, &k2, &k3, &k4, &k5, &k6, &k7];
    let mut err = [0.0f64; 2];
    for i in 0..2 {
        let y4i = y[i] + h * B4.iter().zip(stages.iter()).map(|(b, k)| b * k[i]).sum::<f64>();
        err[i] = y5[i] - y4i;
    }
    (y5, err, k7)
}
