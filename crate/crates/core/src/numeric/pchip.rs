//! Monotone piecewise-cubic interpolation (Fritsch-Carlson) for tabulated
//! metric profiles. Derivatives of the interpolant are analytic per piece.

use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone)]
pub struct Pchip {
    ts: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(ts: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if ts.len() != ys.len() {
            return Err(Error::Parameter("table columns have different lengths".into()));
        }
        if ts.len() < 3 {
            return Err(Error::Parameter("tabulated profile needs at least 3 rows".into()));
        }
        if ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("table abscissae must be strictly increasing".into()));
        }

        let n = ts.len();
        let h: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                slopes[i] = 0.0;
            } else {
                // weighted harmonic mean keeps the interpolant monotone
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        slopes[0] = endpoint_slope(h[0], h[1], delta[0], delta[1]);
        slopes[n - 1] = endpoint_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);

        Ok(Self { ts, ys, slopes })
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn min_spacing(&self) -> f64 {
        self.ts
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    fn segment(&self, t: f64) -> usize {
        let idx = self.ts.partition_point(|&node| node <= t);
        idx.clamp(1, self.ts.len() - 1) - 1
    }

    /// (value, first, second, third) derivative of the interpolant at t.
    pub fn eval_all(&self, t: f64) -> (f64, f64, f64, f64) {
        let i = self.segment(t);
        let h = self.ts[i + 1] - self.ts[i];
        let s = t - self.ts[i];
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        let delta = (y1 - y0) / h;

        // cubic in local coordinate: y0 + d0 s + c2 s^2 + c3 s^3
        let c2 = (3.0 * delta - 2.0 * d0 - d1) / h;
        let c3 = (d0 + d1 - 2.0 * delta) / (h * h);

        let value = y0 + s * (d0 + s * (c2 + s * c3));
        let first = d0 + s * (2.0 * c2 + 3.0 * s * c3);
        let second = 2.0 * c2 + 6.0 * s * c3;
        let third = 6.0 * c3;
        (value, first, second, third)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval_all(t).0
    }
}

fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    // one-sided three-point estimate, clipped to preserve monotonicity
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
