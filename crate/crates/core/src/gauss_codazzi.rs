//! State representations and the algebra of the scaled Gauss-Codazzi
//! balance law
//!
//!   d/dt (ell, m) + d/dx f(U;b) + P(U;b) = 0,
//!   f(U;b) = -(1/b) (m, (m^2-1)/ell),
//!   P(U;b) = ((ell - n) dlnb + (ell/2) dln|K|,  2 m dlnb + (m/2) dln|K|),
//!
//! with n = (m^2 - 1)/ell closing the constraint ell n - m^2 = -1.
//!
//! Symbol convention: the second-form coefficients (L, M, N) here are the
//! geodesic-coordinate coefficients (h11, h12, h22) directly, related to
//! the metric by L N - M^2 = K b^2. The scaling to dimensionless variables
//! is ell = L/(b^2 sqrt|K|), m = M/(b sqrt|K|), n = N/sqrt|K|.

use serde::Serialize;

use crate::error::Error;
use crate::geometry::MetricSample;
use crate::Result;

/// Scaled second-form state U = (ell, m); strict hyperbolicity needs ell < 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledState {
    pub ell: f64,
    pub m: f64,
}

impl ScaledState {
    pub fn new(ell: f64, m: f64) -> Self {
        Self { ell, m }
    }

    pub fn is_finite(&self) -> bool {
        self.ell.is_finite() && self.m.is_finite()
    }

    fn require_hyperbolic(&self) -> Result<()> {
        if !(self.ell < 0.0) {
            return Err(Error::Hyperbolicity { ell: self.ell });
        }
        Ok(())
    }
}

/// Second fundamental form coefficients (h11, h12, h22) in geodesic
/// coordinates; compatible with a metric at time t when
/// l n - m^2 = K b^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundamentalForm {
    pub l: f64,
    pub m: f64,
    pub n: f64,
}

/// Closure of the constraint: n = (m^2 - 1)/ell, so that ell n - m^2 = -1
/// identically.
pub fn closure_n(s: ScaledState) -> Result<f64> {
    if s.ell == 0.0 {
        return Err(Error::Degenerate("closure n = (m^2-1)/ell undefined at ell = 0".into()));
    }
    Ok((s.m * s.m - 1.0) / s.ell)
}

/// Scale (L, M, N) to (ell, m, n) by b and sqrt|K|; requires K < 0.
pub fn scale(f: FundamentalForm, b: f64, k: f64) -> Result<(f64, f64, f64)> {
    if !(k < 0.0) {
        return Err(Error::Degenerate(format!("scaling requires K < 0, got {k}")));
    }
    if !(b > 0.0) {
        return Err(Error::Degenerate(format!("scaling requires b > 0, got {b}")));
    }
    let root = k.abs().sqrt();
    Ok((f.l / (b * b * root), f.m / (b * root), f.n / root))
}

/// Inverse of [`scale`].
pub fn unscale(ell: f64, m: f64, n: f64, b: f64, k: f64) -> Result<FundamentalForm> {
    if !(k < 0.0) {
        return Err(Error::Degenerate(format!("unscaling requires K < 0, got {k}")));
    }
    if !(b > 0.0) {
        return Err(Error::Degenerate(format!("unscaling requires b > 0, got {b}")));
    }
    let root = k.abs().sqrt();
    Ok(FundamentalForm { l: ell * b * b * root, m: m * b * root, n: n * root })
}

/// Flux f(U;b) = -(1/b) (m, (m^2-1)/ell).
pub fn flux(s: ScaledState, b: f64) -> Result<[f64; 2]> {
    s.require_hyperbolic()?;
    Ok([-s.m / b, -(s.m * s.m - 1.0) / (b * s.ell)])
}

/// Source P(U;b) with n eliminated through the constraint closure.
pub fn source(s: ScaledState, derivs: &MetricSample) -> Result<[f64; 2]> {
    s.require_hyperbolic()?;
    let n = (s.m * s.m - 1.0) / s.ell;
    Ok([
        (s.ell - n) * derivs.dlog_b + 0.5 * s.ell * derivs.dlog_k,
        2.0 * s.m * derivs.dlog_b + 0.5 * s.m * derivs.dlog_k,
    ])
}

/// Eigenvalues and flux Jacobian of the scaled system.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Eigenstructure {
    pub lambda1: f64,
    pub lambda2: f64,
    /// d f / d (ell, m), row-major
    pub jacobian: [[f64; 2]; 2],
}

/// lambda_1 = (1 - m)/(b ell) < lambda_2 = -(1 + m)/(b ell); both fields
/// are linearly degenerate.
pub fn eigenstructure(s: ScaledState, b: f64) -> Result<Eigenstructure> {
    s.require_hyperbolic()?;
    let be = b * s.ell;
    let lambda1 = -s.m / be + 1.0 / be;
    let lambda2 = -s.m / be - 1.0 / be;
    let jacobian = [
        [0.0, -1.0 / b],
        [(s.m * s.m - 1.0) / (b * s.ell * s.ell), -2.0 * s.m / be],
    ];
    Ok(Eigenstructure { lambda1, lambda2, jacobian })
}

/// Right eigenvectors (unnormalized) of the flux Jacobian: r_i = (1, -lambda_i b).
pub fn eigenvectors(s: ScaledState, b: f64) -> Result<[[f64; 2]; 2]> {
    let eig = eigenstructure(s, b)?;
    Ok([[1.0, -eig.lambda1 * b], [1.0, -eig.lambda2 * b]])
}

/// Riemann invariants u = (1 - m)/ell, v = -(1 + m)/ell with v - u = -2/ell > 0.
pub fn riemann_invariants(s: ScaledState) -> Result<(f64, f64)> {
    s.require_hyperbolic()?;
    Ok((-s.m / s.ell + 1.0 / s.ell, -s.m / s.ell - 1.0 / s.ell))
}

/// Inverse map: ell = -2/(v - u), m = (u + v)/(v - u); requires v > u.
pub fn inverse_riemann(u: f64, v: f64) -> Result<ScaledState> {
    if !(v > u) {
        return Err(Error::Degenerate(format!("inverse Riemann map requires v > u, got u = {u}, v = {v}")));
    }
    Ok(ScaledState { ell: -2.0 / (v - u), m: (u + v) / (v - u) })
}

/// Invariant box B0 = [-outer, -inner] x (-1, 1) in (ell, m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantBox {
    /// r0 > 0: the box keeps ell <= -r0
    pub inner: f64,
    /// R0 > r0: the box keeps ell >= -R0
    pub outer: f64,
}

impl Default for InvariantBox {
    fn default() -> Self {
        Self { inner: 0.1, outer: 10.0 }
    }
}

impl InvariantBox {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner) {
            return Err(Error::Parameter(format!(
                "invariant box requires 0 < r0 < R0, got r0 = {inner}, R0 = {outer}"
            )));
        }
        Ok(Self { inner, outer })
    }

    pub fn contains(&self, s: ScaledState) -> bool {
        s.ell <= -self.inner && s.ell >= -self.outer && s.m > -1.0 && s.m < 1.0
    }

    /// Distance to the nearest face; positive inside the box.
    pub fn margin(&self, s: ScaledState) -> f64 {
        let d_ell = (-self.inner - s.ell).min(s.ell + self.outer);
        let d_m = (1.0 - s.m).min(s.m + 1.0);
        d_ell.min(d_m)
    }
}

/// Boundary closure of a spatial field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    ConstantExtension,
}

/// Uniform spatial grid: x_i = x0 + i dx for i = 0..count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub x0: f64,
    pub dx: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(x0: f64, dx: f64, count: usize) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::Parameter(format!("grid spacing must be positive, got {dx}")));
        }
        if count < 4 {
            return Err(Error::Parameter(format!("grid needs at least 4 cells, got {count}")));
        }
        Ok(Self { x0, dx, count })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    /// Periodic cell length (count * dx).
    pub fn periodic_length(&self) -> f64 {
        self.count as f64 * self.dx
    }
}

/// A spatial field of scaled states on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateField {
    pub grid: Grid,
    pub boundary: Boundary,
    pub cells: Vec<ScaledState>,
}

impl StateField {
    pub fn new(grid: Grid, boundary: Boundary, cells: Vec<ScaledState>) -> Result<Self> {
        if cells.len() != grid.count {
            return Err(Error::GridMismatch(format!(
                "grid expects {} cells, field has {}",
                grid.count,
                cells.len()
            )));
        }
        Ok(Self { grid, boundary, cells })
    }

    pub fn constant(grid: Grid, boundary: Boundary, s: ScaledState) -> Result<Self> {
        Self::new(grid, boundary, vec![s; grid.count])
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Left/right neighbor values under the configured boundary closure.
    pub fn neighbors(&self, i: usize) -> (ScaledState, ScaledState) {
        let n = self.cells.len();
        match self.boundary {
            Boundary::Periodic => (self.cells[(i + n - 1) % n], self.cells[(i + 1) % n]),
            Boundary::ConstantExtension => {
                let left = if i == 0 { self.cells[0] } else { self.cells[i - 1] };
                let right = if i + 1 == n { self.cells[n - 1] } else { self.cells[i + 1] };
                (left, right)
            }
        }
    }

    /// Quadrature of a per-cell function over x: plain cell sum for
    /// periodic fields, composite trapezoid otherwise.
    pub fn integrate(&self, f: impl Fn(ScaledState) -> f64) -> f64 {
        let dx = self.grid.dx;
        match self.boundary {
            Boundary::Periodic => self.cells.iter().map(|&s| f(s)).sum::<f64>() * dx,
            Boundary::ConstantExtension => {
                let n = self.cells.len();
                let mut acc = 0.5 * (f(self.cells[0]) + f(self.cells[n - 1]));
                for &s in &self.cells[1..n - 1] {
                    acc += f(s);
                }
                acc * dx
            }
        }
    }

    /// Domain length matching [`Self::integrate`].
    pub fn domain_length(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.grid.periodic_length(),
            Boundary::ConstantExtension => (self.grid.count - 1) as f64 * self.grid.dx,
        }
    }

    pub fn same_layout(&self, other: &StateField) -> bool {
        self.grid == other.grid && self.boundary == other.boundary
    }
}
