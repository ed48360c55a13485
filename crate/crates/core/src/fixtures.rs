//! Initial-data fixtures: smooth (or deliberately discontinuous)
//! perturbations of a base state prescribed in Riemann-invariant
//! coordinates, (u, v) = (u0 + eps_u * shape(x), v0 + eps_v * shape'(x)),
//! mapped back to (ell, m) cell by cell.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gauss_codazzi::{inverse_riemann, Boundary, Grid, InvariantBox, StateField};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "fixture")]
pub enum Fixture {
    /// u = u0, v = v0 everywhere.
    Constant,
    /// u perturbed by sin, v by cos, `wavenumber` periods over the domain.
    Sine { wavenumber: u32 },
    /// Compactly supported C-infinity bump centered in the domain,
    /// `width` as a fraction of the domain length.
    Bump { width: f64 },
    /// Square wave with `wavenumber` periods: a bounded discontinuous
    /// profile exercising contact transport.
    Square { wavenumber: u32 },
}

/// Full initial-data specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    #[serde(flatten)]
    pub fixture: Fixture,
    pub u0: f64,
    pub v0: f64,
    pub eps_u: f64,
    pub eps_v: f64,
}

impl DataSpec {
    pub fn constant(u0: f64, v0: f64) -> Self {
        Self { fixture: Fixture::Constant, u0, v0, eps_u: 0.0, eps_v: 0.0 }
    }

    pub fn sine(u0: f64, v0: f64, eps_u: f64, eps_v: f64, wavenumber: u32) -> Self {
        Self { fixture: Fixture::Sine { wavenumber }, u0, v0, eps_u, eps_v }
    }
}

fn smooth_bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Build a state field from the spec; every cell must land inside `b0`.
pub fn build_field(
    grid: Grid,
    boundary: Boundary,
    spec: &DataSpec,
    b0: &InvariantBox,
) -> Result<StateField> {
    let length = match boundary {
        Boundary::Periodic => grid.periodic_length(),
        Boundary::ConstantExtension => (grid.count - 1) as f64 * grid.dx,
    };
    let mut cells = Vec::with_capacity(grid.count);
    for i in 0..grid.count {
        let x = grid.x(i);
        let s = (x - grid.x0) / length;
        let (su, sv) = match spec.fixture {
            Fixture::Constant => (0.0, 0.0),
            Fixture::Sine { wavenumber } => {
                let phase = 2.0 * std::f64::consts::PI * wavenumber as f64 * s;
                (phase.sin(), phase.cos())
            }
            Fixture::Bump { width } => {
                let w = smooth_bump((s - 0.5) / (0.5 * width));
                (w, w)
            }
            Fixture::Square { wavenumber } => {
                let phase = (wavenumber as f64 * s).fract();
                let w = if phase < 0.5 { 1.0 } else { -1.0 };
                (w, w)
            }
        };
        let u = spec.u0 + spec.eps_u * su;
        let v = spec.v0 + spec.eps_v * sv;
        let state = inverse_riemann(u, v)?;
        if !b0.contains(state) {
            return Err(Error::Parameter(format!(
                "initial data leaves the invariant box at x = {x}: (ell, m) = ({}, {})",
                state.ell, state.m
            )));
        }
        cells.push(state);
    }
    StateField::new(grid, boundary, cells)
}
