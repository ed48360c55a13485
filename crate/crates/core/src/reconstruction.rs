//! Rebuild the immersion y : Omega -> R^3 from the metric and a gridded
//! second fundamental form by integrating the frame system
//!
//!   d_j r_i = Gamma^k_ij r_k + h_ij n,      d_i n = -h_ij g^jk r_k,
//!
//! fourth order along a spine (t at x = x0) and then along each row,
//! with compatibility certified by discrete Gauss-Codazzi residuals
//! before any integration starts. Reconstructions from the same data and
//! different anchors agree up to a proper rigid motion, which
//! [`rigid_align`] recovers.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::Error;
use crate::geometry::MetricProfile;
use crate::numeric::interp::cubic_at;
use crate::Result;

/// Nonzero Christoffel symbols of g = dt^2 + b(t)^2 dx^2:
/// Gamma^x_xt = b'/b and Gamma^t_xx = -b b'.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Christoffel {
    pub x_xt: f64,
    pub t_xx: f64,
}

pub fn christoffel(g: &MetricProfile, t: f64) -> Result<Christoffel> {
    let s = g.sample(t)?;
    Ok(Christoffel { x_xt: s.db_dt / s.b, t_xx: -s.b * s.db_dt })
}

/// Second-form coefficients sampled on a uniform (x, t) grid,
/// row-major with index it * nx + ix.
#[derive(Debug, Clone)]
pub struct FormGrid {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    pub h11: Vec<f64>,
    pub h12: Vec<f64>,
    pub h22: Vec<f64>,
}

impl FormGrid {
    pub fn idx(&self, ix: usize, it: usize) -> usize {
        it * self.nx + ix
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.dx
    }

    pub fn t(&self, it: usize) -> f64 {
        self.t0 + it as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.nt < 4 {
            return Err(Error::Parameter(format!(
                "form grid needs at least 4x4 nodes, got {}x{}",
                self.nx, self.nt
            )));
        }
        let len = self.nx * self.nt;
        if self.h11.len() != len || self.h12.len() != len || self.h22.len() != len {
            return Err(Error::GridMismatch("form arrays do not match the grid".into()));
        }
        if !(self.dx > 0.0 && self.dt > 0.0) {
            return Err(Error::Parameter("form grid spacings must be positive".into()));
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        let ex = (self.nx - 1) as f64 * self.dx;
        let et = (self.nt - 1) as f64 * self.dt;
        ex.hypot(et)
    }

    fn t_slice(&self, ix: usize, h: &[f64]) -> Vec<f64> {
        (0..self.nt).map(|it| h[self.idx(ix, it)]).collect()
    }

    fn x_slice(&self, it: usize, h: &[f64]) -> Vec<f64> {
        (0..self.nx).map(|ix| h[self.idx(ix, it)]).collect()
    }
}

/// Exact second form of the helicoid family: (h11, h12, h22) =
/// (0, -1/sqrt(c^2 + t^2), 0), for tests and the `exact` CLI path.
pub fn helicoid_form_grid(
    c: f64,
    x0: f64,
    x1: f64,
    nx: usize,
    t0: f64,
    t1: f64,
    nt: usize,
) -> FormGrid {
    let dx = (x1 - x0) / (nx - 1) as f64;
    let dt = (t1 - t0) / (nt - 1) as f64;
    let mut h12 = Vec::with_capacity(nx * nt);
    for it in 0..nt {
        let t = t0 + it as f64 * dt;
        let v = -1.0 / (c * c + t * t).sqrt();
        for _ in 0..nx {
            h12.push(v);
        }
    }
    FormGrid {
        x0,
        dx,
        nx,
        t0,
        dt,
        nt,
        h11: vec![0.0; nx * nt],
        h12,
        h22: vec![0.0; nx * nt],
    }
}

/// The closed-form helicoid map (t sin(x/c), t cos(x/c), x), the oracle
/// for reconstruction tests.
pub fn helicoid_exact_map(c: f64, x: f64, t: f64) -> Vector3<f64> {
    Vector3::new(t * (x / c).sin(), t * (x / c).cos(), x)
}

/// Initial frame at the grid corner (x0, t0).
#[derive(Debug, Clone, Copy)]
pub struct Anchor {
    pub y: Vector3<f64>,
    pub r1: Vector3<f64>,
    pub r2: Vector3<f64>,
}

impl Anchor {
    /// Deterministic default: y = 0, r2 = e_z, r1 = b(t0) e_x.
    pub fn standard(b0: f64) -> Self {
        Self {
            y: Vector3::zeros(),
            r1: Vector3::new(b0, 0.0, 0.0),
            r2: Vector3::new(0.0, 0.0, 1.0),
        }
    }

    /// Anchor rotated by a proper rotation, for uniqueness checks.
    pub fn rotated(&self, rot: &Matrix3<f64>) -> Self {
        Self { y: self.y, r1: rot * self.r1, r2: rot * self.r2 }
    }

    fn normal(&self) -> Vector3<f64> {
        let cross = self.r1.cross(&self.r2);
        cross / cross.norm()
    }

    fn check(&self, b0: f64) -> Result<()> {
        let tol = 1e-8;
        if (self.r2.norm() - 1.0).abs() > tol {
            return Err(Error::Parameter(format!("anchor needs |r2| = 1, got {}", self.r2.norm())));
        }
        if (self.r1.norm() - b0).abs() > tol * b0.max(1.0) {
            return Err(Error::Parameter(format!(
                "anchor needs |r1| = b(t0) = {b0}, got {}",
                self.r1.norm()
            )));
        }
        if self.r1.dot(&self.r2).abs() > tol * b0.max(1.0) {
            return Err(Error::Parameter("anchor needs r1 orthogonal to r2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationOrder {
    /// spine along t at x = x0, then along x per t-row (default)
    TFirst,
    /// spine along x at t = t0, then along t per x-column
    XFirst,
}

#[derive(Debug, Clone, Copy)]
pub struct ReconstructOptions {
    pub order: IntegrationOrder,
    /// override of the compatibility threshold; default 1e-3 * grid diameter
    pub commutator_threshold: Option<f64>,
    /// re-orthonormalize the frame after every node (diagnostic drift is
    /// reported either way)
    pub gram_schmidt: bool,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self { order: IntegrationOrder::TFirst, commutator_threshold: None, gram_schmidt: false }
    }
}

/// Reconstructed immersion with frame vectors, normals and per-vertex
/// frame residuals.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    pub positions: Vec<Vector3<f64>>,
    pub r1: Vec<Vector3<f64>>,
    pub r2: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    /// max of | |r2|^2 - 1 |, | |r1|^2 - b^2 |, |r1 . r2| per vertex
    pub frame_residuals: Vec<f64>,
}

impl SurfaceMesh {
    pub fn idx(&self, ix: usize, it: usize) -> usize {
        it * self.nx + ix
    }

    pub fn max_frame_residual(&self) -> f64 {
        self.frame_residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy)]
struct FrameState {
    y: Vector3<f64>,
    r1: Vector3<f64>,
    r2: Vector3<f64>,
    n: Vector3<f64>,
}

impl FrameState {
    fn add_scaled(&self, k: &FrameState, s: f64) -> FrameState {
        FrameState {
            y: self.y + s * k.y,
            r1: self.r1 + s * k.r1,
            r2: self.r2 + s * k.r2,
            n: self.n + s * k.n,
        }
    }

    fn rk4_combine(&self, k1: &FrameState, k2: &FrameState, k3: &FrameState, k4: &FrameState, h: f64) -> FrameState {
        FrameState {
            y: self.y + h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
            r1: self.r1 + h / 6.0 * (k1.r1 + 2.0 * k2.r1 + 2.0 * k3.r1 + k4.r1),
            r2: self.r2 + h / 6.0 * (k1.r2 + 2.0 * k2.r2 + 2.0 * k3.r2 + k4.r2),
            n: self.n + h / 6.0 * (k1.n + 2.0 * k2.n + 2.0 * k3.n + k4.n),
        }
    }
}

/// Discrete Gauss-Codazzi residuals on interior nodes; the compatibility
/// certificate for [`reconstruct_surface`].
pub fn compatibility_residual(g: &MetricProfile, forms: &FormGrid) -> Result<f64> {
    forms.validate()?;
    let mut worst = 0.0f64;
    for it in 1..forms.nt - 1 {
        let t = forms.t(it);
        let s = g.sample(t)?;
        for ix in 1..forms.nx - 1 {
            let dt_h11 = (forms.h11[forms.idx(ix, it + 1)] - forms.h11[forms.idx(ix, it - 1)])
                / (2.0 * forms.dt);
            let dt_h12 = (forms.h12[forms.idx(ix, it + 1)] - forms.h12[forms.idx(ix, it - 1)])
                / (2.0 * forms.dt);
            let dx_h12 = (forms.h12[forms.idx(ix + 1, it)] - forms.h12[forms.idx(ix - 1, it)])
                / (2.0 * forms.dx);
            let dx_h22 = (forms.h22[forms.idx(ix + 1, it)] - forms.h22[forms.idx(ix - 1, it)])
                / (2.0 * forms.dx);
            let (h11, h12, h22) = (
                forms.h11[forms.idx(ix, it)],
                forms.h12[forms.idx(ix, it)],
                forms.h22[forms.idx(ix, it)],
            );
            let codazzi1 = dt_h11 - dx_h12 - h11 * s.dlog_b - h22 * s.b * s.db_dt;
            let codazzi2 = dt_h12 - dx_h22 + h12 * s.dlog_b;
            let gauss = h11 * h22 - h12 * h12 - s.k * s.b * s.b;
            worst = worst.max(codazzi1.abs()).max(codazzi2.abs()).max(gauss.abs());
        }
    }
    Ok(worst)
}

/// Integrate the frame system over the grid. Fails with a typed error if
/// the forms are incompatible with the metric or the anchor frame is not
/// metric-compatible.
pub fn reconstruct_surface(
    g: &MetricProfile,
    forms: &FormGrid,
    anchor: &Anchor,
    opts: &ReconstructOptions,
) -> Result<SurfaceMesh> {
    forms.validate()?;
    let threshold = opts
        .commutator_threshold
        .unwrap_or(1e-3 * forms.diameter());
    let residual = compatibility_residual(g, forms)?;
    if residual > threshold {
        return Err(Error::Compatibility { max_residual: residual, threshold });
    }

    let b0 = g.b(forms.t0)?;
    anchor.check(b0)?;
    let start = FrameState { y: anchor.y, r1: anchor.r1, r2: anchor.r2, n: anchor.normal() };

    let n_total = forms.nx * forms.nt;
    let mut positions = vec![Vector3::zeros(); n_total];
    let mut r1 = vec![Vector3::zeros(); n_total];
    let mut r2 = vec![Vector3::zeros(); n_total];
    let mut normals = vec![Vector3::zeros(); n_total];

    let mut store = |ix: usize, it: usize, s: &FrameState| {
        let i = it * forms.nx + ix;
        positions[i] = s.y;
        r1[i] = s.r1;
        r2[i] = s.r2;
        normals[i] = s.n;
    };

    match opts.order {
        IntegrationOrder::TFirst => {
            // spine along t at ix = 0
            let h12_spine = forms.t_slice(0, &forms.h12);
            let h22_spine = forms.t_slice(0, &forms.h22);
            let mut spine = vec![start];
            let mut cur = start;
            store(0, 0, &cur);
            for it in 0..forms.nt - 1 {
                cur = rk4_t_step(g, forms, &h12_spine, &h22_spine, it, cur, opts.gram_schmidt)?;
                spine.push(cur);
                store(0, it + 1, &cur);
            }
            // rows along x
            for it in 0..forms.nt {
                let t = forms.t(it);
                let s = g.sample(t)?;
                let h11_row = forms.x_slice(it, &forms.h11);
                let h12_row = forms.x_slice(it, &forms.h12);
                let mut cur = spine[it];
                for ix in 0..forms.nx - 1 {
                    cur = rk4_x_step(&s, forms, &h11_row, &h12_row, ix, cur, opts.gram_schmidt)?;
                    store(ix + 1, it, &cur);
                }
            }
        }
        IntegrationOrder::XFirst => {
            // spine along x at it = 0
            let s0 = g.sample(forms.t0)?;
            let h11_spine = forms.x_slice(0, &forms.h11);
            let h12_spine = forms.x_slice(0, &forms.h12);
            let mut spine = vec![start];
            let mut cur = start;
            store(0, 0, &cur);
            for ix in 0..forms.nx - 1 {
                cur = rk4_x_step(&s0, forms, &h11_spine, &h12_spine, ix, cur, opts.gram_schmidt)?;
                spine.push(cur);
                store(ix + 1, 0, &cur);
            }
            for ix in 0..forms.nx {
                let h12_col = forms.t_slice(ix, &forms.h12);
                let h22_col = forms.t_slice(ix, &forms.h22);
                let mut cur = spine[ix];
                for it in 0..forms.nt - 1 {
                    cur = rk4_t_step(g, forms, &h12_col, &h22_col, it, cur, opts.gram_schmidt)?;
                    store(ix, it + 1, &cur);
                }
            }
        }
    }

    let mut frame_residuals = Vec::with_capacity(n_total);
    for it in 0..forms.nt {
        let b = g.b(forms.t(it))?;
        for ix in 0..forms.nx {
            let i = it * forms.nx + ix;
            let e1 = (r1[i].norm_squared() - b * b).abs();
            let e2 = (r2[i].norm_squared() - 1.0).abs();
            let e3 = r1[i].dot(&r2[i]).abs();
            frame_residuals.push(e1.max(e2).max(e3));
        }
    }

    Ok(SurfaceMesh {
        x0: forms.x0,
        dx: forms.dx,
        nx: forms.nx,
        t0: forms.t0,
        dt: forms.dt,
        nt: forms.nt,
        positions,
        r1,
        r2,
        normals,
        frame_residuals,
    })
}

fn t_rhs(
    sample_b: f64,
    gamma1: f64,
    h12: f64,
    h22: f64,
    s: &FrameState,
) -> FrameState {
    FrameState {
        y: s.r2,
        r1: gamma1 * s.r1 + h12 * s.n,
        r2: h22 * s.n,
        n: -h12 / (sample_b * sample_b) * s.r1 - h22 * s.r2,
    }
}

fn x_rhs(sample_b: f64, gamma1: f64, gamma2: f64, h11: f64, h12: f64, s: &FrameState) -> FrameState {
    FrameState {
        y: s.r1,
        r1: gamma2 * s.r2 + h11 * s.n,
        r2: gamma1 * s.r1 + h12 * s.n,
        n: -h11 / (sample_b * sample_b) * s.r1 - h12 * s.r2,
    }
}

fn rk4_t_step(
    g: &MetricProfile,
    forms: &FormGrid,
    h12_slice: &[f64],
    h22_slice: &[f64],
    it: usize,
    cur: FrameState,
    gram_schmidt: bool,
) -> Result<FrameState> {
    let h = forms.dt;
    let t = forms.t(it);
    let eval = |frac: f64, state: &FrameState| -> Result<FrameState> {
        let tt = t + frac * h;
        let s = g.sample(tt)?;
        let q = it as f64 + frac;
        let h12 = cubic_at(h12_slice, q);
        let h22 = cubic_at(h22_slice, q);
        Ok(t_rhs(s.b, s.dlog_b, h12, h22, state))
    };
    let k1 = eval(0.0, &cur)?;
    let k2 = eval(0.5, &cur.add_scaled(&k1, 0.5 * h))?;
    let k3 = eval(0.5, &cur.add_scaled(&k2, 0.5 * h))?;
    let k4 = eval(1.0, &cur.add_scaled(&k3, h))?;
    let mut next = cur.rk4_combine(&k1, &k2, &k3, &k4, h);
    if gram_schmidt {
        next = reorthonormalize(next, g.b(t + h)?);
    }
    Ok(next)
}

fn rk4_x_step(
    sample: &crate::geometry::MetricSample,
    forms: &FormGrid,
    h11_slice: &[f64],
    h12_slice: &[f64],
    ix: usize,
    cur: FrameState,
    gram_schmidt: bool,
) -> Result<FrameState> {
    let h = forms.dx;
    let gamma1 = sample.dlog_b;
    let gamma2 = -sample.b * sample.db_dt;
    let eval = |frac: f64, state: &FrameState| -> FrameState {
        let q = ix as f64 + frac;
        let h11 = cubic_at(h11_slice, q);
        let h12 = cubic_at(h12_slice, q);
        x_rhs(sample.b, gamma1, gamma2, h11, h12, state)
    };
    let k1 = eval(0.0, &cur);
    let k2 = eval(0.5, &cur.add_scaled(&k1, 0.5 * h));
    let k3 = eval(0.5, &cur.add_scaled(&k2, 0.5 * h));
    let k4 = eval(1.0, &cur.add_scaled(&k3, h));
    let mut next = cur.rk4_combine(&k1, &k2, &k3, &k4, h);
    if gram_schmidt {
        next = reorthonormalize(next, sample.b);
    }
    Ok(next)
}

fn reorthonormalize(mut s: FrameState, b: f64) -> FrameState {
    s.r2 /= s.r2.norm();
    s.r1 -= s.r1.dot(&s.r2) * s.r2;
    s.r1 *= b / s.r1.norm();
    let n = s.r1.cross(&s.r2);
    s.n = n / n.norm();
    s
}

/// Deviations of finite-difference first and second forms recomputed from
/// the mesh positions against the metric and the input forms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FormResiduals {
    pub max_metric: f64,
    pub mean_metric: f64,
    pub max_second_form: f64,
    pub mean_second_form: f64,
}

pub fn form_residuals(mesh: &SurfaceMesh, g: &MetricProfile, forms: &FormGrid) -> Result<FormResiduals> {
    if mesh.nx != forms.nx || mesh.nt != forms.nt {
        return Err(Error::GridMismatch("mesh and form grid differ".into()));
    }
    if mesh.nx < 3 || mesh.nt < 3 {
        return Err(Error::Parameter("form residuals need at least 3x3 vertices".into()));
    }
    let mut max_metric = 0.0f64;
    let mut sum_metric = 0.0f64;
    let mut max_h = 0.0f64;
    let mut sum_h = 0.0f64;
    let mut count = 0usize;

    for it in 1..mesh.nt - 1 {
        let b = g.b(mesh.t0 + it as f64 * mesh.dt)?;
        for ix in 1..mesh.nx - 1 {
            let i = mesh.idx(ix, it);
            let y = &mesh.positions;
            let r1 = (y[mesh.idx(ix + 1, it)] - y[mesh.idx(ix - 1, it)]) / (2.0 * mesh.dx);
            let r2 = (y[mesh.idx(ix, it + 1)] - y[mesh.idx(ix, it - 1)]) / (2.0 * mesh.dt);
            let cross = r1.cross(&r2);
            let cross_norm = cross.norm();
            if cross_norm < 1e-12 {
                return Err(Error::Degenerate(format!(
                    "degenerate tangent plane at node ({ix}, {it})"
                )));
            }
            let n = cross / cross_norm;

            let g11 = (r1.dot(&r1) - b * b).abs();
            let g12 = r1.dot(&r2).abs();
            let g22 = (r2.dot(&r2) - 1.0).abs();
            let metric_dev = g11.max(g12).max(g22);
            max_metric = max_metric.max(metric_dev);
            sum_metric += metric_dev;

            let yxx = (y[mesh.idx(ix + 1, it)] - 2.0 * y[i] + y[mesh.idx(ix - 1, it)])
                / (mesh.dx * mesh.dx);
            let ytt = (y[mesh.idx(ix, it + 1)] - 2.0 * y[i] + y[mesh.idx(ix, it - 1)])
                / (mesh.dt * mesh.dt);
            let yxt = (y[mesh.idx(ix + 1, it + 1)] - y[mesh.idx(ix + 1, it - 1)]
                - y[mesh.idx(ix - 1, it + 1)]
                + y[mesh.idx(ix - 1, it - 1)])
                / (4.0 * mesh.dx * mesh.dt);
            let h11 = (n.dot(&yxx) - forms.h11[i]).abs();
            let h12 = (n.dot(&yxt) - forms.h12[i]).abs();
            let h22 = (n.dot(&ytt) - forms.h22[i]).abs();
            let h_dev = h11.max(h12).max(h22);
            max_h = max_h.max(h_dev);
            sum_h += h_dev;
            count += 1;
        }
    }

    Ok(FormResiduals {
        max_metric,
        mean_metric: sum_metric / count as f64,
        max_second_form: max_h,
        mean_second_form: sum_h / count as f64,
    })
}

/// Proper rigid motion q ~ R p + t fitted by least squares.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub rms: f64,
    pub max_deviation: f64,
    /// true when an orientation-reversing map would fit better; the
    /// returned rotation is proper regardless
    pub reflection_preferred: bool,
}

/// Orthogonal-Procrustes alignment of mesh A onto mesh B (same grids).
pub fn rigid_align(a: &SurfaceMesh, b: &SurfaceMesh) -> Result<Alignment> {
    if a.nx != b.nx || a.nt != b.nt {
        return Err(Error::GridMismatch("meshes differ in grid".into()));
    }
    align_points(&a.positions, &b.positions)
}

/// Kabsch on raw point lists (paired by index).
pub fn align_points(ps: &[Vector3<f64>], qs: &[Vector3<f64>]) -> Result<Alignment> {
    if ps.len() != qs.len() || ps.len() < 3 {
        return Err(Error::Parameter("alignment needs two equally sized point sets (>= 3)".into()));
    }
    let n = ps.len() as f64;
    let cp: Vector3<f64> = ps.iter().sum::<Vector3<f64>>() / n;
    let cq: Vector3<f64> = qs.iter().sum::<Vector3<f64>>() / n;

    let mut h = Matrix3::zeros();
    for (p, q) in ps.iter().zip(qs.iter()) {
        h += (p - cp) * (q - cq).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numeric("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Numeric("SVD failed".into()))?;
    let det = (v_t.transpose() * u.transpose()).determinant();
    let reflection_preferred = det < 0.0;
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let rotation = v_t.transpose() * d * u.transpose();
    let translation = cq - rotation * cp;

    let mut ss = 0.0f64;
    let mut max_dev = 0.0f64;
    for (p, q) in ps.iter().zip(qs.iter()) {
        let dev = (rotation * p + translation - q).norm();
        ss += dev * dev;
        max_dev = max_dev.max(dev);
    }
    Ok(Alignment { rotation, translation, rms: (ss / n).sqrt(), max_deviation: max_dev, reflection_preferred })
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the mesh as ASCII OBJ (vertices, normals, quad faces) with
/// 17-significant-digit floats and deterministic row-major ordering.
pub fn export_mesh(mesh: &SurfaceMesh, path: &std::path::Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("# surface mesh, row-major (t rows, x columns)\n");
    out.push_str(&format!("# grid {} x {}\n", mesh.nx, mesh.nt));
    for p in &mesh.positions {
        out.push_str(&format!("v {} {} {}\n", fmt17(p.x), fmt17(p.y), fmt17(p.z)));
    }
    for nvec in &mesh.normals {
        out.push_str(&format!("vn {} {} {}\n", fmt17(nvec.x), fmt17(nvec.y), fmt17(nvec.z)));
    }
    for it in 0..mesh.nt - 1 {
        for ix in 0..mesh.nx - 1 {
            // OBJ indices are 1-based
            let a = it * mesh.nx + ix + 1;
            let b = it * mesh.nx + ix + 2;
            let c = (it + 1) * mesh.nx + ix + 2;
            let d = (it + 1) * mesh.nx + ix + 1;
            out.push_str(&format!("f {a}//{a} {b}//{b} {c}//{c} {d}//{d}\n"));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read back vertices and normals of an exported mesh.
pub fn import_mesh_vertices(path: &std::path::Path) -> Result<(Vec<Vector3<f64>>, Vec<Vector3<f64>>, usize)> {
    let text = std::fs::read_to_string(path)?;
    let mut vs = Vec::new();
    let mut ns = Vec::new();
    let mut faces = 0usize;
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") | Some("vn") => {
                let tag = line.split_whitespace().next().unwrap();
                let coords: Vec<f64> = line
                    .split_whitespace()
                    .skip(1)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Numeric(format!("bad float in mesh file: {e}")))?;
                if coords.len() != 3 {
                    return Err(Error::Numeric("mesh vertex needs 3 coordinates".into()));
                }
                let v = Vector3::new(coords[0], coords[1], coords[2]);
                if tag == "v" {
                    vs.push(v);
                } else {
                    ns.push(v);
                }
            }
            Some("f") => faces += 1,
            _ => {}
        }
    }
    Ok((vs, ns, faces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::helicoid_metric;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn helicoid_setup(nx: usize, nt: usize) -> (MetricProfile, FormGrid) {
        let g = helicoid_metric(1.0).unwrap();
        let forms =
            helicoid_form_grid(1.0, 0.0, 2.0 * std::f64::consts::PI, nx, 0.0, 1.0, nt);
        (g, forms)
    }

    #[test]
    fn christoffel_closed_forms() {
        let g = helicoid_metric(1.0).unwrap();
        let c = christoffel(&g, 0.0).unwrap();
        assert_eq!((c.x_xt, c.t_xx), (0.0, 0.0));
        let c = christoffel(&g, 1.0).unwrap();
        assert_relative_eq!(c.x_xt, 0.5, max_relative = 1e-14);
        assert_relative_eq!(c.t_xx, -1.0, max_relative = 1e-14);
    }

    #[test]
    fn christoffel_matches_finite_difference_of_general_formula() {
        // Gamma^k_ij = (1/2) g^kl (d_j g_il + d_i g_jl - d_l g_ij) with
        // g = diag(b^2, 1): only d_t g_xx = 2 b b' enters
        let g = helicoid_metric(1.4).unwrap();
        let h = 1e-6;
        for &t in &[0.3, 1.0, 2.5] {
            let c = christoffel(&g, t).unwrap();
            let b = |tt: f64| g.b(tt).unwrap();
            let dgxx = (b(t + h).powi(2) - b(t - h).powi(2)) / (2.0 * h);
            let gxx = b(t).powi(2);
            assert_abs_diff_eq!(c.x_xt, 0.5 / gxx * dgxx, epsilon = 1e-8);
            assert_abs_diff_eq!(c.t_xx, -0.5 * dgxx, epsilon = 1e-8);
        }
    }

    #[test]
    fn helicoid_reconstruction_matches_closed_form() {
        let (g, forms) = helicoid_setup(128, 33);
        let anchor = Anchor::standard(1.0);
        let mesh = reconstruct_surface(&g, &forms, &anchor, &ReconstructOptions::default()).unwrap();

        let exact: Vec<Vector3<f64>> = (0..forms.nt)
            .flat_map(|it| {
                (0..forms.nx).map(move |ix| {
                    helicoid_exact_map(1.0, forms.x0 + ix as f64 * forms.dx, forms.t0 + it as f64 * forms.dt)
                })
            })
            .collect();
        let alignment = align_points(&mesh.positions, &exact).unwrap();
        assert!(alignment.max_deviation <= 1e-3, "max dev {}", alignment.max_deviation);
        assert!(mesh.max_frame_residual() <= 1e-4, "frame residual {}", mesh.max_frame_residual());
    }

    #[test]
    fn doubling_h_breaks_compatibility() {
        let (g, mut forms) = helicoid_setup(64, 17);
        for v in forms.h12.iter_mut() {
            *v *= 2.0;
        }
        let anchor = Anchor::standard(1.0);
        let err = reconstruct_surface(&g, &forms, &anchor, &ReconstructOptions::default());
        assert!(matches!(err, Err(Error::Compatibility { .. })), "got {err:?}");
    }

    #[test]
    fn incompatible_anchor_is_rejected() {
        let (g, forms) = helicoid_setup(16, 8);
        let anchor = Anchor {
            y: Vector3::zeros(),
            r1: Vector3::new(2.0, 0.0, 0.0), // |r1| != b(0) = 1
            r2: Vector3::new(0.0, 0.0, 1.0),
        };
        assert!(reconstruct_surface(&g, &forms, &anchor, &ReconstructOptions::default()).is_err());
    }

    #[test]
    fn path_independence_for_compatible_fields() {
        let (g, forms) = helicoid_setup(96, 25);
        let anchor = Anchor::standard(1.0);
        let a = reconstruct_surface(&g, &forms, &anchor, &ReconstructOptions::default()).unwrap();
        let opts = ReconstructOptions { order: IntegrationOrder::XFirst, ..Default::default() };
        let b = reconstruct_surface(&g, &forms, &anchor, &opts).unwrap();
        let mut dev = 0.0f64;
        for (p, q) in a.positions.iter().zip(b.positions.iter()) {
            dev = dev.max((p - q).norm());
        }
        assert!(dev <= forms.dx.max(forms.dt), "path dependence {dev}");
    }

    #[test]
    fn anchor_independence_up_to_rigid_motion() {
        let (g, forms) = helicoid_setup(64, 17);
        let a = reconstruct_surface(&g, &forms, &Anchor::standard(1.0), &ReconstructOptions::default())
            .unwrap();
        let angle = 0.7f64;
        let rot = Matrix3::new(
            angle.cos(), -angle.sin(), 0.0,
            angle.sin(), angle.cos(), 0.0,
            0.0, 0.0, 1.0,
        );
        let b = reconstruct_surface(
            &g,
            &forms,
            &Anchor::standard(1.0).rotated(&rot),
            &ReconstructOptions::default(),
        )
        .unwrap();
        let alignment = rigid_align(&a, &b).unwrap();
        assert!(alignment.max_deviation <= 1e-8, "dev {}", alignment.max_deviation);
        assert!(!alignment.reflection_preferred);
    }

    #[test]
    fn form_residuals_detect_jitter() {
        let (g, forms) = helicoid_setup(64, 33);
        // analytic mesh sampled from the closed form
        let mut mesh = reconstruct_surface(&g, &forms, &Anchor::standard(1.0), &ReconstructOptions::default())
            .unwrap();
        let clean = form_residuals(&mesh, &g, &forms).unwrap();
        // second-order consistency of the centered differences
        assert!(clean.max_metric < 1e-2, "metric residual {}", clean.max_metric);
        assert!(clean.max_second_form < 1e-2, "form residual {}", clean.max_second_form);

        let jitter = 1e-3;
        for (i, p) in mesh.positions.iter_mut().enumerate() {
            let s = ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5;
            p.x += jitter * s;
        }
        let dirty = form_residuals(&mesh, &g, &forms).unwrap();
        assert!(dirty.max_second_form > 10.0 * clean.max_second_form);
    }

    #[test]
    fn alignment_recovers_translation_and_rotation() {
        let (g, forms) = helicoid_setup(24, 9);
        let a = reconstruct_surface(&g, &forms, &Anchor::standard(1.0), &ReconstructOptions::default())
            .unwrap();
        // identity
        let id = rigid_align(&a, &a).unwrap();
        assert!(id.max_deviation <= 1e-12);

        // pure translation
        let mut b = a.clone();
        let shift = Vector3::new(1.0, 2.0, 3.0);
        for p in b.positions.iter_mut() {
            *p += shift;
        }
        let al = rigid_align(&a, &b).unwrap();
        assert!((al.translation - shift).norm() <= 1e-12);
        assert!(al.max_deviation <= 1e-12);

        // 90-degree rotation about z
        let rot = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let mut c = a.clone();
        for p in c.positions.iter_mut() {
            *p = rot * *p;
        }
        let al = rigid_align(&a, &c).unwrap();
        assert!((al.rotation - rot).norm() <= 1e-10);
        assert!(al.max_deviation <= 1e-10);
    }

    #[test]
    fn reflection_stays_proper() {
        let (g, forms) = helicoid_setup(24, 9);
        let a = reconstruct_surface(&g, &forms, &Anchor::standard(1.0), &ReconstructOptions::default())
            .unwrap();
        let mut b = a.clone();
        for p in b.positions.iter_mut() {
            p.z = -p.z;
        }
        let al = rigid_align(&a, &b).unwrap();
        assert!(al.reflection_preferred);
        assert_relative_eq!(al.rotation.determinant(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn export_counts_and_roundtrip() {
        let (g, _) = helicoid_setup(16, 8);
        let forms = helicoid_form_grid(1.0, 0.0, 1.0, 10, 0.0, 0.5, 10);
        let mesh = reconstruct_surface(&g, &forms, &Anchor::standard(1.0), &ReconstructOptions::default())
            .unwrap();
        let dir = std::env::temp_dir().join("gclab-mesh-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.obj");
        export_mesh(&mesh, &path).unwrap();
        let (vs, ns, faces) = import_mesh_vertices(&path).unwrap();
        assert_eq!(vs.len(), 100);
        assert_eq!(ns.len(), 100);
        assert_eq!(faces, 81);
        for (v, p) in vs.iter().zip(mesh.positions.iter()) {
            assert_eq!(v, p, "vertex round trip must be bit-exact");
        }
        // determinism: exporting again yields identical bytes
        let path2 = dir.join("mesh2.obj");
        export_mesh(&mesh, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }
}
