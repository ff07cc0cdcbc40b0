//! The non-abelian transport `G` on `R x SM0` built from per-plane d-bar
//! solves: for each geodesic plane `(x1, r)` the two transport solutions
//! `C1` (d-bar equation for the first connection) and `C2` (the conjugate
//! equation for the second) combine to `G = C1 F C2*`, where the Plemelj
//! renormalization `F` pins `G` to the identity on the plane boundary.
//!
//! Velocity independence of `G` is the transform's injectivity statement;
//! it is measured on the output, never assumed.

use crate::bundle::connection::ConnectionField;
use crate::dbar::boundary::{winding_number, BoundaryTrace, PlemeljExtension};
use crate::dbar::cauchy::CauchyOp;
use crate::dbar::matrix::{solve_dbar_matrix_with, solve_dpartial_matrix_with};
use crate::dbar::plane::PlaneField;
use crate::geometry::geodesic::{geodesic_trace, trace_free};
use crate::geometry::Surface;
use crate::util::cmat::{self, CMat};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

type C = Complex64;

#[derive(Debug, Clone)]
pub struct NonabelianParams {
    /// Half-extent of the plane in `x1` (supports must fit inside).
    pub x1_half: f64,
    /// Plane grid resolution along `x1`.
    pub plane_nx: usize,
    /// Geodesic tracing step.
    pub geod_step: f64,
    /// Fixed-point iteration cap for the d-bar solves.
    pub max_iter: usize,
    /// Contour inset (in cells) for the Plemelj boundary trace.
    pub contour_inset: usize,
}

impl Default for NonabelianParams {
    fn default() -> Self {
        NonabelianParams {
            x1_half: 2.0,
            plane_nx: 192,
            geod_step: 2e-3,
            max_iter: 300,
            contour_inset: 3,
        }
    }
}

/// One solved geodesic plane.
pub struct PlaneSolve {
    /// `G = C1 F C2*` on the plane grid.
    pub g: PlaneField,
    /// 4th-order FD residual of the plane transport equation
    /// `2 dbar G + (A1_1 + i A1_r) G - G (A2_1 + i A2_r)`, relative L2.
    pub residual: f64,
    pub winding: i64,
    /// Arclength of the requested base point along this plane's geodesic.
    pub r_offset: f64,
}

/// Sampled `G(x1, x, v)` over a product grid.
pub struct VelocityField {
    pub rank: usize,
    pub x1_grid: Vec<f64>,
    pub base_points: Vec<[f64; 2]>,
    pub v_count: usize,
    /// `values[(b * v_count + iv) * nx1 + ix]`.
    pub values: Vec<CMat>,
    /// Max plane-equation residual over the solved planes.
    pub max_residual: f64,
}

impl VelocityField {
    pub fn at(&self, b: usize, iv: usize, ix: usize) -> &CMat {
        &self.values[(b * self.v_count + iv) * self.x1_grid.len() + ix]
    }
}

/// Plane-solve machinery for a fixed pair of connections over an enlarged
/// simple surface `D` containing the transversal manifold.
pub struct NonabelianTransport {
    pub d: Surface,
    pub a1: ConnectionField,
    pub a2: ConnectionField,
    pub params: NonabelianParams,
    cauchy: Arc<CauchyOp>,
    plane_ny: usize,
    r_len: f64,
}

impl NonabelianTransport {
    pub fn new(
        d: Surface,
        a1: ConnectionField,
        a2: ConnectionField,
        params: NonabelianParams,
    ) -> Result<Self> {
        if !d.simple {
            return Err(Error::Unsupported(
                "the non-abelian transform needs a simple enlarged surface".into(),
            ));
        }
        if a1.rank != a2.rank {
            return Err(Error::Gauge("rank mismatch".into()));
        }
        let r_len = d.diameter * 1.02;
        let nx = params.plane_nx;
        let dx = 2.0 * params.x1_half / (nx - 1) as f64;
        let ny = (r_len / dx).round() as usize + 1;
        let cauchy = Arc::new(CauchyOp::new(nx, ny, dx, r_len / (ny - 1) as f64));
        Ok(NonabelianTransport {
            d,
            a1,
            a2,
            params,
            cauchy,
            plane_ny: ny,
            r_len,
        })
    }

    /// Solve the plane through `(x, v)`: trace backwards to `∂D`, follow the
    /// full geodesic across `D`, solve both transport equations and
    /// renormalize through the Plemelj boundary extension.
    pub fn solve_plane(&self, x: [f64; 2], v: [f64; 2]) -> Result<PlaneSolve> {
        let speed = self.d.norm(x, v);
        let v = [v[0] / speed, v[1] / speed];
        // backwards to the influx boundary of D
        let back = geodesic_trace(&self.d, x, [-v[0], -v[1]], self.params.geod_step)?;
        let r_offset = back
            .exit_time
            .ok_or_else(|| Error::Trapped("backward trace hit the cap inside D".into()))?;
        let p = *back.points.last().unwrap();
        let w = *back.tangents.last().unwrap();
        // forward across D, extended to the uniform plane length
        let path = trace_free(&self.d, p, [-w[0], -w[1]], self.r_len, self.params.geod_step)?;

        let nx = self.params.plane_nx;
        let ny = self.plane_ny;
        let x0 = -self.params.x1_half;
        let dx = 2.0 * self.params.x1_half / (nx - 1) as f64;
        let dy = self.r_len / (ny - 1) as f64;
        let rank = self.a1.rank;

        // connection components along the plane
        let comp_at = |conn: &ConnectionField, x1: f64, r: f64| -> (CMat, CMat) {
            let (pt, tan) = path.at(r);
            let c = conn.at(x1, pt[0], pt[1]);
            let a_r = &c[1] * C::new(tan[0], 0.0) + &c[2] * C::new(tan[1], 0.0);
            (c[0].clone(), a_r)
        };
        let mut b1 = PlaneField::zeros(rank, nx, ny, x0, 0.0, dx, dy);
        let mut b2 = PlaneField::zeros(rank, nx, ny, x0, 0.0, dx, dy);
        for ix in 0..nx {
            for iy in 0..ny {
                let (x1, r) = b1.point(ix, iy);
                let (a11, a1r) = comp_at(&self.a1, x1, r);
                let (a21, a2r) = comp_at(&self.a2, x1, r);
                // dbar C1 = -1/2 (A1_1 + i A1_r) C1
                *b1.at_mut(ix, iy) = (a11 + a1r * C::new(0.0, 1.0)) * C::new(-0.5, 0.0);
                // d C2 / dz = 1/2 (-A2_1 + i A2_r) C2
                *b2.at_mut(ix, iy) = (a21 * C::new(-1.0, 0.0) + a2r * C::new(0.0, 1.0))
                    * C::new(0.5, 0.0);
            }
        }
        let c1 = self.solve_with_op(&b1, false)?;
        let c2 = self.solve_with_op(&b2, true)?;

        // boundary trace of C2* C1 on an inset rectangle, counterclockwise
        let inset = self.params.contour_inset;
        let mut zs: Vec<C> = Vec::new();
        let mut fs: Vec<CMat> = Vec::new();
        let push = |zs: &mut Vec<C>, fs: &mut Vec<CMat>, ix: usize, iy: usize| {
            let (x1, r) = c1.c.point(ix, iy);
            zs.push(C::new(x1, r));
            fs.push(c2.c.at(ix, iy).adjoint() * c1.c.at(ix, iy));
        };
        for ix in inset..nx - inset {
            push(&mut zs, &mut fs, ix, inset);
        }
        for iy in inset..ny - inset {
            push(&mut zs, &mut fs, nx - 1 - inset, iy);
        }
        for ix in (inset..nx - inset).rev() {
            push(&mut zs, &mut fs, ix, ny - 1 - inset);
        }
        for iy in (inset..ny - inset).rev() {
            push(&mut zs, &mut fs, inset, iy);
        }
        let dets: Vec<C> = fs.iter().map(cmat::det).collect();
        let winding = winding_number(&dets)?;
        if winding != 0 {
            return Err(Error::Dbar(format!(
                "argument-principle winding {winding} != 0 on the plane through \
                 ({:.3},{:.3}); renormalization is obstructed",
                x[0], x[1]
            )));
        }
        let trace = BoundaryTrace { z: zs, f: fs };
        let ring = 2.0 * dx.max(dy);
        // Plemelj extension of the trace itself (no holomorphy gate here:
        // for non-gauge-equivalent pairs the trace is genuinely not a
        // holomorphic restriction, and the interior Cauchy integral is
        // still the right renormalizer)
        let ext = PlemeljExtension::new_ungated(trace, ring);

        // G = C1 F C2* with F = (extension)^{-1}
        let mut g = PlaneField::zeros(rank, nx, ny, x0, 0.0, dx, dy);
        let mut min_det = f64::INFINITY;
        for ix in 0..nx {
            for iy in 0..ny {
                let (x1, r) = g.point(ix, iy);
                let fprime = ext.eval(C::new(x1, r));
                let det = cmat::det(&fprime).norm();
                min_det = min_det.min(det);
                let f = fprime.clone().try_inverse().ok_or_else(|| {
                    Error::Dbar(format!(
                        "renormalizer not invertible at ({x1:.3},{r:.3}) on plane \
                         through ({:.3},{:.3})",
                        x[0], x[1]
                    ))
                })?;
                *g.at_mut(ix, iy) = c1.c.at(ix, iy) * f * c2.c.at(ix, iy).adjoint();
            }
        }
        if min_det < 1e-6 {
            return Err(Error::Dbar(format!(
                "renormalizer nearly singular (min |det| = {min_det:.2e})"
            )));
        }

        // plane-equation residual: 2 dbar G + (A1)G - G(A2), 4th-order FD
        let dg = g.dbar_fd();
        let mut num = 0.0;
        let mut den = 0.0;
        for ix in (4..nx - 4).step_by(2) {
            for iy in (4..ny - 4).step_by(2) {
                let (x1, r) = g.point(ix, iy);
                let (a11, a1r) = comp_at(&self.a1, x1, r);
                let (a21, a2r) = comp_at(&self.a2, x1, r);
                let gv = g.at(ix, iy);
                let res = dg.at(ix, iy) * C::new(2.0, 0.0)
                    + (a11 + a1r * C::new(0.0, 1.0)) * gv
                    - gv * (a21 + a2r * C::new(0.0, 1.0));
                num += res.iter().map(|z| z.norm_sqr()).sum::<f64>();
                den += gv.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        let residual = (num / den.max(1e-300)).sqrt();
        Ok(PlaneSolve {
            g,
            residual,
            winding,
            r_offset,
        })
    }

    fn solve_with_op(
        &self,
        b: &PlaneField,
        conjugate: bool,
    ) -> Result<crate::dbar::matrix::DbarSolution> {
        if conjugate {
            solve_dpartial_matrix_with(&self.cauchy, b, None, self.params.max_iter)
        } else {
            solve_dbar_matrix_with(&self.cauchy, b, None, self.params.max_iter)
        }
    }

    /// Evaluate `G(x1, x, v)` for each `x1` in the grid.
    pub fn eval_line(&self, x: [f64; 2], v: [f64; 2], x1_grid: &[f64]) -> Result<Vec<CMat>> {
        let plane = self.solve_plane(x, v)?;
        Ok(x1_grid
            .iter()
            .map(|&x1| plane.g.interp(x1, plane.r_offset))
            .collect())
    }

    /// Sample the full velocity field over base points and a uniform fan of
    /// unit tangents, solving planes in parallel.
    pub fn field(
        &self,
        base_points: &[[f64; 2]],
        v_count: usize,
        x1_grid: &[f64],
    ) -> Result<VelocityField> {
        let jobs: Vec<(usize, usize)> = (0..base_points.len())
            .flat_map(|b| (0..v_count).map(move |iv| (b, iv)))
            .collect();
        let results: Vec<Result<(Vec<CMat>, f64)>> = jobs
            .par_iter()
            .map(|&(b, iv)| {
                let x = base_points[b];
                let theta = 2.0 * std::f64::consts::PI * iv as f64 / v_count as f64;
                // g-orthonormal frame at x
                let g = self.d.metric(x[0], x[1]);
                let e1 = [1.0 / g[0].sqrt(), 0.0];
                let w = [0.0, 1.0];
                let proj = self.d.inner(x, w, e1);
                let mut e2 = [w[0] - proj * e1[0], w[1] - proj * e1[1]];
                let len = self.d.norm(x, e2);
                e2 = [e2[0] / len, e2[1] / len];
                let v = [
                    theta.cos() * e1[0] + theta.sin() * e2[0],
                    theta.cos() * e1[1] + theta.sin() * e2[1],
                ];
                let plane = self.solve_plane(x, v)?;
                let line: Vec<CMat> = x1_grid
                    .iter()
                    .map(|&x1| plane.g.interp(x1, plane.r_offset))
                    .collect();
                Ok((line, plane.residual))
            })
            .collect();
        let nx1 = x1_grid.len();
        let mut values = vec![CMat::identity(self.a1.rank, self.a1.rank); jobs.len() * nx1];
        let mut max_residual = 0.0f64;
        for ((b, iv), res) in jobs.iter().zip(results) {
            let (line, residual) = res?;
            max_residual = max_residual.max(residual);
            for (ix, val) in line.into_iter().enumerate() {
                values[(b * v_count + iv) * nx1 + ix] = val;
            }
        }
        Ok(VelocityField {
            rank: self.a1.rank,
            x1_grid: x1_grid.to_vec(),
            base_points: base_points.to_vec(),
            v_count,
            values,
            max_residual,
        })
    }
}

/// Max over `(x1, x)` of the diameter of `{G(x1, x, v)}` over `v`.
pub fn velocity_dependence(field: &VelocityField) -> f64 {
    let nx1 = field.x1_grid.len();
    let mut worst = 0.0f64;
    for b in 0..field.base_points.len() {
        for ix in 0..nx1 {
            for iv in 0..field.v_count {
                for jv in (iv + 1)..field.v_count {
                    let d = cmat::norm(&(field.at(b, iv, ix) - field.at(b, jv, ix)));
                    worst = worst.max(d);
                }
            }
        }
    }
    worst
}

/// Collapse the velocity variable and check the gauge relation
/// `dG = -A1 G + G A2` by finite differences on the base grid.
///
/// Errors if the measured velocity dependence exceeds `tol`.
pub fn gauge_from_velocity_independent(
    transport: &NonabelianTransport,
    field: &VelocityField,
    tol: f64,
) -> Result<(Vec<CMat>, f64)> {
    let dep = velocity_dependence(field);
    if dep > tol {
        return Err(Error::VelocityDependent(dep, tol));
    }
    let nx1 = field.x1_grid.len();
    let mut collapsed = Vec::with_capacity(field.base_points.len() * nx1);
    for b in 0..field.base_points.len() {
        for ix in 0..nx1 {
            let mut acc = CMat::zeros(field.rank, field.rank);
            for iv in 0..field.v_count {
                acc += field.at(b, iv, ix);
            }
            collapsed.push(acc / C::new(field.v_count as f64, 0.0));
        }
    }
    // derivative check at the mid x1, mid base point, along chart directions
    let h = 0.08;
    let x1_mid = field.x1_grid[nx1 / 2];
    let mut worst = 0.0f64;
    for &base in field.base_points.iter().take(3) {
        let eval = |x: [f64; 2]| -> Result<CMat> {
            let g = transport.eval_line(x, [1.0, 0.37], &[x1_mid])?;
            Ok(g[0].clone())
        };
        let g0 = eval(base)?;
        let a1 = transport.a1.at(x1_mid, base[0], base[1]);
        let a2 = transport.a2.at(x1_mid, base[0], base[1]);
        for (dir, comp) in [([h, 0.0], 1usize), ([0.0, h], 2usize)] {
            let gp = eval([base[0] + dir[0], base[1] + dir[1]])?;
            let gm = eval([base[0] - dir[0], base[1] - dir[1]])?;
            let dg = (gp - gm) / C::new(2.0 * h, 0.0);
            let want = -&a1[comp] * &g0 + &g0 * &a2[comp];
            worst = worst.max(cmat::norm(&(dg - want)));
        }
        // x1 direction from the stored line
        if nx1 >= 3 {
            let line = transport.eval_line(base, [1.0, 0.37], &[
                x1_mid - h,
                x1_mid + h,
            ])?;
            let dg = (&line[1] - &line[0]) / C::new(2.0 * h, 0.0);
            let want = -&a1[0] * &g0 + &g0 * &a2[0];
            worst = worst.max(cmat::norm(&(dg - want)));
        }
    }
    Ok((collapsed, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc as StdArc;

    fn small_params() -> NonabelianParams {
        NonabelianParams {
            x1_half: 1.6,
            plane_nx: 96,
            geod_step: 4e-3,
            max_iter: 200,
            contour_inset: 3,
        }
    }

    /// Compactly supported scalar connection `A = i dp` restricted inside
    /// the unit disk, vanishing outside radius `rho`.
    fn bump_pair(amp: f64) -> (ConnectionField, ConnectionField) {
        let p = move |x1: f64, u: f64, v: f64| -> f64 {
            let d2 = x1 * x1 / 0.8 + (u * u + v * v) / 0.36;
            if d2 < 1.0 {
                amp * (-d2 / (1.0 - d2)).exp()
            } else {
                0.0
            }
        };
        let grad = move |x1: f64, u: f64, v: f64| -> [f64; 3] {
            let h = 1e-6;
            [
                (p(x1 + h, u, v) - p(x1 - h, u, v)) / (2.0 * h),
                (p(x1, u + h, v) - p(x1, u - h, v)) / (2.0 * h),
                (p(x1, u, v + h) - p(x1, u, v - h)) / (2.0 * h),
            ]
        };
        let a1 = ConnectionField::zero(1).with_support_x1(-1.0, 1.0);
        let a2 = ConnectionField::scalar_idp(StdArc::new(grad)).with_support_x1(-1.0, 1.0);
        (a1, a2)
    }

    #[test]
    fn identical_connections_give_identity() {
        let d = Surface::euclidean_disk_radius(1.6);
        let a = ConnectionField::random_smooth(1, 3, 0.3);
        let t = NonabelianTransport::new(d, a.clone(), a, small_params()).unwrap();
        let plane = t.solve_plane([0.2, 0.1], [0.6, 0.8]).unwrap();
        // away from the grid edge, G should be the identity
        let mut worst = 0.0f64;
        for ix in (8..plane.g.nx - 8).step_by(7) {
            for iy in (8..plane.g.ny - 8).step_by(7) {
                let d = cmat::norm(&(plane.g.at(ix, iy) - CMat::identity(1, 1)));
                worst = worst.max(d);
            }
        }
        assert!(worst < 5e-3, "max |G - I| = {worst}");
        assert!(plane.residual < 5e-3, "residual {}", plane.residual);
    }

    #[test]
    fn gauge_pair_is_velocity_independent() {
        // A2 = A1 + dp is gauge equivalent through psi = e^{ip}, psi = 1
        // outside; G should be velocity independent and equal psi^{-1}
        let (a1, a2) = bump_pair(0.12);
        let d = Surface::euclidean_disk_radius(1.6);
        let t = NonabelianTransport::new(d, a1, a2, small_params()).unwrap();
        let x1s = [0.0, 0.35];
        let field = t
            .field(&[[0.15, -0.1]], 6, &x1s)
            .expect("plane solves succeed");
        let dep = velocity_dependence(&field);
        assert!(dep < 2e-3, "velocity dependence {dep}");
        assert!(field.max_residual < 5e-3, "residual {}", field.max_residual);
        // A2 = +i dp is the pushforward of A1 = 0 by psi = e^{-ip}, so the
        // recovered gauge is G = psi^{-1} = e^{+ip}
        let p = |x1: f64, u: f64, v: f64| -> f64 {
            let d2 = x1 * x1 / 0.8 + (u * u + v * v) / 0.36;
            if d2 < 1.0 {
                0.12 * (-d2 / (1.0 - d2)).exp()
            } else {
                0.0
            }
        };
        for (ix, &x1) in x1s.iter().enumerate() {
            let want = (C::new(0.0, 1.0) * p(x1, 0.15, -0.1)).exp();
            let got = field.at(0, 0, ix)[(0, 0)];
            assert!(
                (got - want).norm() < 2e-3,
                "x1={x1}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn base_point_outside_support_gives_identity() {
        let (a1, a2) = bump_pair(0.12);
        let d = Surface::euclidean_disk_radius(1.6);
        let t = NonabelianTransport::new(d, a1, a2, small_params()).unwrap();
        // base point in R': outside the unit-disk region where A's live...
        // pick x with |x| between the support (0.6) and the boundary of M0
        let line = t.eval_line([0.0, 0.8], [1.0, 0.05], &[1.2]).unwrap();
        let defect = cmat::norm(&(line[0].clone() - CMat::identity(1, 1)));
        assert!(defect < 2e-3, "G - I outside support: {defect}");
    }
}
