//! Single-chart 2-D Riemannian surfaces with boundary.
//!
//! A surface is a chart rectangle, a metric callable and a boundary
//! descriptor. The bundled kinds cover the experiments: the Euclidean unit
//! disk (simple), a conformally scaled disk (simple, non-flat), a catenoid
//! band (negatively curved, trapping, boundary strictly convex) and custom
//! metrics given by expressions.

use crate::expr::Expr;
use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// Chart rectangle `[u_min, u_max] x [v_min, v_max]`.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    EuclideanDisk,
    ConformalDisk,
    CatenoidBand,
    Custom,
}

/// Boundary descriptor in chart coordinates. `implicit` is positive inside.
#[derive(Debug, Clone)]
pub enum Boundary {
    /// Circle of the given radius centred at the chart origin.
    Circle { radius: f64 },
    /// Two circles `u = +-u0`; the `v` coordinate is periodic.
    BandU { u0: f64, period: f64 },
    /// Axis-aligned rectangle (used by box-like custom surfaces).
    Rect(Rect),
}

type MetricFn = Arc<dyn Fn(f64, f64) -> [f64; 3] + Send + Sync>;
type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type ChristoffelFn = Arc<dyn Fn(f64, f64) -> [[[f64; 2]; 2]; 2] + Send + Sync>;

/// A 2-D Riemannian surface with boundary, in a single chart.
#[derive(Clone)]
pub struct Surface {
    pub kind: SurfaceKind,
    pub chart: Rect,
    pub boundary: Boundary,
    /// Period of the `v` coordinate, if the chart wraps around.
    pub periodic_v: Option<f64>,
    /// Whether the surface is flagged simple (polar charts allowed).
    pub simple: bool,
    /// Diameter estimate, used for the trapped-geodesic cap.
    pub diameter: f64,
    metric_fn: MetricFn,
    curvature_fn: Option<ScalarFn>,
    christoffel_fn: Option<ChristoffelFn>,
}

impl std::fmt::Debug for Surface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Surface")
            .field("kind", &self.kind)
            .field("boundary", &self.boundary)
            .field("simple", &self.simple)
            .finish()
    }
}

impl Surface {
    pub fn euclidean_disk() -> Surface {
        Self::euclidean_disk_radius(1.0)
    }

    /// Euclidean disk of arbitrary radius (radius > 1 gives the enlarged
    /// simple manifold `D` for polar charts).
    pub fn euclidean_disk_radius(radius: f64) -> Surface {
        Surface {
            kind: SurfaceKind::EuclideanDisk,
            chart: Rect {
                u_min: -radius,
                u_max: radius,
                v_min: -radius,
                v_max: radius,
            },
            boundary: Boundary::Circle { radius },
            periodic_v: None,
            simple: true,
            diameter: 2.0 * radius,
            metric_fn: Arc::new(|_, _| [1.0, 0.0, 1.0]),
            curvature_fn: Some(Arc::new(|_, _| 0.0)),
            christoffel_fn: Some(Arc::new(|_, _| [[[0.0; 2]; 2]; 2])),
        }
    }

    /// Disk with conformal metric `c(u,v) * (du^2 + dv^2)`, `c > 0`.
    pub fn conformal_disk(c: Expr, radius: f64) -> Surface {
        let c2 = c.clone();
        Surface {
            kind: SurfaceKind::ConformalDisk,
            chart: Rect {
                u_min: -radius,
                u_max: radius,
                v_min: -radius,
                v_max: radius,
            },
            boundary: Boundary::Circle { radius },
            periodic_v: None,
            simple: true,
            diameter: 2.0 * radius * 1.5,
            metric_fn: Arc::new(move |u, v| {
                let cv = c2.eval(0.0, u, v).re;
                [cv, 0.0, cv]
            }),
            curvature_fn: None,
            christoffel_fn: None,
        }
    }

    /// Default gentle conformal bump, keeping the disk simple.
    pub fn conformal_disk_default(radius: f64) -> Surface {
        let c = Expr::parse("1 + 0.25*exp(-(x*x + y*y)/0.45)").unwrap();
        Self::conformal_disk(c, radius)
    }

    /// Catenoid band: metric `cosh^2(u) (du^2 + dv^2)` on `[-u0, u0] x S^1`.
    ///
    /// Negatively curved with strictly convex boundary; the middle circle
    /// `u = 0` is a trapped geodesic, so the band is not simple. The ray
    /// transform is nonetheless injective here.
    pub fn catenoid_band(u0: f64) -> Surface {
        Surface {
            kind: SurfaceKind::CatenoidBand,
            chart: Rect {
                u_min: -u0,
                u_max: u0,
                v_min: 0.0,
                v_max: 2.0 * PI,
            },
            boundary: Boundary::BandU {
                u0,
                period: 2.0 * PI,
            },
            periodic_v: Some(2.0 * PI),
            simple: false,
            diameter: 2.0 * PI * u0.cosh(),
            metric_fn: Arc::new(|u, _| {
                let c = u.cosh() * u.cosh();
                [c, 0.0, c]
            }),
            curvature_fn: Some(Arc::new(|u: f64, _| -1.0 / u.cosh().powi(4))),
            // conformal factor cosh^2(u): all symbols reduce to tanh(u),
            // which vanishes exactly on the middle circle so the unstable
            // trapped geodesic stays trapped under integration.
            christoffel_fn: Some(Arc::new(|u: f64, _| {
                let th = u.tanh();
                let mut g = [[[0.0; 2]; 2]; 2];
                g[0][0][0] = th; // Gamma^u_uu
                g[0][1][1] = -th; // Gamma^u_vv
                g[1][0][1] = th; // Gamma^v_uv
                g[1][1][0] = th;
                g
            })),
        }
    }

    /// Custom surface from metric-entry expressions over chart coords `(x, y)`.
    pub fn custom(
        g11: Expr,
        g12: Expr,
        g22: Expr,
        boundary: Boundary,
        periodic_v: Option<f64>,
        simple: bool,
    ) -> Surface {
        let chart = match &boundary {
            Boundary::Circle { radius } => Rect {
                u_min: -radius,
                u_max: *radius,
                v_min: -radius,
                v_max: *radius,
            },
            Boundary::BandU { u0, period } => Rect {
                u_min: -u0,
                u_max: *u0,
                v_min: 0.0,
                v_max: *period,
            },
            Boundary::Rect(r) => *r,
        };
        let diameter = ((chart.u_max - chart.u_min).powi(2)
            + (chart.v_max - chart.v_min).powi(2))
        .sqrt()
            * 2.0;
        Surface {
            kind: SurfaceKind::Custom,
            chart,
            boundary,
            periodic_v,
            simple,
            diameter,
            metric_fn: Arc::new(move |u, v| {
                [
                    g11.eval(0.0, u, v).re,
                    g12.eval(0.0, u, v).re,
                    g22.eval(0.0, u, v).re,
                ]
            }),
            curvature_fn: None,
            christoffel_fn: None,
        }
    }

    /// Wrap the `v` coordinate into its fundamental domain.
    pub fn wrap(&self, p: [f64; 2]) -> [f64; 2] {
        match self.periodic_v {
            Some(period) => [p[0], p[1].rem_euclid(period)],
            None => p,
        }
    }

    /// Periodic-aware chart displacement `a - b`.
    pub fn displacement(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut d = [a[0] - b[0], a[1] - b[1]];
        if let Some(period) = self.periodic_v {
            d[1] -= (d[1] / period).round() * period;
        }
        d
    }

    /// Metric entries `[g11, g12, g22]` at a chart point.
    pub fn metric(&self, u: f64, v: f64) -> [f64; 3] {
        (self.metric_fn)(u, v)
    }

    /// Metric with a positive-definiteness check.
    pub fn metric_checked(&self, u: f64, v: f64) -> Result<[f64; 3]> {
        let g = self.metric(u, v);
        let det = g[0] * g[2] - g[1] * g[1];
        let tr = g[0] + g[2];
        let min_eig = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
        if !(min_eig > 0.0) || !det.is_finite() {
            return Err(Error::Geometry(format!(
                "metric not positive definite at ({u:.4}, {v:.4}): min eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(g)
    }

    pub fn metric_det(&self, u: f64, v: f64) -> f64 {
        let g = self.metric(u, v);
        g[0] * g[2] - g[1] * g[1]
    }

    /// Inverse metric entries `[g^11, g^12, g^22]`.
    pub fn metric_inv(&self, u: f64, v: f64) -> [f64; 3] {
        let g = self.metric(u, v);
        let det = g[0] * g[2] - g[1] * g[1];
        [g[2] / det, -g[1] / det, g[0] / det]
    }

    pub fn inner(&self, p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
        let g = self.metric(p[0], p[1]);
        g[0] * a[0] * b[0] + g[1] * (a[0] * b[1] + a[1] * b[0]) + g[2] * a[1] * b[1]
    }

    pub fn norm(&self, p: [f64; 2], a: [f64; 2]) -> f64 {
        self.inner(p, a, a).max(0.0).sqrt()
    }

    /// Finite-difference step used for metric derivatives.
    pub fn h_fd(&self) -> f64 {
        let scale = (self.chart.u_max - self.chart.u_min)
            .max(self.chart.v_max - self.chart.v_min)
            .max(1.0);
        1e-4 * scale.sqrt()
    }

    /// Christoffel symbols `Gamma^k_{ij}` at a chart point, `out[k][i][j]`.
    ///
    /// Closed-form for the presets; otherwise metric derivatives by
    /// 4th-order central differences so the geodesic integrator's own
    /// 4th-order convergence is not floored by them.
    pub fn christoffel(&self, u: f64, v: f64) -> [[[f64; 2]; 2]; 2] {
        if let Some(f) = &self.christoffel_fn {
            return f(u, v);
        }
        self.christoffel_fd(u, v)
    }

    /// Finite-difference Christoffel symbols (also the oracle for presets).
    pub fn christoffel_fd(&self, u: f64, v: f64) -> [[[f64; 2]; 2]; 2] {
        let h = self.h_fd();
        let gp = |du: f64, dv: f64| self.metric(u + du, v + dv);
        let g0 = gp(0.0, 0.0);
        let d4 = |p2: [f64; 3], p1: [f64; 3], m1: [f64; 3], m2: [f64; 3]| {
            let mut out = [0.0; 3];
            for k in 0..3 {
                out[k] = (-p2[k] + 8.0 * p1[k] - 8.0 * m1[k] + m2[k]) / (12.0 * h);
            }
            out
        };
        let du = d4(gp(2.0 * h, 0.0), gp(h, 0.0), gp(-h, 0.0), gp(-2.0 * h, 0.0));
        let dv = d4(gp(0.0, 2.0 * h), gp(0.0, h), gp(0.0, -h), gp(0.0, -2.0 * h));
        // dg[l][i][j] = d_l g_{ij}
        let unpack = |g: [f64; 3]| [[g[0], g[1]], [g[1], g[2]]];
        let dg = [unpack(du), unpack(dv)];
        let det = g0[0] * g0[2] - g0[1] * g0[1];
        let ginv = [[g0[2] / det, -g0[1] / det], [-g0[1] / det, g0[0] / det]];
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for l in 0..2 {
                        acc += ginv[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
                    }
                    gamma[k][i][j] = 0.5 * acc;
                }
            }
        }
        gamma
    }

    /// Gauss curvature; analytic for presets, finite differences otherwise.
    pub fn curvature(&self, u: f64, v: f64) -> f64 {
        match &self.curvature_fn {
            Some(f) => f(u, v),
            None => self.curvature_fd(u, v),
        }
    }

    /// Finite-difference Gauss curvature from `K = R_1212 / det g`.
    pub fn curvature_fd(&self, u: f64, v: f64) -> f64 {
        let h = 1e-4 * self.diameter.max(1.0);
        let gamma = |du: f64, dv: f64| self.christoffel(u + du, v + dv);
        let g0 = gamma(0.0, 0.0);
        let gu = {
            let a = gamma(h, 0.0);
            let b = gamma(-h, 0.0);
            diff3(&a, &b, 2.0 * h)
        };
        let gv = {
            let a = gamma(0.0, h);
            let b = gamma(0.0, -h);
            diff3(&a, &b, 2.0 * h)
        };
        let dgamma = [gu, gv];
        // R^l_{212}: R(d_u, d_v)d_v component along l, i = u(0), j = v(1), k = v(1)
        let mut r = [0.0; 2];
        for (l, rl) in r.iter_mut().enumerate() {
            let mut acc = dgamma[0][l][1][1] - dgamma[1][l][0][1];
            for m in 0..2 {
                acc += g0[l][0][m] * g0[m][1][1] - g0[l][1][m] * g0[m][0][1];
            }
            *rl = acc;
        }
        let g = self.metric(u, v);
        let det = g[0] * g[2] - g[1] * g[1];
        // R_{1212} = g_{1l} R^l_{212}
        let r1212 = g[0] * r[0] + g[1] * r[1];
        r1212 / det
    }

    /// Whether the chart point lies strictly inside the surface.
    pub fn inside(&self, p: [f64; 2]) -> bool {
        self.boundary_implicit(p) > 0.0
    }

    /// Implicit boundary function: positive inside, zero on the boundary.
    pub fn boundary_implicit(&self, p: [f64; 2]) -> f64 {
        match &self.boundary {
            Boundary::Circle { radius } => radius * radius - p[0] * p[0] - p[1] * p[1],
            Boundary::BandU { u0, .. } => u0 - p[0].abs(),
            Boundary::Rect(r) => {
                let a = p[0] - r.u_min;
                let b = r.u_max - p[0];
                let c = p[1] - r.v_min;
                let d = r.v_max - p[1];
                a.min(b).min(c).min(d)
            }
        }
    }

    /// Chart gradient of the implicit function (points inward).
    fn boundary_implicit_grad(&self, p: [f64; 2]) -> [f64; 2] {
        match &self.boundary {
            Boundary::Circle { .. } => [-2.0 * p[0], -2.0 * p[1]],
            Boundary::BandU { .. } => [-p[0].signum(), 0.0],
            Boundary::Rect(r) => {
                let vals = [
                    (p[0] - r.u_min, [1.0, 0.0]),
                    (r.u_max - p[0], [-1.0, 0.0]),
                    (p[1] - r.v_min, [0.0, 1.0]),
                    (r.v_max - p[1], [0.0, -1.0]),
                ];
                vals.iter()
                    .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                    .unwrap()
                    .1
            }
        }
    }

    /// Outward g-unit normal (contravariant) at a boundary point.
    pub fn outward_normal(&self, p: [f64; 2]) -> [f64; 2] {
        let grad = self.boundary_implicit_grad(p);
        let ginv = self.metric_inv(p[0], p[1]);
        // raise index, flip sign (gradient points inward)
        let n = [
            -(ginv[0] * grad[0] + ginv[1] * grad[1]),
            -(ginv[1] * grad[0] + ginv[2] * grad[1]),
        ];
        let len = self.norm(p, n);
        [n[0] / len, n[1] / len]
    }

    /// g-unit boundary tangent (90-degree metric rotation of the normal).
    pub fn boundary_tangent(&self, p: [f64; 2]) -> [f64; 2] {
        let n = self.outward_normal(p);
        let g = self.metric(p[0], p[1]);
        let det = (g[0] * g[2] - g[1] * g[1]).sqrt();
        // covariant normal
        let n_cov = [g[0] * n[0] + g[1] * n[1], g[1] * n[0] + g[2] * n[1]];
        [n_cov[1] / det, -n_cov[0] / det]
    }

    /// Number of boundary components.
    pub fn boundary_component_count(&self) -> usize {
        match &self.boundary {
            Boundary::BandU { .. } => 2,
            _ => 1,
        }
    }

    /// Point on boundary component `comp` at curve parameter `s in [0, 1)`.
    pub fn boundary_point(&self, comp: usize, s: f64) -> [f64; 2] {
        match &self.boundary {
            Boundary::Circle { radius } => {
                let beta = 2.0 * PI * s;
                [radius * beta.cos(), radius * beta.sin()]
            }
            Boundary::BandU { u0, period } => {
                let u = if comp == 0 { -*u0 } else { *u0 };
                [u, s * period]
            }
            Boundary::Rect(r) => {
                let per = 2.0 * (r.u_max - r.u_min) + 2.0 * (r.v_max - r.v_min);
                let mut d = s * per;
                let w = r.u_max - r.u_min;
                let h = r.v_max - r.v_min;
                if d < w {
                    return [r.u_min + d, r.v_min];
                }
                d -= w;
                if d < h {
                    return [r.u_max, r.v_min + d];
                }
                d -= h;
                if d < w {
                    return [r.u_max - d, r.v_max];
                }
                d -= w;
                [r.u_min, r.v_max - d]
            }
        }
    }
}

fn diff3(a: &[[[f64; 2]; 2]; 2], b: &[[[f64; 2]; 2]; 2], denom: f64) -> [[[f64; 2]; 2]; 2] {
    let mut out = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                out[k][i][j] = (a[k][i][j] - b[k][i][j]) / denom;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_metric_identity() {
        let m = Surface::euclidean_disk();
        assert_eq!(m.metric(0.3, -0.2), [1.0, 0.0, 1.0]);
        assert!(m.inside([0.5, 0.5]));
        assert!(!m.inside([0.8, 0.7]));
    }

    #[test]
    fn catenoid_curvature_matches_fd() {
        let m = Surface::catenoid_band(1.0);
        for &(u, v) in &[(0.0f64, 1.0f64), (0.4, 2.0), (-0.7, 0.3)] {
            let exact = -1.0 / u.cosh().powi(4);
            let fd = m.curvature_fd(u, v);
            assert!((exact - fd).abs() < 1e-5, "u={u}: {exact} vs {fd}");
        }
    }

    #[test]
    fn conformal_disk_curvature_fd_vs_formula() {
        // K = -Delta0(log c) / (2 c) for a conformal metric c * euclidean.
        let m = Surface::conformal_disk_default(1.0);
        let c = |u: f64, v: f64| 1.0 + 0.25 * (-(u * u + v * v) / 0.45).exp();
        let h = 1e-4;
        for &(u, v) in &[(0.0, 0.0), (0.3, -0.2), (-0.5, 0.1)] {
            let lc = |a: f64, b: f64| c(a, b).ln();
            let lap = (lc(u + h, v) + lc(u - h, v) + lc(u, v + h) + lc(u, v - h)
                - 4.0 * lc(u, v))
                / (h * h);
            let want = -lap / (2.0 * c(u, v));
            let got = m.curvature(u, v);
            assert!((want - got).abs() < 1e-4, "({u},{v}): {want} vs {got}");
        }
    }

    #[test]
    fn catenoid_christoffels_match_fd() {
        let m = Surface::catenoid_band(1.0);
        for &(u, v) in &[(0.3f64, 1.0f64), (-0.6, 4.0)] {
            let exact = m.christoffel(u, v);
            let fd = m.christoffel_fd(u, v);
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(
                            (exact[k][i][j] - fd[k][i][j]).abs() < 1e-7,
                            "Gamma^{k}_{i}{j}: {} vs {}",
                            exact[k][i][j],
                            fd[k][i][j]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn normals_are_unit_and_outward() {
        let m = Surface::catenoid_band(0.8);
        let p = m.boundary_point(1, 0.25);
        let n = m.outward_normal(p);
        assert!((m.norm(p, n) - 1.0).abs() < 1e-12);
        // stepping outward leaves the band
        assert!(!m.inside([p[0] + 1e-3 * n[0], p[1] + 1e-3 * n[1]]));
        let t = m.boundary_tangent(p);
        assert!(m.inner(p, n, t).abs() < 1e-12);
        assert!((m.norm(p, t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metric_pd_check_catches_degenerate() {
        let g11 = Expr::parse("x").unwrap(); // negative for x < 0
        let g12 = Expr::parse("0").unwrap();
        let g22 = Expr::parse("1").unwrap();
        let m = Surface::custom(
            g11,
            g12,
            g22,
            Boundary::Circle { radius: 1.0 },
            None,
            false,
        );
        assert!(m.metric_checked(-0.5, 0.0).is_err());
        assert!(m.metric_checked(0.5, 0.0).is_ok());
    }
}
