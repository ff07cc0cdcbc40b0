//! Geodesic polar coordinates about an exterior center on a simple surface.

use super::geodesic::{trace_free, GeodesicPath};
use super::surface::{Surface, SurfaceKind};
use crate::{Error, Result};

/// Geodesic polar chart `(r, theta)` centred at a point of the enlarged
/// simple surface `D`. `r` is geodesic distance from the center; `theta`
/// the direction angle in a fixed orthonormal frame at the center.
pub struct PolarChart<'a> {
    pub surface: &'a Surface,
    pub center: [f64; 2],
    frame: ([f64; 2], [f64; 2]),
    ray_step: f64,
}

impl<'a> PolarChart<'a> {
    /// Build the chart; the surface must be flagged simple.
    pub fn new(d: &'a Surface, center: [f64; 2]) -> Result<Self> {
        if !d.simple {
            return Err(Error::Unsupported(
                "polar charts need a simple surface; use the Gaussian-beam path instead".into(),
            ));
        }
        // g-orthonormal frame at the center by Gram-Schmidt on chart axes
        let g = d.metric_checked(center[0], center[1])?;
        let e1 = [1.0 / g[0].sqrt(), 0.0];
        let w = [0.0, 1.0];
        let proj = d.inner(center, w, e1);
        let mut e2 = [w[0] - proj * e1[0], w[1] - proj * e1[1]];
        let len = d.norm(center, e2);
        e2 = [e2[0] / len, e2[1] / len];
        Ok(PolarChart {
            surface: d,
            center,
            frame: (e1, e2),
            ray_step: 1e-3,
        })
    }

    /// Initial direction for the polar angle `theta`.
    pub fn direction(&self, theta: f64) -> [f64; 2] {
        let (e1, e2) = self.frame;
        [
            theta.cos() * e1[0] + theta.sin() * e2[0],
            theta.cos() * e1[1] + theta.sin() * e2[1],
        ]
    }

    /// Radial geodesic at angle `theta`, traced to arclength `r_max`.
    pub fn ray(&self, theta: f64, r_max: f64) -> Result<GeodesicPath> {
        trace_free(
            self.surface,
            self.center,
            self.direction(theta),
            r_max,
            self.ray_step,
        )
    }

    /// Chart point of `(r, theta)`.
    pub fn point(&self, r: f64, theta: f64) -> Result<[f64; 2]> {
        if r == 0.0 {
            return Ok(self.center);
        }
        Ok(self.ray(theta, r)?.at(r).0)
    }

    /// `(r, theta)` of a chart point, by shooting.
    ///
    /// On the Euclidean disk this is exact; otherwise a coarse angular scan
    /// refined by golden-section on the miss distance.
    pub fn coords(&self, p: [f64; 2]) -> Result<(f64, f64)> {
        if self.surface.kind == SurfaceKind::EuclideanDisk {
            let d = [p[0] - self.center[0], p[1] - self.center[1]];
            return Ok((d[0].hypot(d[1]), d[1].atan2(d[0])));
        }
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let r_guess = self.surface.norm(self.center, d) * 2.0 + 0.5;
        let miss = |theta: f64| -> Result<(f64, f64)> {
            let ray = self.ray(theta, r_guess)?;
            let d2 = |i: usize| {
                let dd = self.surface.displacement(p, ray.points[i]);
                dd[0] * dd[0] + dd[1] * dd[1]
            };
            let mut i_min = 0;
            let mut best = f64::INFINITY;
            for i in 0..ray.len() {
                let d = d2(i);
                if d < best {
                    best = d;
                    i_min = i;
                }
            }
            // sub-node refinement: parabola through the three nodes at the min
            if i_min == 0 || i_min + 1 >= ray.len() {
                return Ok((best.sqrt(), ray.times[i_min]));
            }
            let (a, b, c) = (d2(i_min - 1), d2(i_min), d2(i_min + 1));
            let denom = a - 2.0 * b + c;
            let (dt, dmin) = if denom.abs() < 1e-30 {
                (0.0, b)
            } else {
                let s = 0.5 * (a - c) / denom;
                (s, b - 0.25 * (a - c) * s)
            };
            Ok((
                dmin.max(0.0).sqrt(),
                ray.times[i_min] + dt * ray.step,
            ))
        };
        // coarse scan
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for k in 0..64 {
            let theta = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / 64.0;
            let (m, r) = miss(theta)?;
            if m < best.0 {
                best = (m, theta, r);
            }
        }
        // golden-section refine
        let gr = 0.5 * (5.0f64.sqrt() - 1.0);
        let (mut a, mut b) = (best.1 - 0.15, best.1 + 0.15);
        let mut c = b - gr * (b - a);
        let mut d2 = a + gr * (b - a);
        let mut fc = miss(c)?;
        let mut fd = miss(d2)?;
        for _ in 0..48 {
            if fc.0 < fd.0 {
                b = d2;
                d2 = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = miss(c)?;
            } else {
                a = c;
                c = d2;
                fc = fd;
                d2 = a + gr * (b - a);
                fd = miss(d2)?;
            }
        }
        let theta = 0.5 * (a + b);
        let (_, r) = miss(theta)?;
        Ok((r, theta))
    }

    /// `sqrt(det g)` in polar coordinates: the g-length of the theta-Jacobi
    /// field `d(point)/d(theta)` (equals `r` on the Euclidean disk).
    pub fn sqrt_det(&self, r: f64, theta: f64) -> Result<f64> {
        let h = 1e-5;
        let p_plus = self.point(r, theta + h)?;
        let p_minus = self.point(r, theta - h)?;
        let p = self.point(r, theta)?;
        let d = self.surface.displacement(p_plus, p_minus);
        let j = [d[0] / (2.0 * h), d[1] / (2.0 * h)];
        Ok(self.surface.norm(p, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_distance() {
        let d = Surface::euclidean_disk_radius(1.6);
        let omega = [1.3, 0.0];
        let chart = PolarChart::new(&d, omega).unwrap();
        let (r, theta) = chart.coords([0.0, 0.4]).unwrap();
        let want = (1.3f64 * 1.3 + 0.16).sqrt();
        assert!((r - want).abs() < 1e-12);
        let p = chart.point(r, theta).unwrap();
        assert!((p[0] - 0.0).abs() < 1e-9 && (p[1] - 0.4).abs() < 1e-9);
    }

    #[test]
    fn gradient_of_r_is_unit_euclidean() {
        let d = Surface::euclidean_disk_radius(1.6);
        let chart = PolarChart::new(&d, [1.3, 0.0]).unwrap();
        let h = 1e-5;
        for &p in &[[0.0, 0.0], [0.2, -0.3], [-0.5, 0.1]] {
            let r = |q: [f64; 2]| chart.coords(q).unwrap().0;
            let grad = [
                (r([p[0] + h, p[1]]) - r([p[0] - h, p[1]])) / (2.0 * h),
                (r([p[0], p[1] + h]) - r([p[0], p[1] - h])) / (2.0 * h),
            ];
            let ginv = d.metric_inv(p[0], p[1]);
            let norm2 = ginv[0] * grad[0] * grad[0]
                + 2.0 * ginv[1] * grad[0] * grad[1]
                + ginv[2] * grad[1] * grad[1];
            assert!((norm2 - 1.0).abs() < 1e-6, "|grad r|^2 = {norm2}");
        }
    }

    #[test]
    fn eikonal_on_conformal_disk() {
        // psi = r solves |grad psi|_g = 1 with no x1 dependence by construction
        let d = Surface::conformal_disk_default(1.55);
        let chart = PolarChart::new(&d, [1.35, 0.0]).unwrap();
        let h = 2e-4;
        for &p in &[[0.0, 0.0], [0.3, 0.25]] {
            let r = |q: [f64; 2]| chart.coords(q).unwrap().0;
            let grad = [
                (r([p[0] + h, p[1]]) - r([p[0] - h, p[1]])) / (2.0 * h),
                (r([p[0], p[1] + h]) - r([p[0], p[1] - h])) / (2.0 * h),
            ];
            let ginv = d.metric_inv(p[0], p[1]);
            let norm2 = ginv[0] * grad[0] * grad[0]
                + 2.0 * ginv[1] * grad[0] * grad[1]
                + ginv[2] * grad[1] * grad[1];
            assert!((norm2 - 1.0).abs() < 2e-3, "|grad r|^2 = {norm2}");
        }
    }

    #[test]
    fn non_simple_rejected() {
        let band = Surface::catenoid_band(1.0);
        assert!(matches!(
            PolarChart::new(&band, [0.0, 0.0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn sqrt_det_on_disk_is_r() {
        let d = Surface::euclidean_disk_radius(2.0);
        let chart = PolarChart::new(&d, [1.5, 0.2]).unwrap();
        let s = chart.sqrt_det(0.8, 2.0).unwrap();
        assert!((s - 0.8).abs() < 1e-6, "sqrt det {s}");
    }
}
