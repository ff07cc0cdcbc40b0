//! Fermi coordinates along a geodesic segment.
//!
//! A chart is built by shooting g-unit normal geodesics off the base
//! geodesic (the normal frame is automatically parallel in 2-D) and pulling
//! the metric back. In these coordinates the metric is exactly
//! `E(t,y) dt^2 + dy^2`; on the geodesic `E = 1` and its first y-derivative
//! vanishes. The Taylor coefficients of `E` in `y` come from the Jacobi
//! recursion driven by the Gauss curvature along the normal rays, and
//! `F(t) = -K(gamma(t))` is the Riccati driver extracted from the second
//! derivative of `g^{11}`.

use super::geodesic::{trace_free, GeodesicPath};
use super::surface::Surface;
use crate::util::series;
use crate::{Error, Result};
use num_complex::Complex64;

/// Fermi chart over `t in [t_lo, t_hi]`, `|y| <= halfwidth`.
#[derive(Debug, Clone)]
pub struct FermiChart {
    pub t_grid: Vec<f64>,
    pub dt: f64,
    pub halfwidth: f64,
    pub y_grid: Vec<f64>,
    /// Chart positions `P[i][j]` at `(t_i, y_j)`.
    pub positions: Vec<Vec<[f64; 2]>>,
    /// d/dy of the chart position (unit tangent of the normal ray).
    pub y_velocity: Vec<Vec<[f64; 2]>>,
    /// Base geodesic data at the t-nodes.
    pub center: Vec<[f64; 2]>,
    pub tangent: Vec<[f64; 2]>,
    pub normal: Vec<[f64; 2]>,
    /// Per-node Taylor coefficients of `E(t, .)` up to `order`.
    pub e_series: Vec<Vec<f64>>,
    /// Per-node Taylor coefficients of `1/E(t, .)`.
    pub einv_series: Vec<Vec<f64>>,
    /// Riccati driver `F(t) = -K(gamma(t))` (scalar since dim M0 = 2).
    pub f_matrix: Vec<f64>,
    pub order: usize,
}

/// Build a Fermi chart for `gamma` restricted to `[t_lo, t_hi]`.
///
/// `order` is the highest y-power retained in the metric expansion. Fold or
/// conjugate-point detection within the halfwidth fails with a chart-width
/// error suggesting a smaller width.
pub fn fermi_chart(
    m: &Surface,
    gamma: &GeodesicPath,
    t_lo: f64,
    t_hi: f64,
    halfwidth: f64,
    order: usize,
    dt: f64,
) -> Result<FermiChart> {
    assert!(t_hi > t_lo && halfwidth > 0.0);
    let n_t = ((t_hi - t_lo) / dt).ceil() as usize + 1;
    let dt = (t_hi - t_lo) / (n_t - 1) as f64;
    let n_y = 33.max(2 * ((halfwidth / 0.01).ceil() as usize / 2) + 1);
    let y_grid: Vec<f64> = (0..n_y)
        .map(|j| -halfwidth + 2.0 * halfwidth * j as f64 / (n_y - 1) as f64)
        .collect();

    let mut t_nodes = Vec::with_capacity(n_t);
    let mut center = Vec::with_capacity(n_t);
    let mut tangent = Vec::with_capacity(n_t);
    let mut normal = Vec::with_capacity(n_t);
    let mut positions = Vec::with_capacity(n_t);
    let mut y_velocity = Vec::with_capacity(n_t);
    let mut e_series = Vec::with_capacity(n_t);
    let mut einv_series = Vec::with_capacity(n_t);
    let mut f_matrix = Vec::with_capacity(n_t);

    // stencil for fitting K(y) by a polynomial of degree `order`
    let k_deg = order.max(2);
    let stencil_n = 2 * k_deg + 1;
    let h_y = (halfwidth * 0.45).min(0.06);

    for i in 0..n_t {
        let t = t_lo + i as f64 * dt;
        let (p, v) = gamma.at(t);
        // renormalize the interpolated tangent
        let sp = m.norm(p, v);
        let v = [v[0] / sp, v[1] / sp];
        let n_vec = unit_normal(m, p, v);
        t_nodes.push(t);
        center.push(p);
        tangent.push(v);
        normal.push(n_vec);

        // normal ray through p, both directions
        let step = (halfwidth / 24.0).min(2e-3);
        let plus = trace_free(m, p, n_vec, halfwidth.max(h_y * (k_deg as f64 + 1.0)), step)?;
        let minus = trace_free(
            m,
            p,
            [-n_vec[0], -n_vec[1]],
            halfwidth.max(h_y * (k_deg as f64 + 1.0)),
            step,
        )?;
        let ray_at = |y: f64| -> ([f64; 2], [f64; 2]) {
            if y >= 0.0 {
                let (q, w) = plus.at(y);
                (q, w)
            } else {
                let (q, w) = minus.at(-y);
                (q, [-w[0], -w[1]])
            }
        };

        positions.push(y_grid.iter().map(|&y| ray_at(y).0).collect());
        y_velocity.push(y_grid.iter().map(|&y| ray_at(y).1).collect());

        // curvature Taylor along the normal ray
        let k_samples: Vec<f64> = (0..stencil_n)
            .map(|j| {
                let y = (j as f64 - k_deg as f64) * h_y;
                let (q, _) = ray_at(y);
                m.curvature(q[0], q[1])
            })
            .collect();
        let k_coeffs = poly_fit(&k_samples, h_y, k_deg);

        // Jacobi recursion: j'' = -K(y) j, j(0)=1, j'(0)=0; E = j^2
        let mut a = vec![0.0f64; order + 1];
        a[0] = 1.0;
        for mth in 0..order.saturating_sub(1) {
            let mut acc = 0.0;
            for l in 0..=mth.min(k_deg) {
                acc += k_coeffs[l] * a[mth - l];
            }
            a[mth + 2] = -acc / ((mth + 2) as f64 * (mth + 1) as f64);
        }
        // E = j^2, e = 1/E as real series
        let ac: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let e_c = series::mul(&ac, &ac, order + 1);
        let einv_c = series::inv(&e_c, order + 1);
        e_series.push(e_c.iter().map(|z| z.re).collect());
        einv_series.push(einv_c.iter().map(|z| z.re).collect());
        f_matrix.push(-k_coeffs[0]);

        // fold detection: j must stay positive across the halfwidth
        let j_edge_plus = series::eval(&ac, halfwidth).re;
        let j_edge_minus = series::eval(&ac, -halfwidth).re;
        if j_edge_plus <= 0.1 || j_edge_minus <= 0.1 {
            return Err(Error::ChartWidth(
                format!("normal rays focus within |y| <= {halfwidth} near t = {t:.3}"),
                halfwidth / 2.0,
            ));
        }
    }

    let chart = FermiChart {
        t_grid: t_nodes,
        dt,
        halfwidth,
        y_grid,
        positions,
        y_velocity,
        center,
        tangent,
        normal,
        e_series,
        einv_series,
        f_matrix,
        order,
    };
    chart.validate(m)?;
    Ok(chart)
}

/// g-unit normal obtained by metric rotation of the unit tangent.
fn unit_normal(m: &Surface, p: [f64; 2], v: [f64; 2]) -> [f64; 2] {
    let g = m.metric(p[0], p[1]);
    let det = (g[0] * g[2] - g[1] * g[1]).sqrt();
    let v_cov = [g[0] * v[0] + g[1] * v[1], g[1] * v[0] + g[2] * v[1]];
    [-v_cov[1] / det, v_cov[0] / det]
}

/// Least-squares polynomial fit on a symmetric stencil; returns Taylor
/// coefficients `c_l` with `f(y) ~ sum c_l y^l`.
fn poly_fit(samples: &[f64], h: f64, deg: usize) -> Vec<f64> {
    let n = samples.len();
    let c = (n - 1) / 2;
    // Vandermonde in the scaled variable y/h for conditioning
    let mut vand = nalgebra::DMatrix::<f64>::zeros(n, deg + 1);
    for (row, _) in samples.iter().enumerate() {
        let yh = row as f64 - c as f64;
        for col in 0..=deg {
            vand[(row, col)] = yh.powi(col as i32);
        }
    }
    let rhs = nalgebra::DVector::<f64>::from_column_slice(samples);
    let vt = vand.transpose();
    let normal = &vt * &vand;
    let b = vt * rhs;
    let sol = normal.lu().solve(&b).expect("well-conditioned Vandermonde fit");
    (0..=deg).map(|l| sol[l] / h.powi(l as i32)).collect()
}

impl FermiChart {
    /// Bilinear chart map `(t, y) -> chart point of M0`.
    pub fn point(&self, t: f64, y: f64) -> [f64; 2] {
        let (i, wt) = self.locate_t(t);
        let (j, wy) = self.locate_y(y);
        let p00 = self.positions[i][j];
        let p10 = self.positions[(i + 1).min(self.t_grid.len() - 1)][j];
        let p01 = self.positions[i][(j + 1).min(self.y_grid.len() - 1)];
        let p11 = self.positions[(i + 1).min(self.t_grid.len() - 1)]
            [(j + 1).min(self.y_grid.len() - 1)];
        let lerp = |a: [f64; 2], b: [f64; 2], w: f64| [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])];
        lerp(lerp(p00, p10, wt), lerp(p01, p11, wt), wy)
    }

    fn locate_t(&self, t: f64) -> (usize, f64) {
        let n = self.t_grid.len();
        let x = ((t - self.t_grid[0]) / self.dt).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        (i, x - i as f64)
    }

    fn locate_y(&self, y: f64) -> (usize, f64) {
        let n = self.y_grid.len();
        let dy = self.y_grid[1] - self.y_grid[0];
        let x = ((y - self.y_grid[0]) / dy).clamp(0.0, (n - 1) as f64);
        let j = (x.floor() as usize).min(n - 2);
        (j, x - j as f64)
    }

    /// `E(t, y)` from the stored Taylor series.
    pub fn e_metric(&self, t: f64, y: f64) -> f64 {
        let (i, w) = self.locate_t(t);
        let a = eval_real(&self.e_series[i], y);
        let b = eval_real(&self.e_series[(i + 1).min(self.t_grid.len() - 1)], y);
        a + w * (b - a)
    }

    /// Independent sample of `E` by finite differences of freshly shot
    /// normal rays (does not reuse the stored Taylor data).
    pub fn e_metric_fd(&self, m: &Surface, gamma: &GeodesicPath, t: f64, y: f64) -> Result<f64> {
        let h = 5e-4;
        let shoot = |tt: f64| -> Result<[f64; 2]> {
            let (p, v) = gamma.at(tt);
            let sp = m.norm(p, v);
            let v = [v[0] / sp, v[1] / sp];
            let nv = unit_normal(m, p, v);
            let dir = if y >= 0.0 { nv } else { [-nv[0], -nv[1]] };
            let ray = trace_free(m, p, dir, y.abs().max(1e-6), (y.abs() / 200.0).max(1e-5))?;
            Ok(ray.at(y.abs()).0)
        };
        let qp = shoot(t + h)?;
        let qm = shoot(t - h)?;
        let q0 = shoot(t)?;
        let d = m.displacement(qp, qm);
        let dtv = [d[0] / (2.0 * h), d[1] / (2.0 * h)];
        Ok(m.inner(q0, dtv, dtv))
    }

    /// Riccati driver interpolated at arclength `t`.
    pub fn f_at(&self, t: f64) -> f64 {
        let (i, w) = self.locate_t(t);
        let a = self.f_matrix[i];
        let b = self.f_matrix[(i + 1).min(self.t_grid.len() - 1)];
        a + w * (b - a)
    }

    /// Invert the chart map near the tube: find `(t, y)` with `point(t,y) = p`.
    pub fn invert(&self, m: &Surface, p: [f64; 2]) -> Option<(f64, f64)> {
        // nearest grid node
        let mut best = (0usize, 0usize, f64::INFINITY);
        for i in 0..self.t_grid.len() {
            for j in 0..self.y_grid.len() {
                let d = m.displacement(p, self.positions[i][j]);
                let dist = d[0] * d[0] + d[1] * d[1];
                if dist < best.2 {
                    best = (i, j, dist);
                }
            }
        }
        let mut t = self.t_grid[best.0];
        let mut y = self.y_grid[best.1];
        // Newton on the chart map with FD Jacobian
        for _ in 0..30 {
            let q = self.point(t, y);
            let r = m.displacement(p, q);
            if (r[0] * r[0] + r[1] * r[1]).sqrt() < 1e-11 {
                return Some((t, y));
            }
            let h = 1e-6;
            let qt = self.point(t + h, y);
            let qy = self.point(t, y + h);
            let jt = [(qt[0] - q[0]) / h, (qt[1] - q[1]) / h];
            let jy = [(qy[0] - q[0]) / h, (qy[1] - q[1]) / h];
            let det = jt[0] * jy[1] - jt[1] * jy[0];
            if det.abs() < 1e-14 {
                return None;
            }
            let dt_step = (r[0] * jy[1] - r[1] * jy[0]) / det;
            let dy_step = (jt[0] * r[1] - jt[1] * r[0]) / det;
            t += dt_step;
            y += dy_step;
            if y.abs() > 2.0 * self.halfwidth
                || t < self.t_grid[0] - 5.0 * self.dt
                || t > *self.t_grid.last().unwrap() + 5.0 * self.dt
            {
                return None;
            }
        }
        None
    }

    /// Chart-quality checks: unit normal speed, orthogonality, `E(.,0) = 1`
    /// and vanishing first y-derivative on the geodesic.
    fn validate(&self, m: &Surface) -> Result<()> {
        let n_t = self.t_grid.len();
        let j0 = self.y_grid.len() / 2;
        let mut worst_orth = 0.0f64;
        for i in (1..n_t - 1).step_by((n_t / 16).max(1)) {
            for j in (0..self.y_grid.len()).step_by(8) {
                let p = self.positions[i][j];
                let dv = self.y_velocity[i][j];
                let dp = m.displacement(self.positions[i + 1][j], self.positions[i - 1][j]);
                let dtv = [dp[0] / (2.0 * self.dt), dp[1] / (2.0 * self.dt)];
                worst_orth = worst_orth.max(m.inner(p, dtv, dv).abs());
            }
        }
        if worst_orth > 5e-3 {
            return Err(Error::ChartWidth(
                format!("Fermi orthogonality defect {worst_orth:.2e}"),
                self.halfwidth / 2.0,
            ));
        }
        for i in 0..n_t {
            let e0 = self.e_series[i][0];
            let e1 = self.e_series[i].get(1).copied().unwrap_or(0.0);
            if (e0 - 1.0).abs() > 1e-8 || e1.abs() > 1e-8 {
                return Err(Error::Geometry(format!(
                    "Fermi metric not normalized on the geodesic: E(t,0)={e0}, dE={e1}"
                )));
            }
        }
        let _ = j0;
        Ok(())
    }
}

fn eval_real(coeffs: &[f64], y: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * y + c;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geodesic::geodesic_trace;

    #[test]
    fn flat_disk_chart_is_trivial() {
        let m = Surface::euclidean_disk();
        let path = geodesic_trace(&m, [-1.0, 0.0], [1.0, 0.0], 1e-3).unwrap();
        let chart = fermi_chart(&m, &path, 0.1, 1.9, 0.2, 4, 0.02).unwrap();
        for f in &chart.f_matrix {
            assert!(f.abs() < 1e-9, "F = {f}");
        }
        for es in &chart.e_series {
            assert!((es[0] - 1.0).abs() < 1e-12);
            for c in &es[1..] {
                assert!(c.abs() < 1e-7);
            }
        }
    }

    #[test]
    fn catenoid_f_equals_minus_curvature() {
        let m = Surface::catenoid_band(1.0);
        let path = geodesic_trace(&m, [-1.0, 0.5], [1.0, 0.4], 1e-3).unwrap();
        let t_hi = path.exit_time.unwrap() - 0.05;
        let chart = fermi_chart(&m, &path, 0.05, t_hi, 0.15, 4, 0.02).unwrap();
        for (i, &t) in chart.t_grid.iter().enumerate() {
            let (p, _) = path.at(t);
            let k = m.curvature(p[0], p[1]);
            assert!(
                (chart.f_matrix[i] + k).abs() < 1e-3,
                "t={t}: F={} vs -K={}",
                chart.f_matrix[i],
                -k
            );
        }
    }

    #[test]
    fn sphere_cap_f_is_minus_one() {
        // round-sphere patch of curvature K = 1: c = 4 / (1 + u^2 + v^2)^2
        let c = crate::expr::Expr::parse("4/((1 + x*x + y*y)^2)").unwrap();
        let m = Surface::conformal_disk(c, 0.6);
        let path = geodesic_trace(&m, [-0.55, 0.02], [1.0, 0.1], 5e-4).unwrap();
        let t_hi = path.exit_time.unwrap() - 0.05;
        let chart = fermi_chart(&m, &path, 0.05, t_hi, 0.1, 3, 0.02).unwrap();
        for &f in &chart.f_matrix {
            assert!((f + 1.0).abs() < 1e-3, "F = {f}");
        }
    }

    #[test]
    fn metric_taylor_third_order() {
        // |E_fd - E_taylor2| should shrink like |y|^3
        let m = Surface::catenoid_band(1.0);
        let path = geodesic_trace(&m, [-1.0, 0.2], [1.0, 0.25], 1e-3).unwrap();
        let t_hi = path.exit_time.unwrap() - 0.1;
        let chart = fermi_chart(&m, &path, 0.1, t_hi, 0.24, 5, 0.02).unwrap();
        let i = chart.t_grid.len() / 2;
        let t = chart.t_grid[i];
        let mut ys = Vec::new();
        let mut errs = Vec::new();
        for &y in &[0.05, 0.1, 0.15, 0.2] {
            let e_fd = chart.e_metric_fd(&m, &path, t, y).unwrap();
            let e2 = chart.e_series[i][0] + chart.e_series[i][2] * y * y;
            ys.push(y);
            errs.push((e_fd - e2).abs().max(1e-14));
        }
        let slope = crate::util::quad::loglog_slope(&ys, &errs);
        assert!(slope >= 2.7, "fitted exponent {slope}");
    }

    #[test]
    fn fold_detection_on_sphere() {
        // strongly curved cap focuses normal rays; wide chart must fail
        let c = crate::expr::Expr::parse("16/((1 + 4*(x*x + y*y))^2)").unwrap();
        let mut m = Surface::conformal_disk(c, 0.9);
        m.simple = false;
        let path = geodesic_trace(&m, [-0.85, 0.0], [1.0, 0.0], 5e-4).unwrap();
        let t_hi = path.exit_time.unwrap() - 0.05;
        let wide = fermi_chart(&m, &path, 0.05, t_hi, 1.4, 3, 0.05);
        assert!(matches!(wide, Err(Error::ChartWidth(_, _))));
    }

    #[test]
    fn invert_roundtrip() {
        let m = Surface::catenoid_band(1.0);
        let path = geodesic_trace(&m, [-1.0, 0.4], [1.0, 0.3], 1e-3).unwrap();
        let t_hi = path.exit_time.unwrap() - 0.1;
        let chart = fermi_chart(&m, &path, 0.1, t_hi, 0.2, 3, 0.02).unwrap();
        let (t0, y0) = (0.7, 0.11);
        let p = chart.point(t0, y0);
        let (t1, y1) = chart.invert(&m, p).expect("inversion converges");
        assert!((t0 - t1).abs() < 1e-6 && (y0 - y1).abs() < 1e-6, "{t1} {y1}");
    }
}
