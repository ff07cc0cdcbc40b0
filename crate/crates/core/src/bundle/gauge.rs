//! Gauge action on connections and the boundary normal gauge.

use super::connection::{ConnectionField, GaugeField};
use crate::geometry::geodesic::trace_free;
use crate::geometry::Surface;
use crate::util::cmat::{self, CMat};
use crate::{Error, Result};
use num_complex::Complex64;
use std::sync::Arc;

type C = Complex64;

/// Pushforward `psi * A = psi A psi^-1 - (d psi) psi^-1`, componentwise.
///
/// The output is exactly skew-Hermitized (projecting away finite-difference
/// symmetric noise in `d psi`), so it satisfies the connection invariant.
pub fn gauge_pushforward(a: &ConnectionField, psi: &GaugeField) -> Result<ConnectionField> {
    if a.rank != psi.rank {
        return Err(Error::Gauge(format!(
            "rank mismatch: connection {} vs gauge {}",
            a.rank, psi.rank
        )));
    }
    let defect = psi.unitary_defect_sampled(4, 1.0);
    if defect > 1e-10 {
        return Err(Error::Gauge(format!(
            "gauge not unitary: sampled defect {defect:.3e}"
        )));
    }
    let a2 = a.clone();
    let psi2 = psi.clone();
    let mut out = ConnectionField::new(
        a.rank,
        Arc::new(move |x1, u, v| {
            let comps = a2.at(x1, u, v);
            let p = psi2.at(x1, u, v);
            let pinv = p.adjoint();
            let dp = psi2.deriv(x1, u, v);
            let mut out: [CMat; 3] = std::array::from_fn(|k| {
                &p * &comps[k] * &pinv - &dp[k] * &pinv
            });
            for comp in &mut out {
                let skew = (&*comp - comp.adjoint()) * C::new(0.5, 0.0);
                *comp = skew;
            }
            out
        }),
    );
    out.support_x1 = a.support_x1;
    out.period_v = a.period_v;
    Ok(out)
}

/// Collar chart along `∂M₀`: inward normal geodesics off the boundary.
struct Collar {
    m: Surface,
    component: usize,
    /// boundary parameter samples and their inward rays
    s_grid: Vec<f64>,
    rays: Vec<crate::geometry::GeodesicPath>,
}

impl Collar {
    fn build(m: &Surface, component: usize, depth: f64) -> Result<Self> {
        let n_s = 256;
        let mut s_grid = Vec::with_capacity(n_s);
        let mut rays = Vec::with_capacity(n_s);
        for i in 0..n_s {
            let s = i as f64 / n_s as f64;
            let p = m.boundary_point(component, s);
            let nu = m.outward_normal(p);
            let ray = trace_free(m, p, [-nu[0], -nu[1]], depth, depth / 64.0)?;
            s_grid.push(s);
            rays.push(ray);
        }
        Ok(Collar {
            m: m.clone(),
            component,
            s_grid,
            rays,
        })
    }

    /// `(s, t)` of a chart point: boundary parameter and normal depth.
    /// Returns `None` outside the collar.
    fn locate(&self, p: [f64; 2], depth: f64) -> Option<(f64, f64)> {
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for (i, ray) in self.rays.iter().enumerate() {
            for (j, q) in ray.points.iter().enumerate() {
                let d = self.m.displacement(p, *q);
                let dist = d[0] * d[0] + d[1] * d[1];
                if dist < best.0 {
                    best = (dist, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let mut s = self.s_grid[i];
        let mut t = self.rays[i].times[j];
        // Newton refinement on the collar map
        for _ in 0..20 {
            let q = self.point(s, t);
            let r = self.m.displacement(p, q);
            if (r[0] * r[0] + r[1] * r[1]).sqrt() < 1e-10 {
                break;
            }
            let hs = 1e-5;
            let ht = 1e-5;
            let qs = self.point(s + hs, t);
            let qt = self.point(s, t + ht);
            let js = [(qs[0] - q[0]) / hs, (qs[1] - q[1]) / hs];
            let jt = [(qt[0] - q[0]) / ht, (qt[1] - q[1]) / ht];
            let det = js[0] * jt[1] - js[1] * jt[0];
            if det.abs() < 1e-14 {
                return None;
            }
            s += (r[0] * jt[1] - r[1] * jt[0]) / det;
            t += (js[0] * r[1] - js[1] * r[0]) / det;
            if !(-0.05..=1.05).contains(&s) {
                s = s.rem_euclid(1.0);
            }
        }
        if t < -1e-9 || t > depth {
            return None;
        }
        Some((s.rem_euclid(1.0), t.max(0.0)))
    }

    fn point(&self, s: f64, t: f64) -> [f64; 2] {
        let n = self.s_grid.len();
        let x = (s.rem_euclid(1.0)) * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let w = x - i as f64;
        let a = self.rays[i].at(t).0;
        let b = self.rays[(i + 1) % n].at(t).0;
        let d = self.m.displacement(b, a);
        self.m.wrap([a[0] + w * d[0], a[1] + w * d[1]])
    }

    fn inward_velocity(&self, s: f64, t: f64) -> [f64; 2] {
        let n = self.s_grid.len();
        let x = (s.rem_euclid(1.0)) * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let w = x - i as f64;
        let a = self.rays[i].at(t).1;
        let b = self.rays[(i + 1) % n].at(t).1;
        [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]
    }

    #[allow(dead_code)]
    fn component(&self) -> usize {
        self.component
    }
}

/// Normal gauge on a collar of `∂M₀ x R`.
///
/// Returns `(gauge, pushed_connection)` where the gauge restricts to the
/// identity on the boundary and the pushed connection has vanishing normal
/// component at depth `< delta` from the boundary. The gauge is extended to
/// the rest of the manifold by the cutoff-exponential `exp(rho log F)`.
pub fn normal_gauge(
    m: &Surface,
    a: &ConnectionField,
    delta: f64,
) -> Result<(GaugeField, ConnectionField)> {
    let rank = a.rank;
    let depth_total = 2.0 * delta;
    let n_comp = m.boundary_component_count();
    let mut collars = Vec::new();
    for comp in 0..n_comp {
        collars.push(Collar::build(m, comp, depth_total)?);
    }
    let collars = Arc::new(collars);
    let a2 = a.clone();
    let m2 = m.clone();
    let delta2 = delta;

    // cutoff: 1 on [0, delta), smoothly 0 at 2 delta
    let rho = move |t: f64| -> f64 {
        if t <= delta2 {
            1.0
        } else if t >= 2.0 * delta2 {
            0.0
        } else {
            let x = (t - delta2) / delta2; // in (0,1)
            let s = 1.0 - x;
            // smoothstep with zero derivatives at both ends
            s * s * (3.0 - 2.0 * s)
        }
    };

    let gauge_fn = move |x1: f64, u: f64, v: f64| -> Result<CMat> {
        let p = m2.wrap([u, v]);
        let mut out = CMat::identity(rank, rank);
        for collar in collars.iter() {
            if let Some((s, t)) = collar.locate(p, depth_total) {
                // integrate dF/dt + A_t F = 0 inward from the boundary foot
                let n_steps = 48;
                let h = t / n_steps as f64;
                if h == 0.0 {
                    continue;
                }
                let mut f = CMat::identity(rank, rank);
                for k in 0..n_steps {
                    let tk = k as f64 * h;
                    let a_t = |tt: f64, fm: &CMat| -> CMat {
                        let q = collar.point(s, tt);
                        let w = collar.inward_velocity(s, tt);
                        let comps = a2.at(x1, q[0], q[1]);
                        -((&comps[1] * C::new(w[0], 0.0) + &comps[2] * C::new(w[1], 0.0)) * fm)
                    };
                    let k1 = a_t(tk, &f);
                    let k2 = a_t(tk + 0.5 * h, &(&f + &k1 * C::new(0.5 * h, 0.0)));
                    let k3 = a_t(tk + 0.5 * h, &(&f + &k2 * C::new(0.5 * h, 0.0)));
                    let k4 = a_t(tk + h, &(&f + &k3 * C::new(h, 0.0)));
                    f += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4)
                        * C::new(h / 6.0, 0.0);
                }
                // gauge is F^{-1} = F*; extend by exp(rho log F*)
                let f_star = cmat::unitarize(&f).adjoint();
                let r = rho(t);
                if r >= 1.0 {
                    out = &out * f_star;
                } else if r > 0.0 {
                    let lg = cmat::logm_unitary(&f_star).ok_or_else(|| {
                        Error::ChartWidth(
                            "gauge log undefined (eigenvalue at -1)".into(),
                            delta2 / 2.0,
                        )
                    })?;
                    out = &out * cmat::expm(&(lg * C::new(r, 0.0)));
                }
            }
        }
        Ok(out)
    };

    // probe for the log guard once, on a sample of collar points
    for comp in 0..n_comp {
        for i in 0..8 {
            let s = i as f64 / 8.0;
            let bp = m.boundary_point(comp, s);
            let nu = m.outward_normal(bp);
            let q = [
                bp[0] - 1.5 * delta * nu[0],
                bp[1] - 1.5 * delta * nu[1],
            ];
            gauge_fn(0.0, q[0], q[1])?;
        }
    }

    let gauge_fn = Arc::new(gauge_fn);
    let g2 = gauge_fn.clone();
    let gauge = GaugeField::new(
        rank,
        Arc::new(move |x1, u, v| g2(x1, u, v).expect("normal gauge evaluation")),
    );
    let pushed = gauge_pushforward(a, &gauge)?;
    Ok((gauge, pushed))
}

/// Sup of the normal component of `a` over the collar of depth `delta`.
pub fn normal_component_sup(
    m: &Surface,
    a: &ConnectionField,
    delta: f64,
    x1_samples: &[f64],
) -> f64 {
    let mut worst = 0.0f64;
    for comp in 0..m.boundary_component_count() {
        for i in 0..24 {
            let s = i as f64 / 24.0;
            let bp = m.boundary_point(comp, s);
            let nu = m.outward_normal(bp);
            for j in 1..6 {
                let t = delta * j as f64 / 6.0;
                // walk inward along the normal geodesic
                let ray = trace_free(m, bp, [-nu[0], -nu[1]], t.max(1e-6), t.max(1e-6) / 16.0);
                let Ok(ray) = ray else { continue };
                let (q, w) = ray.at(t);
                for &x1 in x1_samples {
                    let comps = a.at(x1, q[0], q[1]);
                    let a_t = &comps[1] * C::new(w[0], 0.0) + &comps[2] * C::new(w[1], 0.0);
                    worst = worst.max(cmat::norm(&a_t));
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::connection::PotentialField;

    #[test]
    fn identity_gauge_fixes_connection() {
        let a = ConnectionField::random_smooth(2, 3, 1.0);
        let id = GaugeField::identity(2);
        let b = gauge_pushforward(&a, &id).unwrap();
        let pa = a.at(0.2, 0.1, -0.3);
        let pb = b.at(0.2, 0.1, -0.3);
        for k in 0..3 {
            assert!(cmat::norm(&(&pa[k] - &pb[k])) < 1e-14);
        }
    }

    #[test]
    fn scalar_phase_pushforward_of_zero() {
        // m=1, A=0, psi=e^{ip} -> output = -i dp
        let p = Arc::new(|x1: f64, u: f64, _v: f64| 0.7 * x1 + 0.3 * u * u);
        let grad = Arc::new(|_x1: f64, u: f64, _v: f64| [0.7, 0.6 * u, 0.0]);
        let psi = GaugeField::scalar_phase(p, grad);
        let a = ConnectionField::zero(1);
        let b = gauge_pushforward(&a, &psi).unwrap();
        let c = b.at(0.5, -0.2, 0.1);
        assert!((c[0][(0, 0)] - C::new(0.0, -0.7)).norm() < 1e-12);
        assert!((c[1][(0, 0)] - C::new(0.0, -0.6 * -0.2)).norm() < 1e-12);
        assert!(c[2][(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn double_pushforward_roundtrip() {
        let a = ConnectionField::random_smooth(2, 7, 0.8);
        let psi = GaugeField::random_interior(2, 8, 0.7, 0.9);
        let b = gauge_pushforward(&a, &psi).unwrap();
        let back = gauge_pushforward(&b, &psi.inverse()).unwrap();
        let pa = a.at(0.1, 0.2, -0.1);
        let pb = back.at(0.1, 0.2, -0.1);
        for k in 0..3 {
            // FD noise in d(psi) limits agreement, not the group action
            assert!(cmat::norm(&(&pa[k] - &pb[k])) < 1e-7, "component {k}");
        }
    }

    #[test]
    fn curvature_gauge_covariance() {
        let a = ConnectionField::random_smooth(2, 31, 1.0);
        let psi = GaugeField::random_interior(2, 37, 0.8, 0.7);
        let b = gauge_pushforward(&a, &psi).unwrap();
        let p = [0.1, 0.12, -0.08];
        let fa = crate::bundle::transport::curvature(&a, p, 1, 2);
        let fb = crate::bundle::transport::curvature(&b, p, 1, 2);
        let pm = psi.at(p[0], p[1], p[2]);
        let want = &pm * fa * pm.adjoint();
        assert!(cmat::norm(&(fb - want)) < 1e-5);
    }

    #[test]
    fn normal_gauge_kills_normal_component() {
        let m = Surface::euclidean_disk();
        let a = ConnectionField::random_smooth(2, 41, 0.8);
        let delta = 0.12;
        let before = normal_component_sup(&m, &a, delta, &[0.0]);
        assert!(before > 1e-3, "test premise: A_t nonzero, got {before}");
        let (gauge, pushed) = normal_gauge(&m, &a, delta).unwrap();
        // identity on the boundary
        let bp = m.boundary_point(0, 0.3);
        let g = gauge.at(0.0, bp[0], bp[1]);
        assert!(cmat::norm(&(g - CMat::identity(2, 2))) < 1e-8);
        // vanishing normal component in the collar
        let after = normal_component_sup(&m, &pushed, delta * 0.9, &[0.0]);
        assert!(after < 1e-6, "normal component after gauge {after}");
        // still skew-Hermitian
        assert!(pushed.skew_defect_sampled(3, 0.9) < 1e-12);
        let _ = PotentialField::zero(2);
    }

    #[test]
    fn normal_gauge_trivial_when_a_t_zero() {
        // flux connection restricted: A_u, A_v tangential on circles? No:
        // use A with only dx1 component, so A_t = 0 identically.
        let a = ConnectionField::new(
            1,
            Arc::new(|_, u, v| {
                [
                    CMat::from_element(1, 1, C::new(0.0, 0.3 * (u * u + v * v))),
                    CMat::zeros(1, 1),
                    CMat::zeros(1, 1),
                ]
            }),
        );
        let m = Surface::euclidean_disk();
        let (gauge, _) = normal_gauge(&m, &a, 0.1).unwrap();
        for &(u, v) in &[(0.95, 0.0), (0.5, 0.5), (0.0, 0.9)] {
            let g = gauge.at(0.0, u, v);
            assert!(cmat::norm(&(g - CMat::identity(1, 1))) < 1e-9);
        }
    }

    #[test]
    fn scalar_radial_closed_form() {
        // m=1 radial A on the disk collar: gauge = exp(+int A_t dt) inward
        let a = ConnectionField::new(
            1,
            Arc::new(|_, u, v| {
                // A = i g(r) dr with dr = (u du + v dv)/r
                let r = (u * u + v * v).sqrt().max(1e-12);
                let g = 0.4 * r;
                [
                    CMat::zeros(1, 1),
                    CMat::from_element(1, 1, C::new(0.0, g * u / r)),
                    CMat::from_element(1, 1, C::new(0.0, g * v / r)),
                ]
            }),
        );
        let m = Surface::euclidean_disk();
        let delta = 0.15;
        let (gauge, pushed) = normal_gauge(&m, &a, delta).unwrap();
        // at radius 1 - t the inward integral of A_t:
        // A_t = -A_r (inward) = -i 0.4 r; int_0^t -0.4 (1 - s) i ds
        let t = 0.1;
        let want = (C::new(0.0, 1.0) * (-0.4) * (t - t * t / 2.0)).exp();
        let g = gauge.at(0.0, 1.0 - t, 0.0);
        assert!(
            (g[(0, 0)] - want).norm() < 1e-6,
            "{} vs {want}",
            g[(0, 0)]
        );
        let after = normal_component_sup(&m, &pushed, delta * 0.9, &[0.0]);
        assert!(after < 1e-6);
    }
}
