//! Ridge-regularized variational inversion of the ray transform for a
//! function and a 1-form jointly, by conjugate gradients on the normal
//! equations, plus the solenoidal/potential gauge split.

use crate::geometry::{GeodesicPath, Surface};
use crate::util::quad::simpson_weights;
use crate::util::sparse::{self, Builder, Csr};
use crate::{Error, Result};
use num_complex::Complex64;

type C = Complex64;

/// One measured ray: the geodesic and its transform value.
pub struct RayMeasurement {
    pub path: GeodesicPath,
    pub value: C,
}

/// Masked chart grid for the unknowns.
#[derive(Debug, Clone)]
pub struct ChartGrid {
    pub n: usize,
    pub us: Vec<f64>,
    pub vs: Vec<f64>,
    /// flat node index or None outside the surface
    pub index: Vec<Option<usize>>,
    pub nodes: Vec<(usize, usize)>,
    pub du: f64,
    pub dv: f64,
}

impl ChartGrid {
    pub fn new(m: &Surface, n: usize) -> Self {
        let (u0, u1) = (m.chart.u_min, m.chart.u_max);
        let (v0, v1) = (m.chart.v_min, m.chart.v_max);
        let us: Vec<f64> = (0..n).map(|i| u0 + (u1 - u0) * i as f64 / (n - 1) as f64).collect();
        let vs: Vec<f64> = match m.periodic_v {
            Some(p) => (0..n).map(|i| p * i as f64 / n as f64).collect(),
            None => (0..n).map(|i| v0 + (v1 - v0) * i as f64 / (n - 1) as f64).collect(),
        };
        let mut index = vec![None; n * n];
        let mut nodes = Vec::new();
        for (i, &u) in us.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                if m.boundary_implicit([u, v]) >= -1e-12 {
                    index[i * n + j] = Some(nodes.len());
                    nodes.push((i, j));
                }
            }
        }
        let du = us[1] - us[0];
        let dv = vs[1] - vs[0];
        ChartGrid {
            n,
            us,
            vs,
            index,
            nodes,
            du,
            dv,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Bilinear interpolation weights at a chart point (periodic-aware).
    fn weights(&self, m: &Surface, p: [f64; 2]) -> Vec<(usize, f64)> {
        let n = self.n;
        let fu = (p[0] - self.us[0]) / self.du;
        let iu = (fu.floor() as isize).clamp(0, n as isize - 2) as usize;
        let wu = (fu - iu as f64).clamp(0.0, 1.0);
        let (iv, wv, wrap) = match m.periodic_v {
            Some(period) => {
                let fv = (p[1].rem_euclid(period)) / self.dv;
                let iv = (fv.floor() as usize).min(n - 1);
                (iv, fv - iv as f64, true)
            }
            None => {
                let fv = (p[1] - self.vs[0]) / self.dv;
                let iv = (fv.floor() as isize).clamp(0, n as isize - 2) as usize;
                (iv, (fv - iv as f64).clamp(0.0, 1.0), false)
            }
        };
        let ivp = if wrap { (iv + 1) % n } else { iv + 1 };
        let mut out = Vec::with_capacity(4);
        let mut push = |i: usize, j: usize, w: f64| {
            if w.abs() < 1e-14 {
                return;
            }
            if let Some(k) = self.index[i * n + j] {
                out.push((k, w));
            }
        };
        push(iu, iv, (1.0 - wu) * (1.0 - wv));
        push(iu + 1, iv, wu * (1.0 - wv));
        push(iu, ivp, (1.0 - wu) * wv);
        push(iu + 1, ivp, wu * wv);
        out
    }

    pub fn node_point(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.nodes[k];
        [self.us[i], self.vs[j]]
    }
}

/// Result of the joint `(f, alpha)` inversion.
pub struct InversionResult {
    pub grid: ChartGrid,
    /// Recovered function values per node.
    pub f: Vec<C>,
    /// Recovered covariant 1-form components per node.
    pub alpha_u: Vec<C>,
    pub alpha_v: Vec<C>,
    /// Potential of the gauge split `alpha = dp + w`, `p = 0` on the boundary.
    pub potential: Vec<C>,
    /// Solenoidal representative `w` (`d* w = 0` discretely).
    pub sol_u: Vec<C>,
    pub sol_v: Vec<C>,
    pub solver_iterations: usize,
    pub conditioning_warning: Option<String>,
}

/// Forward ray matrix: rows are rays, columns `[f | alpha_u | alpha_v]`.
fn forward_matrix(m: &Surface, grid: &ChartGrid, rays: &[&GeodesicPath]) -> Csr {
    let n_nodes = grid.node_count();
    let mut builder = Builder::new(rays.len(), 3 * n_nodes);
    for (row, path) in rays.iter().enumerate() {
        let n = path.len();
        if n < 2 {
            continue;
        }
        let h = path.step;
        let uniform_end = n - 1;
        let last_dt = path.times[n - 1] - path.times[n - 2];
        let mut w = simpson_weights(uniform_end, h);
        w.push(0.0);
        w[n - 2] += 0.5 * last_dt;
        w[n - 1] += 0.5 * last_dt;
        for i in 0..n {
            let bil = grid.weights(m, path.points[i]);
            let tan = path.tangents[i];
            for (k, bw) in bil {
                let c = C::new(w[i] * bw, 0.0);
                builder.push(row, k, c);
                builder.push(row, n_nodes + k, c * tan[0]);
                builder.push(row, 2 * n_nodes + k, c * tan[1]);
            }
        }
    }
    builder.to_csr()
}

/// Discrete gradient rows (forward differences between masked neighbors)
/// applied to each of the three fields.
fn gradient_matrix(grid: &ChartGrid, periodic: bool) -> Csr {
    let n = grid.n;
    let n_nodes = grid.node_count();
    let mut rows = 0usize;
    let mut builder_entries: Vec<(usize, usize, C)> = Vec::new();
    for field in 0..3usize {
        let base = field * n_nodes;
        for (k, &(i, j)) in grid.nodes.iter().enumerate() {
            // u-direction neighbor
            if i + 1 < n {
                if let Some(k2) = grid.index[(i + 1) * n + j] {
                    builder_entries.push((rows, base + k, C::new(-1.0 / grid.du, 0.0)));
                    builder_entries.push((rows, base + k2, C::new(1.0 / grid.du, 0.0)));
                    rows += 1;
                }
            }
            // v-direction neighbor (wraps when periodic)
            let jn = if periodic { (j + 1) % n } else { j + 1 };
            if jn < n {
                if let Some(k2) = grid.index[i * n + jn] {
                    builder_entries.push((rows, base + k, C::new(-1.0 / grid.dv, 0.0)));
                    builder_entries.push((rows, base + k2, C::new(1.0 / grid.dv, 0.0)));
                    rows += 1;
                }
            }
        }
    }
    let mut builder = Builder::new(rows, 3 * n_nodes);
    for (r, c, v) in builder_entries {
        builder.push(r, c, v);
    }
    builder.to_csr()
}

/// Invert ray data for `(f, alpha)` by minimizing
/// `sum |I(f,alpha) - d|^2 + mu (||x||^2 + ||grad x||^2)`.
pub fn xray_invert(
    m: &Surface,
    data: &[RayMeasurement],
    grid_n: usize,
    mu: f64,
) -> Result<InversionResult> {
    let grid = ChartGrid::new(m, grid_n);
    let rays: Vec<&GeodesicPath> = data.iter().map(|d| &d.path).collect();
    let g = forward_matrix(m, &grid, &rays);
    let l = gradient_matrix(&grid, m.periodic_v.is_some());
    let n_unknowns = 3 * grid.node_count();
    let conditioning_warning = if data.len() * 4 < n_unknowns {
        Some(format!(
            "underdetermined system: {} rays for {} unknowns",
            data.len(),
            n_unknowns
        ))
    } else {
        None
    };
    let d: Vec<C> = data.iter().map(|r| r.value).collect();
    let rhs = g.mul_adjoint_vec(&d);
    let apply = |x: &[C]| -> Vec<C> {
        let gx = g.mul_vec(x);
        let mut out = g.mul_adjoint_vec(&gx);
        let lx = l.mul_vec(x);
        let ltlx = l.mul_adjoint_vec(&lx);
        for i in 0..out.len() {
            out[i] += C::new(mu, 0.0) * (x[i] + ltlx[i]);
        }
        out
    };
    let (x, report) = sparse::cg_operator(apply, &rhs, 1e-10, 4000);
    if !report.converged && report.relative_residual > 1e-6 {
        return Err(Error::Conditioning(format!(
            "normal-equation CG stalled at relative residual {:.3e} after {} iterations",
            report.relative_residual, report.iterations
        )));
    }
    let n_nodes = grid.node_count();
    let f = x[..n_nodes].to_vec();
    let alpha_u = x[n_nodes..2 * n_nodes].to_vec();
    let alpha_v = x[2 * n_nodes..].to_vec();
    let (potential, sol_u, sol_v) = split_one_form(m, &grid, &alpha_u, &alpha_v)?;
    Ok(InversionResult {
        grid,
        f,
        alpha_u,
        alpha_v,
        potential,
        sol_u,
        sol_v,
        solver_iterations: report.iterations,
        conditioning_warning,
    })
}

/// Gauge split `alpha = dp + w` with `p = 0` on the boundary and `w` the
/// divergence-free representative: solves the metric Poisson problem
/// `d* d p = d* alpha` on the masked grid.
pub fn split_one_form(
    m: &Surface,
    grid: &ChartGrid,
    alpha_u: &[C],
    alpha_v: &[C],
) -> Result<(Vec<C>, Vec<C>, Vec<C>)> {
    let n = grid.n;
    let n_nodes = grid.node_count();
    let periodic = m.periodic_v.is_some();
    let neighbor = |i: isize, j: isize| -> Option<usize> {
        if i < 0 || i >= n as isize {
            return None;
        }
        let j = if periodic {
            j.rem_euclid(n as isize)
        } else {
            if j < 0 || j >= n as isize {
                return None;
            }
            j
        };
        grid.index[i as usize * n + j as usize]
    };
    // strictly interior nodes get equations; the rest are Dirichlet zeros
    let interior: Vec<bool> = (0..n_nodes)
        .map(|k| m.boundary_implicit(grid.node_point(k)) > 1e-12)
        .collect();

    // cut-cell arm: fraction of the full step to the boundary crossing
    let arm = |k: usize, dir: [f64; 2], h: f64| -> (Option<usize>, f64) {
        let (i, j) = grid.nodes[k];
        let (i, j) = (i as isize, j as isize);
        let kn = if dir[0] > 0.5 {
            neighbor(i + 1, j)
        } else if dir[0] < -0.5 {
            neighbor(i - 1, j)
        } else if dir[1] > 0.5 {
            neighbor(i, j + 1)
        } else {
            neighbor(i, j - 1)
        };
        if let Some(nidx) = kn {
            if interior[nidx] || m.boundary_implicit(grid.node_point(nidx)) >= -1e-12 {
                return (Some(nidx), 1.0);
            }
        }
        // bisect the boundary crossing along the grid segment
        let p0 = grid.node_point(k);
        let seg = |t: f64| [p0[0] + t * h * dir[0], p0[1] + t * h * dir[1]];
        let mut lo = 0.0;
        let mut hi = 1.0;
        if m.boundary_implicit(seg(1.0)) >= 0.0 {
            return (None, 1.0);
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if m.boundary_implicit(seg(mid)) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (None, (0.5 * (lo + hi)).max(0.05))
    };

    // weighted divergence: d* a = -(1/sqrt g) d_i (sqrt g g^{ij} a_j)
    let sqrt_g = |k: usize| -> f64 {
        let p = grid.node_point(k);
        m.metric_det(p[0], p[1]).sqrt()
    };
    let ginv = |k: usize| -> [f64; 3] {
        let p = grid.node_point(k);
        m.metric_inv(p[0], p[1])
    };
    let raised = |k: usize| -> [C; 2] {
        let gi = ginv(k);
        let (au, av) = (alpha_u[k], alpha_v[k]);
        [
            au * gi[0] + av * gi[1],
            au * gi[1] + av * gi[2],
        ]
    };
    let div_alpha = |k: usize| -> C {
        let (i, j) = grid.nodes[k];
        let (i, j) = (i as isize, j as isize);
        let term = |kp: Option<usize>, km: Option<usize>, comp: usize, h: f64| -> C {
            let center = raised(k)[comp] * sqrt_g(k);
            match (kp, km) {
                (Some(p), Some(q)) => {
                    (raised(p)[comp] * sqrt_g(p) - raised(q)[comp] * sqrt_g(q))
                        / C::new(2.0 * h, 0.0)
                }
                (Some(p), None) => (raised(p)[comp] * sqrt_g(p) - center) / C::new(h, 0.0),
                (None, Some(q)) => (center - raised(q)[comp] * sqrt_g(q)) / C::new(h, 0.0),
                _ => C::new(0.0, 0.0),
            }
        };
        let du = term(neighbor(i + 1, j), neighbor(i - 1, j), 0, grid.du);
        let dv = term(neighbor(i, j + 1), neighbor(i, j - 1), 1, grid.dv);
        -(du + dv) / sqrt_g(k)
    };

    // Laplacian d* d with Dirichlet-zero boundary; Shortley-Weller arms at
    // the curved boundary (diagonal-metric stencil: presets are conformal)
    let lap = |p_vec: &[C]| -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); n_nodes];
        for k in 0..n_nodes {
            if !interior[k] {
                out[k] = p_vec[k];
                continue;
            }
            let pt = grid.node_point(k);
            let gdet = m.metric_det(pt[0], pt[1]).sqrt();
            let mut acc = C::new(0.0, 0.0);
            for (comp, h) in [(0usize, grid.du), (1usize, grid.dv)] {
                let dir_p = if comp == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
                let dir_m = [-dir_p[0], -dir_p[1]];
                let (kp, tp) = arm(k, dir_p, h);
                let (km, tm) = arm(k, dir_m, h);
                let coeff = |theta: f64, dir: [f64; 2]| -> f64 {
                    let mid = [
                        pt[0] + 0.5 * theta * h * dir[0],
                        pt[1] + 0.5 * theta * h * dir[1],
                    ];
                    let gi = m.metric_inv(mid[0], mid[1]);
                    let sg = m.metric_det(mid[0], mid[1]).sqrt();
                    sg * if comp == 0 { gi[0] } else { gi[2] }
                };
                let val = |kn: Option<usize>| match kn {
                    Some(nidx) => p_vec[nidx],
                    None => C::new(0.0, 0.0), // Dirichlet value at the cut
                };
                let flux_p = (val(kp) - p_vec[k]) * (coeff(tp, dir_p) / (tp * h));
                let flux_m = (p_vec[k] - val(km)) * (coeff(tm, dir_m) / (tm * h));
                acc += (flux_p - flux_m) * (2.0 / ((tp + tm) * h));
            }
            out[k] = -acc / C::new(gdet, 0.0);
        }
        out
    };

    let mut rhs = vec![C::new(0.0, 0.0); n_nodes];
    for k in 0..n_nodes {
        rhs[k] = if interior[k] { div_alpha(k) } else { C::new(0.0, 0.0) };
    }
    let (p, rep) = sparse::cg_operator(lap, &rhs, 1e-10, 8000);
    if !rep.converged && rep.relative_residual > 1e-7 {
        return Err(Error::Conditioning(format!(
            "gauge-split Poisson solve stalled at {:.3e}",
            rep.relative_residual
        )));
    }
    // w = alpha - dp by centered differences
    let mut sol_u = alpha_u.to_vec();
    let mut sol_v = alpha_v.to_vec();
    for k in 0..n_nodes {
        let (i, j) = grid.nodes[k];
        let (i, j) = (i as isize, j as isize);
        let dp_u = match (neighbor(i + 1, j), neighbor(i - 1, j)) {
            (Some(a), Some(b)) => (p[a] - p[b]) / C::new(2.0 * grid.du, 0.0),
            (Some(a), None) => (p[a] - p[k]) / C::new(grid.du, 0.0),
            (None, Some(b)) => (p[k] - p[b]) / C::new(grid.du, 0.0),
            _ => C::new(0.0, 0.0),
        };
        let dp_v = match (neighbor(i, j + 1), neighbor(i, j - 1)) {
            (Some(a), Some(b)) => (p[a] - p[b]) / C::new(2.0 * grid.dv, 0.0),
            (Some(a), None) => (p[a] - p[k]) / C::new(grid.dv, 0.0),
            (None, Some(b)) => (p[k] - p[b]) / C::new(grid.dv, 0.0),
            _ => C::new(0.0, 0.0),
        };
        sol_u[k] -= dp_u;
        sol_v[k] -= dp_v;
    }
    Ok((p, sol_u, sol_v))
}

/// Relative L2 error of grid values against a reference callable.
pub fn grid_rel_error<F: Fn(f64, f64) -> C>(grid: &ChartGrid, vals: &[C], reference: F) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..grid.node_count() {
        let p = grid.node_point(k);
        let want = reference(p[0], p[1]);
        num += (vals[k] - want).norm_sqr();
        den += want.norm_sqr();
    }
    (num / den.max(1e-300)).sqrt()
}

pub fn l2_of(vals: &[C]) -> f64 {
    (vals.iter().map(|v| v.norm_sqr()).sum::<f64>() / vals.len().max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{boundary_sample, geodesic_trace, Surface};
    use crate::xray::transform::xray_scalar;

    fn gaussian_bump(u: f64, v: f64) -> C {
        C::new(
            (-((u - 0.15) * (u - 0.15) + (v + 0.1) * (v + 0.1)) / 0.08).exp(),
            0.0,
        )
    }

    #[test]
    fn round_trip_function_recovery() {
        let m = Surface::euclidean_disk();
        let pairs = boundary_sample(&m, 400, 7);
        let mut data = Vec::new();
        for pr in pairs {
            let path = geodesic_trace(&m, pr.point, pr.dir, 2e-3).unwrap();
            if path.trapped {
                continue;
            }
            let value =
                xray_scalar(gaussian_bump, |_, _| [C::new(0.0, 0.0); 2], &path).unwrap();
            data.push(RayMeasurement { path, value });
        }
        let res = xray_invert(&m, &data, 64, 1e-5).unwrap();
        let err = grid_rel_error(&res.grid, &res.f, gaussian_bump);
        assert!(err <= 0.05, "relative L2 error {err}");
        // recovered alpha should be small
        let a_norm = (l2_of(&res.alpha_u) + l2_of(&res.alpha_v)) / 2.0;
        assert!(a_norm < 0.02, "spurious alpha {a_norm}");
    }

    #[test]
    fn gauge_kernel_maps_to_zero() {
        // data from (0, dp): reconstruction should see ~nothing beyond dp
        let m = Surface::euclidean_disk();
        let p = |u: f64, v: f64| (1.0 - u * u - v * v) * (u - 0.3 * v);
        let _ = p;
        let dp = |u: f64, v: f64| {
            [
                C::new(-2.0 * u * (u - 0.3 * v) + (1.0 - u * u - v * v), 0.0),
                C::new(-2.0 * v * (u - 0.3 * v) + (1.0 - u * u - v * v) * -0.3, 0.0),
            ]
        };
        let pairs = boundary_sample(&m, 300, 11);
        let mut data = Vec::new();
        for pr in pairs {
            let path = geodesic_trace(&m, pr.point, pr.dir, 2e-3).unwrap();
            if path.trapped {
                continue;
            }
            let value = xray_scalar(|_, _| C::new(0.0, 0.0), dp, &path).unwrap();
            data.push(RayMeasurement { path, value });
        }
        let res = xray_invert(&m, &data, 48, 1e-5).unwrap();
        assert!(l2_of(&res.f) < 1e-3, "f = {}", l2_of(&res.f));
        let sol = (l2_of(&res.sol_u) + l2_of(&res.sol_v)) / 2.0;
        assert!(sol < 1e-3, "solenoidal part {sol}");
    }

    #[test]
    fn zero_data_gives_zero() {
        let m = Surface::euclidean_disk();
        let pairs = boundary_sample(&m, 60, 3);
        let data: Vec<RayMeasurement> = pairs
            .iter()
            .map(|pr| RayMeasurement {
                path: geodesic_trace(&m, pr.point, pr.dir, 2e-3).unwrap(),
                value: C::new(0.0, 0.0),
            })
            .collect();
        let res = xray_invert(&m, &data, 32, 1e-3).unwrap();
        assert!(l2_of(&res.f) < 1e-12);
        assert!(l2_of(&res.alpha_u) < 1e-12);
    }

    #[test]
    fn underdetermined_warns() {
        let m = Surface::euclidean_disk();
        let pairs = boundary_sample(&m, 10, 3);
        let data: Vec<RayMeasurement> = pairs
            .iter()
            .map(|pr| RayMeasurement {
                path: geodesic_trace(&m, pr.point, pr.dir, 5e-3).unwrap(),
                value: C::new(1.0, 0.0),
            })
            .collect();
        let res = xray_invert(&m, &data, 32, 1e-3).unwrap();
        assert!(res.conditioning_warning.is_some());
    }

    #[test]
    fn split_recovers_potential_part() {
        let m = Surface::euclidean_disk();
        let grid = ChartGrid::new(&m, 48);
        // alpha = dp for p vanishing on the boundary
        let p = |u: f64, v: f64| (1.0 - u * u - v * v) * u;
        let mut au = Vec::new();
        let mut av = Vec::new();
        for k in 0..grid.node_count() {
            let pt = grid.node_point(k);
            let (u, v) = (pt[0], pt[1]);
            au.push(C::new(1.0 - 3.0 * u * u - v * v, 0.0));
            av.push(C::new(-2.0 * u * v, 0.0));
        }
        let (pot, su, sv) = split_one_form(&m, &grid, &au, &av).unwrap();
        let perr = grid_rel_error(&grid, &pot, |u, v| C::new(p(u, v), 0.0));
        assert!(perr < 0.02, "potential error {perr}");
        let sol = (l2_of(&su) + l2_of(&sv)) / 2.0;
        assert!(sol < 0.02, "solenoidal remainder {sol}");
    }
}
