//! Gauge reconstruction between flat connections by parallel transport in
//! the endomorphism connection `A_hat(R) = B R - R A`.
//!
//! The candidate gauge is `U(x)`: transport of the identity from a base
//! point along a spanning tree of grid paths. Path-independence is verified
//! on caller-supplied probe loops (homotopy generators are configuration,
//! never computed here); a failure is the holonomy obstruction of the
//! underlying uniqueness argument, reported structurally rather than as an
//! error.

use super::connection::{ConnectionField, GaugeField};
use super::transport::{curvature_sup, Path3};
use crate::geometry::Surface;
use crate::util::cmat::{self, CMat};
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::VecDeque;
use std::sync::Arc;

type C = Complex64;

#[derive(Debug, Clone)]
pub struct FlatGaugeParams {
    pub x1_range: (f64, f64),
    pub n_x1: usize,
    pub n_uv: usize,
    /// Flatness gate on both inputs (sup of curvature norms).
    pub flat_tol: f64,
    /// Probe-loop path-independence tolerance.
    pub verify_tol: f64,
    /// Substep length for transports along grid segments.
    pub transport_step: f64,
}

impl Default for FlatGaugeParams {
    fn default() -> Self {
        FlatGaugeParams {
            x1_range: (-0.5, 0.5),
            n_x1: 5,
            n_uv: 33,
            flat_tol: 1e-5,
            verify_tol: 1e-5,
            transport_step: 0.01,
        }
    }
}

/// Structured failure report: the obstruction, not a bug.
#[derive(Debug, Clone)]
pub struct HolonomyMismatch {
    /// Index of the offending probe loop.
    pub loop_index: usize,
    /// `|| U_loop - I ||` for that loop.
    pub defect: f64,
    /// Principal log of the loop transport when defined; for line bundles
    /// its single entry is the loop integral of `A - B`.
    pub loop_log: Option<CMat>,
}

#[derive(Debug)]
pub enum FlatGaugeOutcome {
    Gauge {
        gauge: GaugeField,
        /// Sup over samples of `|| (U * A) - B ||` after reconstruction.
        match_error: f64,
        /// Max transport defect over non-tree grid edges (diagnostic).
        edge_defect: f64,
    },
    Mismatch(HolonomyMismatch),
}

/// Transport of `U' = U A(gamma') - B(gamma') U`, `U(0) = I`, along a
/// piecewise-linear path (the endomorphism-connection parallel transport).
pub fn endo_transport(a: &ConnectionField, b: &ConnectionField, path: &Path3) -> CMat {
    let m = a.rank;
    let mut u = CMat::identity(m, m);
    let contract = |conn: &ConnectionField, p: [f64; 3], w: [f64; 3]| -> CMat {
        let c = conn.at(p[0], p[1], p[2]);
        &c[0] * C::new(w[0], 0.0) + &c[1] * C::new(w[1], 0.0) + &c[2] * C::new(w[2], 0.0)
    };
    for seg in path.windows(2) {
        let (p0, p1) = (seg[0], seg[1]);
        let w = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
        let at = |s: f64| [p0[0] + s * w[0], p0[1] + s * w[1], p0[2] + s * w[2]];
        let rhs = |s: f64, um: &CMat| -> CMat {
            let p = at(s);
            um * contract(a, p, w) - contract(b, p, w) * um
        };
        let k1 = rhs(0.0, &u);
        let k2 = rhs(0.5, &(&u + &k1 * C::new(0.5, 0.0)));
        let k3 = rhs(0.5, &(&u + &k2 * C::new(0.5, 0.0)));
        let k4 = rhs(1.0, &(&u + &k3));
        u += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(1.0 / 6.0, 0.0);
    }
    u
}

/// Subdivide a straight chart segment for accurate transport.
fn segment_by_step(from: [f64; 3], to: [f64; 3], step: f64) -> Path3 {
    let len = dist3(from, to);
    let n = (len / step).ceil().max(1.0) as usize;
    segment(from, to, n)
}

fn segment(from: [f64; 3], to: [f64; 3], n: usize) -> Path3 {
    (0..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            [
                from[0] + s * (to[0] - from[0]),
                from[1] + s * (to[1] - from[1]),
                from[2] + s * (to[2] - from[2]),
            ]
        })
        .collect()
}

struct Grid {
    xs: Vec<f64>,
    us: Vec<f64>,
    vs: Vec<f64>,
    periodic_v: Option<f64>,
    index: Vec<Option<usize>>,
    nodes: Vec<(usize, usize, usize)>,
}

impl Grid {
    fn flat_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.us.len() + j) * self.vs.len() + k
    }

    fn node_point(&self, n: usize) -> [f64; 3] {
        let (i, j, k) = self.nodes[n];
        [self.xs[i], self.us[j], self.vs[k]]
    }

    fn neighbors(&self, n: usize) -> Vec<(usize, [f64; 3])> {
        let (i, j, k) = self.nodes[n];
        let mut out = Vec::new();
        let mut push = |ii: isize, jj: isize, kk: isize, wrap_v: f64| {
            if ii < 0 || jj < 0 {
                return;
            }
            let (ii, jj) = (ii as usize, jj as usize);
            let kk_mod = if self.periodic_v.is_some() {
                kk.rem_euclid(self.vs.len() as isize) as usize
            } else if kk < 0 {
                return;
            } else {
                kk as usize
            };
            if ii >= self.xs.len() || jj >= self.us.len() || kk_mod >= self.vs.len() {
                return;
            }
            if let Some(m) = self.index[self.flat_index(ii, jj, kk_mod)] {
                let mut target = self.node_point(m);
                target[2] += wrap_v;
                out.push((m, target));
            }
        };
        let (i, j, k) = (i as isize, j as isize, k as isize);
        push(i - 1, j, k, 0.0);
        push(i + 1, j, k, 0.0);
        push(i, j - 1, k, 0.0);
        push(i, j + 1, k, 0.0);
        if let Some(period) = self.periodic_v {
            let nk = self.vs.len() as isize;
            let wrap = |kk: isize| -> f64 {
                if kk < 0 {
                    -period
                } else if kk >= nk {
                    period
                } else {
                    0.0
                }
            };
            push(i, j, k - 1, wrap(k - 1));
            push(i, j, k + 1, wrap(k + 1));
        } else {
            push(i, j, k - 1, 0.0);
            push(i, j, k + 1, 0.0);
        }
        out
    }
}

fn build_grid(m: &Surface, params: &FlatGaugeParams) -> Grid {
    let lin = |a: f64, b: f64, n: usize| -> Vec<f64> {
        if n == 1 {
            vec![0.5 * (a + b)]
        } else {
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        }
    };
    let xs = lin(params.x1_range.0, params.x1_range.1, params.n_x1);
    let us = lin(m.chart.u_min, m.chart.u_max, params.n_uv);
    let vs = match m.periodic_v {
        Some(period) => (0..params.n_uv)
            .map(|i| period * i as f64 / params.n_uv as f64)
            .collect(),
        None => lin(m.chart.v_min, m.chart.v_max, params.n_uv),
    };
    let mut index = vec![None; xs.len() * us.len() * vs.len()];
    let mut nodes = Vec::new();
    for i in 0..xs.len() {
        for (j, &u) in us.iter().enumerate() {
            for (k, &v) in vs.iter().enumerate() {
                if m.boundary_implicit([u, v]) >= -1e-12 {
                    index[(i * us.len() + j) * vs.len() + k] = Some(nodes.len());
                    nodes.push((i, j, k));
                }
            }
        }
    }
    Grid {
        xs,
        us,
        vs,
        periodic_v: m.periodic_v,
        index,
        nodes,
    }
}

/// Reconstruct a gauge `U` with `U * A = B` for flat `A`, `B`.
///
/// `probes` must include generators of the relevant homotopy classes; the
/// reconstruction is accepted only if transport of the identity around each
/// probe loop returns to the identity within `verify_tol`.
pub fn flat_gauge_reconstruct(
    m: &Surface,
    a: &ConnectionField,
    b: &ConnectionField,
    base: [f64; 3],
    probes: &[Path3],
    params: &FlatGaugeParams,
) -> Result<FlatGaugeOutcome> {
    if a.rank != b.rank {
        return Err(Error::Gauge("rank mismatch".into()));
    }
    let rank = a.rank;
    let extent = 0.5 * (m.chart.u_max - m.chart.u_min).max(params.x1_range.1 - params.x1_range.0);
    for (name, conn) in [("first", a), ("second", b)] {
        let flat = curvature_sup(conn, extent.min(0.9), 4);
        if flat > params.flat_tol {
            return Err(Error::Gauge(format!(
                "{name} connection is not flat: sup |F| = {flat:.3e}"
            )));
        }
    }

    // probe loops first: they carry the homotopy content
    for (idx, probe) in probes.iter().enumerate() {
        let hol = endo_transport(a, b, probe);
        let defect = cmat::norm(&(&hol - CMat::identity(rank, rank)));
        if defect > params.verify_tol {
            let loop_log = cmat::logm_unitary(&cmat::unitarize(&hol));
            return Ok(FlatGaugeOutcome::Mismatch(HolonomyMismatch {
                loop_index: idx,
                defect,
                loop_log,
            }));
        }
    }

    // spanning tree over the masked grid
    let grid = build_grid(m, params);
    if grid.nodes.is_empty() {
        return Err(Error::Gauge("empty reconstruction region".into()));
    }
    let base_node = (0..grid.nodes.len())
        .min_by(|&p, &q| {
            let dp = dist3(grid.node_point(p), base);
            let dq = dist3(grid.node_point(q), base);
            dp.partial_cmp(&dq).unwrap()
        })
        .unwrap();
    let mut values: Vec<Option<CMat>> = vec![None; grid.nodes.len()];
    values[base_node] = Some(CMat::identity(rank, rank));
    let mut queue = VecDeque::from([base_node]);
    let mut tree_edges: Vec<(usize, usize)> = Vec::new();
    while let Some(n) = queue.pop_front() {
        let u_n = values[n].clone().unwrap();
        for (nb, target) in grid.neighbors(n) {
            if values[nb].is_some() {
                continue;
            }
            let path = segment_by_step(grid.node_point(n), target, params.transport_step);
            let u_nb = endo_transport_from(a, b, &path, &u_n);
            values[nb] = Some(u_nb);
            tree_edges.push((n, nb));
            queue.push_back(nb);
        }
    }

    // cross-edge consistency: every grid edge, not only tree edges
    let mut edge_defect = 0.0f64;
    for n in 0..grid.nodes.len() {
        let Some(u_n) = &values[n] else { continue };
        for (nb, target) in grid.neighbors(n) {
            if nb <= n {
                continue;
            }
            let Some(u_nb) = &values[nb] else { continue };
            let path = segment_by_step(grid.node_point(n), target, params.transport_step);
            let through = endo_transport_from(a, b, &path, u_n);
            edge_defect = edge_defect.max(cmat::norm(&(&through - u_nb)));
        }
    }

    // package the gauge: transport from the nearest grid node on demand
    let grid = Arc::new(grid);
    let values: Arc<Vec<CMat>> = Arc::new(values.into_iter().map(|v| v.unwrap()).collect());
    let a2 = a.clone();
    let b2 = b.clone();
    let g2 = grid.clone();
    let vals2 = values.clone();
    let step0 = params.transport_step;
    let gauge = GaugeField::new(
        rank,
        Arc::new(move |x1, u, v| {
            let p = [x1, u, v];
            let nearest = (0..g2.nodes.len())
                .min_by(|&i, &j| {
                    dist3(g2.node_point(i), p)
                        .partial_cmp(&dist3(g2.node_point(j), p))
                        .unwrap()
                })
                .unwrap();
            let path = segment_by_step(g2.node_point(nearest), p, step0);
            // transports are unitary exactly; project away integrator drift
            cmat::unitarize(&endo_transport_from(&a2, &b2, &path, &vals2[nearest]))
        }),
    );

    // contract check: sup over samples of || gauge*A - B ||
    let pushed = super::gauge::gauge_pushforward(a, &gauge)?;
    let mut match_error = 0.0f64;
    for n in (0..grid.nodes.len()).step_by((grid.nodes.len() / 24).max(1)) {
        let p = grid.node_point(n);
        if m.boundary_implicit([p[1], p[2]]) < 1e-3 {
            continue; // FD stencil of the gauge pushforward needs interior room
        }
        let pa = pushed.at(p[0], p[1], p[2]);
        let pb = b.at(p[0], p[1], p[2]);
        for k in 0..3 {
            match_error = match_error.max(cmat::norm(&(&pa[k] - &pb[k])));
        }
    }

    Ok(FlatGaugeOutcome::Gauge {
        gauge,
        match_error,
        edge_defect,
    })
}

fn endo_transport_from(
    a: &ConnectionField,
    b: &ConnectionField,
    path: &Path3,
    init: &CMat,
) -> CMat {
    let mut u = init.clone();
    let contract = |conn: &ConnectionField, p: [f64; 3], w: [f64; 3]| -> CMat {
        let c = conn.at(p[0], p[1], p[2]);
        &c[0] * C::new(w[0], 0.0) + &c[1] * C::new(w[1], 0.0) + &c[2] * C::new(w[2], 0.0)
    };
    for seg in path.windows(2) {
        let (p0, p1) = (seg[0], seg[1]);
        let w = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
        let at = |s: f64| [p0[0] + s * w[0], p0[1] + s * w[1], p0[2] + s * w[2]];
        let rhs = |s: f64, um: &CMat| -> CMat {
            let p = at(s);
            um * contract(a, p, w) - contract(b, p, w) * um
        };
        let k1 = rhs(0.0, &u);
        let k2 = rhs(0.5, &(&u + &k1 * C::new(0.5, 0.0)));
        let k3 = rhs(0.5, &(&u + &k2 * C::new(0.5, 0.0)));
        let k4 = rhs(1.0, &(&u + &k3));
        u += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(1.0 / 6.0, 0.0);
    }
    u
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::connection::GaugeField;
    use crate::bundle::gauge::gauge_pushforward;
    use crate::bundle::transport::circle_path;

    fn disk_params() -> FlatGaugeParams {
        FlatGaugeParams {
            x1_range: (-0.4, 0.4),
            n_x1: 3,
            n_uv: 21,
            flat_tol: 2e-5,
            verify_tol: 1e-5,
            transport_step: 0.01,
        }
    }

    #[test]
    fn identical_connections_give_identity() {
        let m = Surface::euclidean_disk();
        let a = ConnectionField::zero(2);
        let out = flat_gauge_reconstruct(&m, &a, &a, [0.0, 1.0, 0.0], &[], &disk_params())
            .unwrap();
        match out {
            FlatGaugeOutcome::Gauge { gauge, match_error, .. } => {
                let g = gauge.at(0.0, 0.3, -0.2);
                assert!(cmat::norm(&(g - CMat::identity(2, 2))) < 1e-10);
                assert!(match_error < 1e-9);
            }
            _ => panic!("expected gauge"),
        }
    }

    #[test]
    fn recovers_constructed_gauge() {
        let m = Surface::euclidean_disk();
        let a = ConnectionField::zero(2);
        let psi = GaugeField::random_interior(2, 51, 0.55, 0.9);
        let b = gauge_pushforward(&a, &psi).unwrap();
        let probes = vec![circle_path(0.8, 400, 1.0)];
        let out =
            flat_gauge_reconstruct(&m, &a, &b, [0.0, 1.0, 0.0], &probes, &disk_params()).unwrap();
        match out {
            FlatGaugeOutcome::Gauge { gauge, match_error, edge_defect } => {
                for &(x1, u, v) in &[(0.0, 0.0, 0.0), (0.1, 0.2, -0.3), (0.0, -0.4, 0.1)] {
                    let got = gauge.at(x1, u, v);
                    let want = psi.at(x1, u, v);
                    assert!(
                        cmat::norm(&(got - want)) < 1e-4,
                        "mismatch at ({x1},{u},{v})"
                    );
                }
                assert!(match_error < 1e-4, "match error {match_error}");
                assert!(edge_defect < 1e-6, "edge defect {edge_defect}");
            }
            _ => panic!("expected gauge"),
        }
    }

    #[test]
    fn annulus_flux_mismatch_reported() {
        // flat line-bundle connections on the band with different core-loop
        // holonomy: A = 0, B = i c dv (closed, not exact for c not integer)
        let m = Surface::catenoid_band(0.8);
        let a = ConnectionField::zero(1).with_period_v(2.0 * std::f64::consts::PI);
        let c = 0.37;
        let b = ConnectionField::new(
            1,
            Arc::new(move |_, _, _| {
                [
                    CMat::zeros(1, 1),
                    CMat::zeros(1, 1),
                    CMat::from_element(1, 1, C::new(0.0, c)),
                ]
            }),
        )
        .with_period_v(2.0 * std::f64::consts::PI);
        // core loop: v from 0 to 2 pi at u = 0
        let core: Path3 = (0..=400)
            .map(|k| [0.0, 0.0, 2.0 * std::f64::consts::PI * k as f64 / 400.0])
            .collect();
        let params = FlatGaugeParams {
            x1_range: (0.0, 0.0),
            n_x1: 1,
            n_uv: 25,
            flat_tol: 1e-6,
            verify_tol: 1e-5,
            transport_step: 0.01,
        };
        let out = flat_gauge_reconstruct(&m, &a, &b, [0.0, -0.8, 0.0], &[core], &params).unwrap();
        match out {
            FlatGaugeOutcome::Mismatch(report) => {
                assert_eq!(report.loop_index, 0);
                // loop log entry = -i * loop integral of B = -i * (2 pi c)
                let log = report.loop_log.expect("log defined");
                let want = 2.0 * std::f64::consts::PI * c;
                assert!(
                    (log[(0, 0)].im + want).abs() < 1e-4,
                    "loop log {} vs -i {want}",
                    log[(0, 0)]
                );
            }
            _ => panic!("expected mismatch"),
        }
    }
}
