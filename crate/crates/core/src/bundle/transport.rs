//! Parallel transport, holonomy and finite-difference curvature.

use super::connection::ConnectionField;
use crate::util::cmat::{self, CMat};
use crate::{Error, Result};
use num_complex::Complex64;

type C = Complex64;

/// A piecewise-linear path in cylinder coordinates `(x1, u, v)`.
pub type Path3 = Vec<[f64; 3]>;

/// Embed a transversal-surface path at fixed `x1`.
pub fn lift_path(points: &[[f64; 2]], x1: f64) -> Path3 {
    points.iter().map(|p| [x1, p[0], p[1]]).collect()
}

/// Circle of radius `r` in the `(u, v)` plane at `x1 = 0`.
///
/// Positive `turns` winds counterclockwise; negative clockwise.
pub fn circle_path(r: f64, n: usize, turns: f64) -> Path3 {
    (0..=n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * turns * k as f64 / n as f64;
            [0.0, r * t.cos(), r * t.sin()]
        })
        .collect()
}

/// Connection 1-form applied to a velocity: `A_1 w1 + A_u wu + A_v wv`.
fn contract(a: &ConnectionField, p: [f64; 3], w: [f64; 3]) -> CMat {
    let comps = a.at(p[0], p[1], p[2]);
    &comps[0] * C::new(w[0], 0.0) + &comps[1] * C::new(w[1], 0.0) + &comps[2] * C::new(w[2], 0.0)
}

/// Solve `dF + A(gamma') F = 0`, `F(start) = I` along a piecewise-linear
/// path by per-segment RK4. The result is re-unitarized by polar projection
/// when the drift exceeds 1e-12.
pub fn parallel_transport(a: &ConnectionField, path: &Path3) -> CMat {
    let m = a.rank;
    let mut f = CMat::identity(m, m);
    for seg in path.windows(2) {
        let (p0, p1) = (seg[0], seg[1]);
        let w = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
        let at = |s: f64| {
            [
                p0[0] + s * w[0],
                p0[1] + s * w[1],
                p0[2] + s * w[2],
            ]
        };
        // RK4 in the segment parameter s in [0,1]; rhs = -A(w at point) F
        let rhs = |s: f64, fm: &CMat| -> CMat { -contract(a, at(s), w) * fm };
        let k1 = rhs(0.0, &f);
        let k2 = rhs(0.5, &(&f + &k1 * C::new(0.5, 0.0)));
        let k3 = rhs(0.5, &(&f + &k2 * C::new(0.5, 0.0)));
        let k4 = rhs(1.0, &(&f + &k3));
        f += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(1.0 / 6.0, 0.0);
    }
    if cmat::unitary_defect(&f) > 1e-12 {
        f = cmat::unitarize(&f);
    }
    f
}

/// Parallel transport around a closed loop.
///
/// Errors when the endpoints do not coincide (up to the `v` period carried
/// by the connection) within 1e-10.
pub fn holonomy(a: &ConnectionField, loop_path: &Path3) -> Result<CMat> {
    let first = loop_path.first().ok_or_else(|| Error::Loop("empty loop".into()))?;
    let last = loop_path.last().unwrap();
    let mut dv = last[2] - first[2];
    if let Some(p) = a.period_v {
        dv -= (dv / p).round() * p;
    }
    let gap = ((last[0] - first[0]).powi(2) + (last[1] - first[1]).powi(2) + dv * dv).sqrt();
    if gap > 1e-10 {
        return Err(Error::Loop(format!("endpoints differ by {gap:.3e}")));
    }
    Ok(parallel_transport(a, loop_path))
}

/// Curvature component `F_ij(p) = d_i A_j - d_j A_i + [A_i, A_j]` by
/// centered differences, `i, j` in `{0: x1, 1: u, 2: v}`.
pub fn curvature(a: &ConnectionField, p: [f64; 3], i: usize, j: usize) -> CMat {
    let h = a.h_fd;
    let shift = |k: usize, s: f64| {
        let mut q = p;
        q[k] += s;
        q
    };
    let comp = |q: [f64; 3], k: usize| {
        let c = a.at(q[0], q[1], q[2]);
        c[k].clone()
    };
    let di_aj =
        (comp(shift(i, h), j) - comp(shift(i, -h), j)) / C::new(2.0 * h, 0.0);
    let dj_ai =
        (comp(shift(j, h), i) - comp(shift(j, -h), i)) / C::new(2.0 * h, 0.0);
    let a0 = a.at(p[0], p[1], p[2]);
    let bracket = &a0[i] * &a0[j] - &a0[j] * &a0[i];
    di_aj - dj_ai + bracket
}

/// Largest curvature norm over a sample box (flatness probe).
pub fn curvature_sup(a: &ConnectionField, extent: f64, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for ii in 0..n {
        for jj in 0..n {
            for kk in 0..n {
                let f = |idx: usize| (idx as f64 / (n - 1).max(1) as f64 - 0.5) * 2.0 * extent;
                let p = [f(ii), f(jj), f(kk)];
                for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
                    worst = worst.max(cmat::norm(&curvature(a, p, i, j)));
                }
            }
        }
    }
    worst
}
