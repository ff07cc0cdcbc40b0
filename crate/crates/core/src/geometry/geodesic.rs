//! Geodesic tracing by classical 4th-order Runge-Kutta on the first-order
//! system, with bisection-refined boundary crossing and a trapped cap.

use super::surface::Surface;
use crate::{Error, Result};

/// Discretized unit-speed geodesic with exit data.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    /// Chart points (wrapped into the fundamental domain for periodic charts).
    pub points: Vec<[f64; 2]>,
    /// Unit tangents (contravariant chart components).
    pub tangents: Vec<[f64; 2]>,
    /// Arclength values of the nodes.
    pub times: Vec<f64>,
    /// Exit arclength; `None` when the cap was reached first.
    pub exit_time: Option<f64>,
    pub trapped: bool,
    /// Both endpoints on the boundary with transversal tangents.
    pub nontangential: bool,
    pub step: f64,
}

impl GeodesicPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Linear interpolation of position and tangent at arclength `t`.
    pub fn at(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let n = self.times.len();
        if t <= self.times[0] {
            return (self.points[0], self.tangents[0]);
        }
        if t >= self.times[n - 1] {
            return (self.points[n - 1], self.tangents[n - 1]);
        }
        let idx = self
            .times
            .partition_point(|&s| s <= t)
            .min(n - 1)
            .max(1);
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = (t - t0) / (t1 - t0);
        let lerp = |a: [f64; 2], b: [f64; 2]| [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])];
        (
            lerp(self.points[idx - 1], self.points[idx]),
            lerp(self.tangents[idx - 1], self.tangents[idx]),
        )
    }
}

#[derive(Clone, Copy)]
struct State {
    p: [f64; 2],
    v: [f64; 2],
}

fn rhs(m: &Surface, s: State) -> Result<State> {
    m.metric_checked(s.p[0], s.p[1])?;
    let gamma = m.christoffel(s.p[0], s.p[1]);
    let mut acc = [0.0; 2];
    for (k, a) in acc.iter_mut().enumerate() {
        let mut sum = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                sum += gamma[k][i][j] * s.v[i] * s.v[j];
            }
        }
        *a = -sum;
    }
    Ok(State { p: s.v, v: acc })
}

fn rk4_step(m: &Surface, s: State, h: f64) -> Result<State> {
    let k1 = rhs(m, s)?;
    let k2 = rhs(
        m,
        State {
            p: [s.p[0] + 0.5 * h * k1.p[0], s.p[1] + 0.5 * h * k1.p[1]],
            v: [s.v[0] + 0.5 * h * k1.v[0], s.v[1] + 0.5 * h * k1.v[1]],
        },
    )?;
    let k3 = rhs(
        m,
        State {
            p: [s.p[0] + 0.5 * h * k2.p[0], s.p[1] + 0.5 * h * k2.p[1]],
            v: [s.v[0] + 0.5 * h * k2.v[0], s.v[1] + 0.5 * h * k2.v[1]],
        },
    )?;
    let k4 = rhs(
        m,
        State {
            p: [s.p[0] + h * k3.p[0], s.p[1] + h * k3.p[1]],
            v: [s.v[0] + h * k3.v[0], s.v[1] + h * k3.v[1]],
        },
    )?;
    let comb = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
    Ok(State {
        p: [
            s.p[0] + h * comb(k1.p[0], k2.p[0], k3.p[0], k4.p[0]),
            s.p[1] + h * comb(k1.p[1], k2.p[1], k3.p[1], k4.p[1]),
        ],
        v: [
            s.v[0] + h * comb(k1.v[0], k2.v[0], k3.v[0], k4.v[0]),
            s.v[1] + h * comb(k1.v[1], k2.v[1], k3.v[1], k4.v[1]),
        ],
    })
}

/// Trace the unit-speed geodesic from `x` with initial direction `xi`.
///
/// `xi` is normalized to unit g-length. The trace stops at the first
/// boundary crossing (located by bisection to 1e-10 in arclength) or at the
/// cap `50 * diam(M0)`, in which case the result is flagged trapped.
pub fn geodesic_trace(
    m: &Surface,
    x: [f64; 2],
    xi: [f64; 2],
    step: f64,
) -> Result<GeodesicPath> {
    assert!(step > 0.0, "step must be positive");
    let speed = m.norm(x, xi);
    if speed <= 0.0 {
        return Err(Error::Geometry("zero initial direction".into()));
    }
    let mut state = State {
        p: x,
        v: [xi[0] / speed, xi[1] / speed],
    };
    let start_implicit = m.boundary_implicit(state.p);
    if start_implicit < -1e-6 * m.diameter.max(1.0) {
        return Err(Error::Geometry(format!(
            "start point ({:.4}, {:.4}) outside the surface",
            x[0], x[1]
        )));
    }
    let cap = 50.0 * m.diameter;
    let mut points = vec![m.wrap(state.p)];
    let mut tangents = vec![state.v];
    let mut times = vec![0.0];
    let mut t = 0.0;
    let mut exit_time = None;

    // If starting exactly on the boundary, take one small step before
    // testing for crossings so the launch itself is not treated as an exit.
    let on_boundary = start_implicit.abs() < 1e-6 * m.diameter.max(1.0);
    loop {
        let next = rk4_step(m, state, step)?;
        let t_next = t + step;
        let crossed = m.boundary_implicit(next.p) < 0.0;
        if crossed && (!on_boundary || t_next > 2.0 * step) {
            // bisect in arclength from `state`
            let mut lo = 0.0;
            let mut hi = step;
            let mut s_hi = next;
            for _ in 0..60 {
                if hi - lo < 1e-10 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let s_mid = rk4_step(m, state, mid)?;
                if m.boundary_implicit(s_mid.p) < 0.0 {
                    hi = mid;
                    s_hi = s_mid;
                } else {
                    lo = mid;
                }
            }
            let t_exit = t + hi;
            points.push(m.wrap(s_hi.p));
            tangents.push(s_hi.v);
            times.push(t_exit);
            exit_time = Some(t_exit);
            break;
        }
        state = next;
        t = t_next;
        points.push(m.wrap(state.p));
        tangents.push(state.v);
        times.push(t);
        if t >= cap {
            break;
        }
    }

    let trapped = exit_time.is_none();
    let nontangential = if let Some(_te) = exit_time {
        let transversal = |p: [f64; 2], v: [f64; 2]| {
            if m.boundary_implicit(p).abs() > 1e-6 {
                return false;
            }
            let n = m.outward_normal(p);
            m.inner(p, v, n).abs() > 0.05
        };
        transversal(points[0], tangents[0])
            && transversal(*points.last().unwrap(), *tangents.last().unwrap())
    } else {
        false
    };

    Ok(GeodesicPath {
        points,
        tangents,
        times,
        exit_time,
        trapped,
        nontangential,
        step,
    })
}

/// Trace a unit-speed geodesic for a fixed arclength, ignoring the boundary.
///
/// Used to extend influx geodesics slightly past `∂M₀` (the ambient chart
/// formulas remain valid there) and to shoot normal geodesics for Fermi
/// charts.
pub fn trace_free(
    m: &Surface,
    x: [f64; 2],
    xi: [f64; 2],
    length: f64,
    step: f64,
) -> Result<GeodesicPath> {
    assert!(step > 0.0 && length > 0.0);
    let speed = m.norm(x, xi);
    if speed <= 0.0 {
        return Err(Error::Geometry("zero initial direction".into()));
    }
    let mut state = State {
        p: x,
        v: [xi[0] / speed, xi[1] / speed],
    };
    let n = (length / step).ceil() as usize;
    let h = length / n as f64;
    let mut points = vec![m.wrap(state.p)];
    let mut tangents = vec![state.v];
    let mut times = vec![0.0];
    for k in 1..=n {
        state = rk4_step(m, state, h)?;
        points.push(m.wrap(state.p));
        tangents.push(state.v);
        times.push(k as f64 * h);
    }
    Ok(GeodesicPath {
        points,
        tangents,
        times,
        exit_time: Some(length),
        trapped: false,
        nontangential: false,
        step: h,
    })
}

/// Detect transversal self-intersections of a geodesic path.
///
/// Returns pairs of arclength values `(t_a, t_b)` with `t_a < t_b` where the
/// path meets itself; detection is by node proximity below `radius` with a
/// transversality check on the tangents.
pub fn self_intersections(m: &Surface, path: &GeodesicPath, radius: f64) -> Vec<(f64, f64)> {
    let mut hits: Vec<(f64, f64)> = Vec::new();
    let n = path.len();
    let skip = (2.0 * radius / path.step).ceil() as usize + 2;
    for i in 0..n {
        for j in (i + skip)..n {
            let d = m.displacement(path.points[i], path.points[j]);
            let dist = m.norm(path.points[i], d);
            if dist < radius {
                let cross = path.tangents[i][0] * path.tangents[j][1]
                    - path.tangents[i][1] * path.tangents[j][0];
                if cross.abs() > 0.05 {
                    let dup = hits.iter().any(|&(a, b)| {
                        (a - path.times[i]).abs() < 4.0 * radius
                            && (b - path.times[j]).abs() < 4.0 * radius
                    });
                    if !dup {
                        hits.push((path.times[i], path.times[j]));
                    }
                }
            }
        }
    }
    hits
}
