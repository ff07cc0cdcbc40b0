//! The quadratic-phase Riccati equation and the higher-order eikonal
//! hierarchy.
//!
//! The phase is `Theta = (t - t_off) + H(t) y^2 / 2 + sum_j theta_j(t) y^j`
//! with `H' + H^2 = F(t)` and each `theta_j` a linear ODE obtained by
//! zeroing the `y^j` coefficient of `e (d_t Theta)^2 + (d_y Theta)^2 - 1`.
//! Since `dim M0 = 2` the transversal block is a single complex scalar.

use crate::geometry::FermiChart;
use crate::util::series;
use crate::{Error, Result};
use num_complex::Complex64;

type C = Complex64;

/// Phase data on a dense t-grid.
#[derive(Debug, Clone)]
pub struct BeamPhase {
    pub t_grid: Vec<f64>,
    pub dt: f64,
    /// Offset subtracted from t in `Theta_0` (entry arclength of `M0`).
    pub t_offset: f64,
    /// `theta[i][j]`: coefficient of `y^j` at node `i` (`theta[i][0]` is
    /// `t - t_offset`, `theta[i][1] = 0`, `theta[i][2] = H/2`).
    pub theta: Vec<Vec<C>>,
    /// Exact time derivatives of the coefficients from the ODE right sides.
    pub theta_dot: Vec<Vec<C>>,
    /// Metric inverse-series `1/E` per node, to order `order + 2`.
    pub einv: Vec<Vec<f64>>,
    /// Metric series `E` per node.
    pub e_ser: Vec<Vec<f64>>,
    pub order: usize,
    /// Certified minimum of `Im H` over the grid.
    pub min_im_h: f64,
}

impl BeamPhase {
    pub fn h_at(&self, i: usize) -> C {
        self.theta[i][2] * 2.0
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.t_grid.len();
        let x = ((t - self.t_grid[0]) / self.dt).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        (i, x - i as f64)
    }

    /// Interpolated phase coefficients at arbitrary `t`.
    pub fn coeffs(&self, t: f64) -> Vec<C> {
        let (i, w) = self.locate(t);
        let mut out = self.theta[i].clone();
        for (k, v) in out.iter_mut().enumerate() {
            *v += (self.theta[i + 1][k] - self.theta[i][k]) * w;
        }
        out
    }

    /// `Theta(t, y)` by series evaluation.
    pub fn theta_at(&self, t: f64, y: f64) -> C {
        series::eval(&self.coeffs(t), y)
    }

    /// `Im Theta` lower bound check over the tube `|y| <= half`.
    pub fn im_margin(&self, half: f64) -> f64 {
        let mut worst = f64::INFINITY;
        for i in 0..self.t_grid.len() {
            for k in 0..=16 {
                let y = -half + 2.0 * half * k as f64 / 16.0;
                if y.abs() < 1e-9 {
                    continue;
                }
                let im = series::eval(&self.theta[i], y).im;
                worst = worst.min(im / (y * y));
            }
        }
        worst
    }
}

/// Right-hand sides for `(H, theta_3..theta_N)` at one metric sample.
///
/// `einv` is the series of `1/E`; returns the exact `theta_dot` values,
/// sweeping orders upward. The `y^j` coefficient of the eikonal defect with
/// `theta_dot_j` set to zero determines `theta_dot_j = -coeff / 2`.
fn rhs(theta: &[C], einv: &[f64], f_driver: f64, order: usize) -> Vec<C> {
    let mut dot = vec![C::new(0.0, 0.0); order + 1];
    dot[0] = C::new(1.0, 0.0);
    let h = theta[2] * 2.0;
    dot[2] = (C::new(f_driver, 0.0) - h * h) * 0.5;
    let e_c: Vec<C> = einv.iter().map(|&x| C::new(x, 0.0)).collect();
    // d_y Theta as a series (independent of the dots)
    let dy_theta = series::deriv(theta);
    let dy2 = series::mul(&dy_theta, &dy_theta, order + 1);
    for j in 3..=order {
        // d_t Theta with dots known below order j
        let mut dt_theta = dot.clone();
        for d in dt_theta.iter_mut().skip(j) {
            *d = C::new(0.0, 0.0);
        }
        let dt2 = series::mul(&dt_theta, &dt_theta, order + 1);
        let p = series::add(&series::mul(&e_c, &dt2, order + 1), &dy2);
        // eikonal defect coefficient at y^j (the constant 1 cancels at j=0)
        dot[j] = -p[j] * 0.5;
    }
    dot
}

/// Solve the phase hierarchy along the chart with initial `H(t0) = h0` and
/// `theta_j(t0) = 0`.
///
/// `t_offset` shifts the zeroth coefficient so that `Theta_0 = t - t_offset`
/// vanishes where the geodesic enters the surface. Positivity of `Im H` is
/// certified at every node; a violation retries at half the step before
/// giving up.
pub fn riccati_solve(
    chart: &FermiChart,
    h0: C,
    order: usize,
    dt: f64,
    t_offset: f64,
) -> Result<BeamPhase> {
    if h0.im <= 0.0 {
        return Err(Error::Geometry("Im H(t0) must be positive".into()));
    }
    let t_lo = chart.t_grid[0];
    let t_hi = *chart.t_grid.last().unwrap();
    let mut step = dt;
    for _attempt in 0..3 {
        match integrate(chart, h0, order, step, t_lo, t_hi, t_offset) {
            Ok(phase) => return Ok(phase),
            Err(Error::Geometry(_)) => {
                step *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Geometry(
        "Riccati positivity lost even after step refinement".into(),
    ))
}

fn integrate(
    chart: &FermiChart,
    h0: C,
    order: usize,
    dt: f64,
    t_lo: f64,
    t_hi: f64,
    t_offset: f64,
) -> Result<BeamPhase> {
    let n = ((t_hi - t_lo) / dt).ceil() as usize + 1;
    let dt = (t_hi - t_lo) / (n - 1) as f64;
    // metric series at arbitrary t by linear interpolation of chart nodes
    let einv_at = |t: f64| -> Vec<f64> {
        let nc = chart.t_grid.len();
        let x = ((t - chart.t_grid[0]) / chart.dt).clamp(0.0, (nc - 1) as f64);
        let i = (x.floor() as usize).min(nc - 2);
        let w = x - i as f64;
        let a = &chart.einv_series[i];
        let b = &chart.einv_series[i + 1];
        let len = a.len().max(b.len()).max(order + 3);
        (0..len)
            .map(|k| {
                let av = a.get(k).copied().unwrap_or(0.0);
                let bv = b.get(k).copied().unwrap_or(0.0);
                av + w * (bv - av)
            })
            .collect()
    };
    let e_at = |t: f64| -> Vec<f64> {
        let nc = chart.t_grid.len();
        let x = ((t - chart.t_grid[0]) / chart.dt).clamp(0.0, (nc - 1) as f64);
        let i = (x.floor() as usize).min(nc - 2);
        let w = x - i as f64;
        let a = &chart.e_series[i];
        let b = &chart.e_series[i + 1];
        let len = a.len().max(b.len()).max(order + 3);
        (0..len)
            .map(|k| {
                let av = a.get(k).copied().unwrap_or(0.0);
                let bv = b.get(k).copied().unwrap_or(0.0);
                av + w * (bv - av)
            })
            .collect()
    };

    let mut t_grid = Vec::with_capacity(n);
    let mut theta_all = Vec::with_capacity(n);
    let mut dots_all = Vec::with_capacity(n);
    let mut state = vec![C::new(0.0, 0.0); order + 1];
    state[0] = C::new(t_lo - t_offset, 0.0);
    state[2] = h0 * 0.5;
    let mut min_im = f64::INFINITY;

    for i in 0..n {
        let t = t_lo + i as f64 * dt;
        let einv = einv_at(t);
        let dots = rhs(&state, &einv, chart.f_at(t), order);
        min_im = min_im.min((state[2] * 2.0).im);
        if (state[2] * 2.0).im <= 0.0 {
            return Err(Error::Geometry(format!(
                "Im H lost positivity at t = {t:.4}"
            )));
        }
        t_grid.push(t);
        theta_all.push(state.clone());
        dots_all.push(dots.clone());
        if i + 1 == n {
            break;
        }
        // RK4 step
        let add = |a: &[C], b: &[C], s: f64| -> Vec<C> {
            a.iter().zip(b).map(|(x, y)| x + y * s).collect()
        };
        let k1 = dots;
        let k2 = rhs(&add(&state, &k1, 0.5 * dt), &einv_at(t + 0.5 * dt), chart.f_at(t + 0.5 * dt), order);
        let k3 = rhs(&add(&state, &k2, 0.5 * dt), &einv_at(t + 0.5 * dt), chart.f_at(t + 0.5 * dt), order);
        let k4 = rhs(&add(&state, &k3, dt), &einv_at(t + dt), chart.f_at(t + dt), order);
        for k in 0..=order {
            state[k] += (k1[k] + k2[k] * 2.0 + k3[k] * 2.0 + k4[k]) * (dt / 6.0);
        }
    }

    let e_ser: Vec<Vec<f64>> = t_grid.iter().map(|&t| e_at(t)).collect();
    let einv: Vec<Vec<f64>> = t_grid.iter().map(|&t| einv_at(t)).collect();
    Ok(BeamPhase {
        t_grid,
        dt,
        t_offset,
        theta: theta_all,
        theta_dot: dots_all,
        einv,
        e_ser,
        order,
        min_im_h: min_im,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodesic_trace, fermi::fermi_chart, Surface};

    fn flat_chart() -> FermiChart {
        let m = Surface::euclidean_disk();
        let path = geodesic_trace(&m, [-1.0, 0.0], [1.0, 0.0], 1e-3).unwrap();
        fermi_chart(&m, &path, 0.0, 2.0, 0.2, 5, 5e-3).unwrap()
    }

    #[test]
    fn flat_closed_form() {
        // F = 0, H(0) = i: H(t) = (t + i)/(t^2 + 1)
        let chart = flat_chart();
        let phase = riccati_solve(&chart, C::new(0.0, 1.0), 3, 1e-3, 0.0).unwrap();
        let mut worst = 0.0f64;
        for (i, &t) in phase.t_grid.iter().enumerate() {
            let want = C::new(t, 1.0) / C::new(t * t + 1.0, 0.0);
            worst = worst.max((phase.h_at(i) - want).norm());
        }
        assert!(worst < 1e-8, "max closed-form error {worst}");
        assert!(phase.min_im_h > 0.0);
    }

    #[test]
    fn initial_condition_is_exact() {
        let chart = flat_chart();
        let phase = riccati_solve(&chart, C::new(0.3, 2.0), 4, 1e-3, 0.0).unwrap();
        assert!((phase.h_at(0) - C::new(0.3, 2.0)).norm() < 1e-14);
        for j in 3..=4 {
            assert!(phase.theta[0][j].norm() == 0.0);
        }
    }

    #[test]
    fn determinant_relation() {
        // det Im H(t) = det Im H(t0) exp(-2 int tr Re H)
        let m = Surface::catenoid_band(1.0);
        let path = geodesic_trace(&m, [-1.0, 0.3], [1.0, 0.45], 1e-3).unwrap();
        let t_hi = path.exit_time.unwrap();
        let chart = fermi_chart(&m, &path, 0.0, t_hi, 0.15, 4, 2e-3).unwrap();
        let phase = riccati_solve(&chart, C::new(0.2, std::f64::consts::PI), 4, 1e-3, 0.0).unwrap();
        // cumulative trapezoid of Re H
        let mut acc = 0.0;
        let mut worst = 0.0f64;
        let im0 = phase.h_at(0).im;
        for i in 1..phase.t_grid.len() {
            acc += 0.5 * (phase.h_at(i - 1).re + phase.h_at(i).re) * phase.dt;
            let want = im0 * (-2.0 * acc).exp();
            worst = worst.max((phase.h_at(i).im - want).abs());
        }
        assert!(worst < 1e-6, "det relation error {worst}");
    }

    #[test]
    fn eikonal_defect_high_order() {
        // |d Theta|^2 - 1 should vanish to order y^N: the residual series
        // evaluated at small y decays like y^{N+1}
        let m = Surface::catenoid_band(1.0);
        let path = geodesic_trace(&m, [-1.0, 0.2], [1.0, 0.3], 1e-3).unwrap();
        let t_hi = path.exit_time.unwrap();
        let order = 4;
        let chart = fermi_chart(&m, &path, 0.0, t_hi, 0.2, order + 2, 2e-3).unwrap();
        let phase = riccati_solve(&chart, C::new(0.0, 1.3), order, 5e-4, 0.0).unwrap();
        let i = phase.t_grid.len() / 2;
        let theta = &phase.theta[i];
        let dots = &phase.theta_dot[i];
        let e_c: Vec<C> = phase.einv[i].iter().map(|&x| C::new(x, 0.0)).collect();
        let dy = series::deriv(theta);
        let n_ext = 2 * order + 3;
        let dt2 = series::mul(dots, dots, n_ext);
        let dy2 = series::mul(&dy, &dy, n_ext);
        let mut p = series::add(&series::mul(&e_c, &dt2, n_ext), &dy2);
        p[0] -= C::new(1.0, 0.0);
        // low-order coefficients vanish by construction
        for (j, c) in p.iter().enumerate().take(order + 1) {
            assert!(c.norm() < 1e-10, "coefficient {j}: {c}");
        }
        // tail behaves like y^{N+1}
        let mut ys = Vec::new();
        let mut errs = Vec::new();
        for &y in &[0.02, 0.04, 0.08] {
            ys.push(y);
            errs.push(series::eval(&p, y).norm().max(1e-16));
        }
        let slope = crate::util::quad::loglog_slope(&ys, &errs);
        assert!(
            slope >= order as f64 + 0.7,
            "eikonal tail exponent {slope}"
        );
    }

    #[test]
    fn positivity_margin_reported() {
        let chart = flat_chart();
        let phase = riccati_solve(&chart, C::new(0.0, std::f64::consts::PI), 3, 1e-3, 0.0).unwrap();
        assert!(phase.im_margin(0.1) > 0.0);
    }
}
