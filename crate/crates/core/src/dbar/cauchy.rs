//! The solid Cauchy transform `(1/(pi z)) * B` solving `dbar Phi = B`.
//!
//! Grid solves convolve with exact cell integrals of `1/(pi z)` via FFT, so
//! the scheme is the continuum transform of the piecewise-constant
//! interpolant (second-order accurate). Point evaluation desingularizes the
//! kernel in polar coordinates about the evaluation point, where it becomes
//! bounded.

use super::plane::PlaneField;
use crate::util::cmat::CMat;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

type C = Complex64;

/// Antiderivative `G` with `d^2 G / dx dy = 1/z`: `G = -i z (ln z - 1)`.
fn g_anti(z: C) -> C {
    if z.norm_sqr() == 0.0 {
        C::new(0.0, 0.0)
    } else {
        C::new(0.0, -1.0) * z * (z.ln() - 1.0)
    }
}

/// Exact `integral of 1/z` over the rectangle `[a,b] x [c,d]`.
///
/// Splits at the negative real axis so the principal branch is consistent;
/// signed zeros select the correct side of the cut.
fn rect_integral(a: f64, b: f64, c: f64, d: f64) -> C {
    if a < 0.0 && c < 0.0 && d > 0.0 {
        return rect_integral_raw(a, b, c, -0.0) + rect_integral_raw(a, b, 0.0, d);
    }
    rect_integral_raw(a, b, c, d)
}

fn rect_integral_raw(a: f64, b: f64, c: f64, d: f64) -> C {
    let g = |x: f64, y: f64| g_anti(C::new(x, y));
    g(b, d) - g(a, d) - g(b, c) + g(a, c)
}

/// `(1/pi) integral of 1/zeta` over the cell of size `dx x dy` centred at
/// `(cx, cy)` (the piecewise-constant interpolation kernel).
fn kernel_cell(cx: f64, cy: f64, dx: f64, dy: f64) -> C {
    rect_integral(cx - 0.5 * dx, cx + 0.5 * dx, cy - 0.5 * dy, cy + 0.5 * dy)
        / std::f64::consts::PI
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861136311594053, 0.347854845137454),
    (-0.339981043584856, 0.652145154862546),
    (0.339981043584856, 0.652145154862546),
    (0.861136311594053, 0.347854845137454),
];

/// Bilinear-interpolation (tent) kernel: the cell average of `kernel_cell`
/// as a function of its center. Using the tent instead of the box makes the
/// transform the exact Cauchy integral of the bilinear interpolant, smooth
/// enough that finite-difference `dbar` recovers the data at 2nd order.
fn kernel_tent(cx: f64, cy: f64, dx: f64, dy: f64) -> C {
    // near the singularity, subdivide the averaging cell before Gauss
    let near = cx.abs() <= 3.5 * dx && cy.abs() <= 3.5 * dy;
    let splits = if near { 6 } else { 1 };
    let mut acc = C::new(0.0, 0.0);
    let (sx, sy) = (dx / splits as f64, dy / splits as f64);
    for ix in 0..splits {
        for iy in 0..splits {
            let ox = cx - 0.5 * dx + (ix as f64 + 0.5) * sx;
            let oy = cy - 0.5 * dy + (iy as f64 + 0.5) * sy;
            for (gx, wx) in GAUSS4 {
                for (gy, wy) in GAUSS4 {
                    let px = ox + 0.5 * sx * gx;
                    let py = oy + 0.5 * sy * gy;
                    acc += kernel_cell(px, py, dx, dy) * (wx * wy * 0.25);
                }
            }
        }
    }
    acc / (splits * splits) as f64
}

struct Fft2 {
    px: usize,
    py: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(px: usize, py: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            px,
            py,
            fwd_x: planner.plan_fft_forward(px),
            fwd_y: planner.plan_fft_forward(py),
            inv_x: planner.plan_fft_inverse(px),
            inv_y: planner.plan_fft_inverse(py),
        }
    }

    fn forward(&self, data: &mut [C]) {
        // rows (contiguous stride ny), then columns via scratch
        for row in data.chunks_mut(self.py) {
            self.fwd_y.process(row);
        }
        let mut col = vec![C::new(0.0, 0.0); self.px];
        for j in 0..self.py {
            for i in 0..self.px {
                col[i] = data[i * self.py + j];
            }
            self.fwd_x.process(&mut col);
            for i in 0..self.px {
                data[i * self.py + j] = col[i];
            }
        }
    }

    fn inverse(&self, data: &mut [C]) {
        for row in data.chunks_mut(self.py) {
            self.inv_y.process(row);
        }
        let mut col = vec![C::new(0.0, 0.0); self.px];
        for j in 0..self.py {
            for i in 0..self.px {
                col[i] = data[i * self.py + j];
            }
            self.inv_x.process(&mut col);
            for i in 0..self.px {
                data[i * self.py + j] = col[i];
            }
        }
        let scale = 1.0 / (self.px * self.py) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Discrete Cauchy operator for a fixed grid geometry, reusable across
/// many right-hand sides (the matrix fixed point applies it repeatedly).
pub struct CauchyOp {
    nx: usize,
    ny: usize,
    fft: Fft2,
    kernel_hat: Vec<C>,
}

impl CauchyOp {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Self {
        let px = (2 * nx).next_power_of_two();
        let py = (2 * ny).next_power_of_two();
        let fft = Fft2::new(px, py);
        let mut kernel = vec![C::new(0.0, 0.0); px * py];
        let offsets: Vec<(isize, isize)> = (-(nx as isize - 1)..=(nx as isize - 1))
            .flat_map(|di| {
                (-(ny as isize - 1)..=(ny as isize - 1)).map(move |dj| (di, dj))
            })
            .collect();
        let values: Vec<C> = {
            use rayon::prelude::*;
            offsets
                .par_iter()
                .map(|&(di, dj)| kernel_tent(di as f64 * dx, dj as f64 * dy, dx, dy))
                .collect()
        };
        for (&(di, dj), val) in offsets.iter().zip(values) {
            let i = di.rem_euclid(px as isize) as usize;
            let j = dj.rem_euclid(py as isize) as usize;
            kernel[i * py + j] = val;
        }
        fft.forward(&mut kernel);
        CauchyOp {
            nx,
            ny,
            fft,
            kernel_hat: kernel,
        }
    }

    /// Apply to a scalar grid (row-major `ix * ny + iy`).
    pub fn apply_scalar(&self, data: &[C]) -> Vec<C> {
        let (px, py) = (self.fft.px, self.fft.py);
        let mut buf = vec![C::new(0.0, 0.0); px * py];
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                buf[ix * py + iy] = data[ix * self.ny + iy];
            }
        }
        self.fft.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft.inverse(&mut buf);
        let mut out = vec![C::new(0.0, 0.0); self.nx * self.ny];
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                out[ix * self.ny + iy] = buf[ix * py + iy];
            }
        }
        out
    }

    /// Apply entrywise to a matrix field.
    pub fn apply(&self, field: &PlaneField) -> PlaneField {
        let m = field.rank;
        let mut out = field.clone();
        for r in 0..m {
            for c in 0..m {
                let data: Vec<C> = field.values.iter().map(|v| v[(r, c)]).collect();
                let conv = self.apply_scalar(&data);
                for (o, v) in out.values.iter_mut().zip(conv) {
                    o[(r, c)] = v;
                }
            }
        }
        out
    }
}

/// Solve `dbar Phi = B` on the grid of `B`; `Phi` decays off the support.
pub fn solve_dbar_scalar(b: &PlaneField) -> PlaneField {
    let op = CauchyOp::new(b.nx, b.ny, b.dx, b.dy);
    op.apply(b)
}

/// Point evaluation of the Cauchy transform by polar-coordinate quadrature
/// centred at `w` (the substitution that makes the kernel bounded):
/// `Phi(w) = -(1/pi) int_0^R int_0^{2pi} B(w + r e^{i th}) e^{-i th} dth dr`.
pub fn cauchy_transform(b: &PlaneField, w: (f64, f64), n_r: usize, n_theta: usize) -> CMat {
    // radius reaching every grid corner from w
    let corners = [
        (b.x0, b.y0),
        (b.x0 + (b.nx - 1) as f64 * b.dx, b.y0),
        (b.x0, b.y0 + (b.ny - 1) as f64 * b.dy),
        (
            b.x0 + (b.nx - 1) as f64 * b.dx,
            b.y0 + (b.ny - 1) as f64 * b.dy,
        ),
    ];
    let r_max = corners
        .iter()
        .map(|c| ((c.0 - w.0).powi(2) + (c.1 - w.1).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let dr = r_max / n_r as f64;
    let dth = 2.0 * std::f64::consts::PI / n_theta as f64;
    let mut acc = CMat::zeros(b.rank, b.rank);
    // midpoint in r, trapezoid (periodic) in theta
    for ir in 0..n_r {
        let r = (ir as f64 + 0.5) * dr;
        for it in 0..n_theta {
            let th = it as f64 * dth;
            let x = w.0 + r * th.cos();
            let y = w.1 + r * th.sin();
            let phase = C::new(0.0, -th).exp();
            acc += b.interp(x, y) * (phase * dr * dth);
        }
    }
    acc * C::new(-1.0 / std::f64::consts::PI, 0.0)
}
