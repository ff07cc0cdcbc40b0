//! Matrix-valued fields on a uniform rectangular grid in the complex plane
//! `z = x1 + i r`.

use crate::util::cmat::CMat;
use num_complex::Complex64;

type C = Complex64;

/// Rectangular grid of `m x m` complex matrices over the `(x1, r)` plane.
///
/// Values are stored row-major in `ix * ny + iy`. Fields are understood to
/// vanish outside the grid (compact support).
#[derive(Debug, Clone)]
pub struct PlaneField {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub rank: usize,
    pub values: Vec<CMat>,
}

impl PlaneField {
    pub fn zeros(rank: usize, nx: usize, ny: usize, x0: f64, y0: f64, dx: f64, dy: f64) -> Self {
        PlaneField {
            nx,
            ny,
            x0,
            y0,
            dx,
            dy,
            rank,
            values: vec![CMat::zeros(rank, rank); nx * ny],
        }
    }

    /// Fill from a function of the complex coordinate.
    pub fn from_fn<F: FnMut(f64, f64) -> CMat>(
        rank: usize,
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        dx: f64,
        dy: f64,
        mut f: F,
    ) -> Self {
        let mut out = Self::zeros(rank, nx, ny, x0, y0, dx, dy);
        for ix in 0..nx {
            for iy in 0..ny {
                out.values[ix * ny + iy] = f(x0 + ix as f64 * dx, y0 + iy as f64 * dy);
            }
        }
        out
    }

    /// Scalar grid helper (rank 1).
    pub fn scalar_from_fn<F: FnMut(f64, f64) -> C>(
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        dx: f64,
        dy: f64,
        mut f: F,
    ) -> Self {
        Self::from_fn(1, nx, ny, x0, y0, dx, dy, |x, y| {
            CMat::from_element(1, 1, f(x, y))
        })
    }

    pub fn at(&self, ix: usize, iy: usize) -> &CMat {
        &self.values[ix * self.ny + iy]
    }

    pub fn at_mut(&mut self, ix: usize, iy: usize) -> &mut CMat {
        &mut self.values[ix * self.ny + iy]
    }

    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x0 + ix as f64 * self.dx, self.y0 + iy as f64 * self.dy)
    }

    pub fn scalar_at(&self, ix: usize, iy: usize) -> C {
        debug_assert_eq!(self.rank, 1);
        self.values[ix * self.ny + iy][(0, 0)]
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn interp(&self, x: f64, y: f64) -> CMat {
        let fx = (x - self.x0) / self.dx;
        let fy = (y - self.y0) / self.dy;
        if fx < 0.0 || fy < 0.0 || fx > (self.nx - 1) as f64 || fy > (self.ny - 1) as f64 {
            return CMat::zeros(self.rank, self.rank);
        }
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iy = (fy.floor() as usize).min(self.ny - 2);
        let (wx, wy) = (fx - ix as f64, fy - iy as f64);
        let w00 = (1.0 - wx) * (1.0 - wy);
        let w10 = wx * (1.0 - wy);
        let w01 = (1.0 - wx) * wy;
        let w11 = wx * wy;
        self.at(ix, iy) * C::new(w00, 0.0)
            + self.at(ix + 1, iy) * C::new(w10, 0.0)
            + self.at(ix, iy + 1) * C::new(w01, 0.0)
            + self.at(ix + 1, iy + 1) * C::new(w11, 0.0)
    }

    /// Entrywise complex conjugate (not the adjoint).
    pub fn conj(&self) -> PlaneField {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.map(|z| z.conj());
        }
        out
    }

    /// Pointwise matrix product `self * other`.
    pub fn mul(&self, other: &PlaneField) -> PlaneField {
        assert_eq!(self.nx, other.nx);
        assert_eq!(self.ny, other.ny);
        let mut out = self.clone();
        for (o, b) in out.values.iter_mut().zip(&other.values) {
            *o = &*o * b;
        }
        out
    }

    /// `d-bar` of the field by centered differences (4th order in the
    /// interior, 2nd order one-sided at edges): `(d/dx + i d/dy)/2`.
    pub fn dbar_fd(&self) -> PlaneField {
        let mut out = self.clone();
        let dx4 = |f: &dyn Fn(isize) -> CMat, h: f64| -> CMat {
            (-f(2) + f(1) * C::new(8.0, 0.0) - f(-1) * C::new(8.0, 0.0) + f(-2))
                / C::new(12.0 * h, 0.0)
        };
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                let gx: CMat = if ix >= 2 && ix + 2 < self.nx {
                    let f = |o: isize| self.at((ix as isize + o) as usize, iy).clone();
                    dx4(&f, self.dx)
                } else if ix == 0 {
                    (self.at(1, iy) - self.at(0, iy)) / C::new(self.dx, 0.0)
                } else if ix == self.nx - 1 {
                    (self.at(ix, iy) - self.at(ix - 1, iy)) / C::new(self.dx, 0.0)
                } else {
                    (self.at(ix + 1, iy) - self.at(ix - 1, iy)) / C::new(2.0 * self.dx, 0.0)
                };
                let gy: CMat = if iy >= 2 && iy + 2 < self.ny {
                    let f = |o: isize| self.at(ix, (iy as isize + o) as usize).clone();
                    dx4(&f, self.dy)
                } else if iy == 0 {
                    (self.at(ix, 1) - self.at(ix, 0)) / C::new(self.dy, 0.0)
                } else if iy == self.ny - 1 {
                    (self.at(ix, iy) - self.at(ix, iy - 1)) / C::new(self.dy, 0.0)
                } else {
                    (self.at(ix, iy + 1) - self.at(ix, iy - 1)) / C::new(2.0 * self.dy, 0.0)
                };
                *out.at_mut(ix, iy) = (gx + gy * C::new(0.0, 1.0)) * C::new(0.5, 0.0);
            }
        }
        out
    }

    /// Discrete L2 norm (cell-weighted Frobenius).
    pub fn l2_norm(&self) -> f64 {
        let cell = self.dx * self.dy;
        (self
            .values
            .iter()
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            * cell)
            .sqrt()
    }

    /// Sup of entry magnitudes.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}
