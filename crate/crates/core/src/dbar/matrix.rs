//! Invertible matrix solutions of `dbar C = B C` by fixed-point iteration
//! on `C = I + Cauchy(B C)` (summing the Neumann series), with a
//! scalar-exponential restart for stubborn right-hand sides.

use super::cauchy::CauchyOp;
use super::plane::PlaneField;
use crate::util::cmat::{self, CMat};
use crate::{Error, Result};
use num_complex::Complex64;

type C = Complex64;

#[derive(Debug, Clone)]
pub struct DbarSolution {
    pub c: PlaneField,
    /// FD residual `|| dbar C - B C ||` (relative L2 over the grid).
    pub residual: f64,
    /// Certified minimum `|det C|` over the grid.
    pub min_det: f64,
    pub iterations: usize,
}

fn identity_field(b: &PlaneField) -> PlaneField {
    let mut out = b.clone();
    for v in &mut out.values {
        *v = CMat::identity(b.rank, b.rank);
    }
    out
}

fn sup_diff(a: &PlaneField, b: &PlaneField) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| cmat::norm(&(x - y)))
        .fold(0.0, f64::max)
}

/// Relative FD residual of the equation `dbar C = B C`, measured on the
/// interior of the grid.
fn equation_residual(b: &PlaneField, c: &PlaneField) -> f64 {
    let dc = c.dbar_fd();
    let bc = b.mul(c);
    let mut num = 0.0;
    let mut den = 0.0;
    let (nx, ny) = (c.nx, c.ny);
    for ix in 3..nx - 3 {
        for iy in 3..ny - 3 {
            let d = dc.at(ix, iy) - bc.at(ix, iy);
            num += d.iter().map(|z| z.norm_sqr()).sum::<f64>();
            den += c
                .at(ix, iy)
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>();
        }
    }
    (num / den.max(1e-300)).sqrt()
}

/// Solve `dbar C = B C` with `C` invertible and `C -> I` off the support.
///
/// Iterates `C <- I + Cauchy(B C)` to sup-norm tolerance 1e-10 (at most
/// `max_iter` rounds). On stagnation the iteration restarts from the
/// scalar-exponential preconditioner `C0 = exp(Cauchy(tr B / m)) I`, working
/// on the traceless remainder. Invertibility is certified by a minimum
/// `|det C|` bound; failure is an error, never a silent return.
pub fn solve_dbar_matrix(
    b: &PlaneField,
    init: Option<&PlaneField>,
    max_iter: usize,
) -> Result<DbarSolution> {
    let op = CauchyOp::new(b.nx, b.ny, b.dx, b.dy);
    solve_dbar_matrix_with(&op, b, init, max_iter)
}

/// Same as [`solve_dbar_matrix`] but reusing a prebuilt Cauchy operator
/// (the kernel build dominates when many planes share one geometry).
pub fn solve_dbar_matrix_with(
    op: &CauchyOp,
    b: &PlaneField,
    init: Option<&PlaneField>,
    max_iter: usize,
) -> Result<DbarSolution> {
    let m = b.rank;
    let tol = 1e-10;
    let ident = identity_field(b);

    // contraction estimate: ||Cauchy(B .)|| <~ ||B||_sup * (2/pi) * diam * log-ish
    let diam = ((b.nx as f64 * b.dx).powi(2) + (b.ny as f64 * b.dy).powi(2)).sqrt();
    let contraction = b.sup_norm() * diam * 2.0 / std::f64::consts::PI;

    let mut c = init.cloned().unwrap_or_else(|| ident.clone());
    let mut last_diff = f64::INFINITY;
    let mut iterations = 0;
    let mut restarted = false;
    for it in 0..max_iter {
        iterations = it + 1;
        let next = {
            let bc = b.mul(&c);
            let mut n = op.apply(&bc);
            for (nv, iv) in n.values.iter_mut().zip(&ident.values) {
                *nv += iv;
            }
            n
        };
        let diff = sup_diff(&next, &c);
        c = next;
        if diff < tol {
            break;
        }
        // stagnation: restart once through the scalar exponential
        if !restarted && it > 20 && diff > 0.5 * last_diff && diff > 1e-6 {
            restarted = true;
            let trace_over_m: Vec<C> = b
                .values
                .iter()
                .map(|v| v.trace() / C::new(m as f64, 0.0))
                .collect();
            let phi = op.apply_scalar(&trace_over_m);
            let mut c0 = b.clone();
            for (cv, p) in c0.values.iter_mut().zip(&phi) {
                *cv = CMat::identity(m, m) * p.exp();
            }
            c = c0;
        }
        last_diff = diff;
        if it + 1 == max_iter {
            return Err(Error::Dbar(format!(
                "fixed point did not converge in {max_iter} iterations \
                 (last delta {diff:.3e}); contraction estimate {contraction:.2} \
                 suggests rescaling the plane or refining the grid"
            )));
        }
    }

    let min_det = c
        .values
        .iter()
        .map(|v| cmat::det(v).norm())
        .fold(f64::INFINITY, f64::min);
    if min_det < 1e-6 {
        return Err(Error::Dbar(format!(
            "solution not certifiably invertible: min |det C| = {min_det:.3e}"
        )));
    }
    let residual = equation_residual(b, &c);
    Ok(DbarSolution {
        c,
        residual,
        min_det,
        iterations,
    })
}

/// Solve the conjugate equation `d C / dz = B C` by conjugating:
/// `dbar conj(C) = conj(B) conj(C)`, exactly on grids.
pub fn solve_dpartial_matrix(
    b: &PlaneField,
    init: Option<&PlaneField>,
    max_iter: usize,
) -> Result<DbarSolution> {
    let op = CauchyOp::new(b.nx, b.ny, b.dx, b.dy);
    solve_dpartial_matrix_with(&op, b, init, max_iter)
}

/// Conjugate-equation solve with a shared Cauchy operator.
pub fn solve_dpartial_matrix_with(
    op: &CauchyOp,
    b: &PlaneField,
    init: Option<&PlaneField>,
    max_iter: usize,
) -> Result<DbarSolution> {
    let bc = b.conj();
    let init_c = init.map(|f| f.conj());
    let sol = solve_dbar_matrix_with(op, &bc, init_c.as_ref(), max_iter)?;
    Ok(DbarSolution {
        c: sol.c.conj(),
        residual: sol.residual,
        min_det: sol.min_det,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbar::cauchy::solve_dbar_scalar;

    fn smooth_bump(nx: usize, ny: usize, amp: f64) -> PlaneField {
        let half = 1.5;
        let d = 2.0 * half / (nx - 1) as f64;
        PlaneField::scalar_from_fn(nx, ny, -half, -half, d, d, move |x, y| {
            let r2 = x * x + y * y;
            if r2 < 1.0 {
                let b = (-r2 / (1.0 - r2)).exp();
                C::new(amp * b, 0.5 * amp * x * b)
            } else {
                C::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn b_zero_gives_identity() {
        let b = PlaneField::zeros(2, 32, 32, -1.0, -1.0, 0.0645, 0.0645);
        let sol = solve_dbar_matrix(&b, None, 50).unwrap();
        let idm = CMat::identity(2, 2);
        for v in &sol.c.values {
            assert!(cmat::norm(&(v - &idm)) < 1e-14);
        }
        assert!(sol.min_det > 0.999);
    }

    #[test]
    fn scalar_route_matches_exponential() {
        // m = 1: C = exp(Cauchy(B)); the two discrete routes differ by
        // O(h^2 ||B||^2), so agreement at 1e-6 needs this grid/amplitude
        let b = smooth_bump(256, 256, 0.15);
        let sol = solve_dbar_matrix(&b, None, 200).unwrap();
        let phi = solve_dbar_scalar(&b);
        let mut worst = 0.0f64;
        for (cv, pv) in sol.c.values.iter().zip(&phi.values) {
            let want = pv[(0, 0)].exp();
            worst = worst.max((cv[(0, 0)] - want).norm());
        }
        assert!(worst < 1e-6, "max |C - e^Phi| = {worst}");
        assert!(sol.residual < 1e-4, "residual {}", sol.residual);
    }

    #[test]
    fn commuting_diagonal_matches_componentwise() {
        let scalar = smooth_bump(64, 64, 0.4);
        let mut b = PlaneField::zeros(2, 64, 64, scalar.x0, scalar.y0, scalar.dx, scalar.dy);
        for (bv, sv) in b.values.iter_mut().zip(&scalar.values) {
            bv[(0, 0)] = sv[(0, 0)];
            bv[(1, 1)] = sv[(0, 0)] * C::new(0.5, 0.1);
        }
        let sol = solve_dbar_matrix(&b, None, 200).unwrap();
        // componentwise scalar solves through the same fixed point
        let mut s00 = scalar.clone();
        let mut s11 = scalar.clone();
        for ((a, b0), b1) in scalar.values.iter().zip(&mut s00.values).zip(&mut s11.values) {
            *b0 = a.clone();
            *b1 = a * C::new(0.5, 0.1);
        }
        let c00 = solve_dbar_matrix(&s00, None, 200).unwrap().c;
        let c11 = solve_dbar_matrix(&s11, None, 200).unwrap().c;
        for ((cv, w0), w1) in sol.c.values.iter().zip(&c00.values).zip(&c11.values) {
            assert!((cv[(0, 0)] - w0[(0, 0)]).norm() < 1e-10);
            assert!((cv[(1, 1)] - w1[(0, 0)]).norm() < 1e-10);
            assert!(cv[(0, 1)].norm() < 1e-12);
        }
    }

    #[test]
    fn noncommuting_matrix_solve_certified() {
        let nx = 192;
        let half = 1.5;
        let d = 2.0 * half / (nx - 1) as f64;
        let b = PlaneField::from_fn(2, nx, nx, -half, -half, d, d, |x, y| {
            let r2 = x * x + y * y;
            let bump = if r2 < 1.0 { (-r2 / (1.0 - r2)).exp() } else { 0.0 };
            CMat::from_row_slice(
                2,
                2,
                &[
                    C::new(0.0, 0.3 * bump),
                    C::new(0.25 * bump, 0.1 * bump * x),
                    C::new(-0.25 * bump, 0.1 * bump * x),
                    C::new(0.0, -0.2 * bump * y),
                ],
            )
        });
        let sol = solve_dbar_matrix(&b, None, 300).unwrap();
        assert!(sol.min_det >= 1e-6);
        assert!(sol.residual < 1e-4, "residual {}", sol.residual);
    }

    #[test]
    fn conjugate_route_is_exact_conjugate() {
        let b = smooth_bump(48, 48, 0.4);
        let dbar = solve_dbar_matrix(&b.conj(), None, 200).unwrap();
        let dz = solve_dpartial_matrix(&b, None, 200).unwrap();
        for (x, y) in dz.c.values.iter().zip(&dbar.c.values) {
            let yc = y.map(|z| z.conj());
            assert!(cmat::norm(&(x - yc)) == 0.0);
        }
    }

    #[test]
    fn divergence_reports_scaling_hint() {
        // huge B on a big box: the contraction fails
        let n = 48;
        let b = PlaneField::scalar_from_fn(n, n, -4.0, -4.0, 8.0 / 47.0, 8.0 / 47.0, |x, y| {
            C::new(0.0, 40.0 * (-(x * x + y * y)).exp())
        });
        match solve_dbar_matrix(&b, None, 60) {
            Err(Error::Dbar(msg)) => assert!(msg.contains("contraction")),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
