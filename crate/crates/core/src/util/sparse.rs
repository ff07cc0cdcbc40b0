//! Sparse complex linear algebra: CSR matrices and the Krylov solvers used by
//! the Dirichlet/DN machinery and the tomographic inversion.

use num_complex::Complex64;

type C = Complex64;

/// Compressed sparse row matrix over `Complex64`.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<C>,
}

/// Triplet assembler; duplicate entries are summed on `to_csr`.
#[derive(Debug, Default, Clone)]
pub struct Builder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, C)>,
}

impl Builder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: C) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v.norm_sqr() != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn to_csr(mut self) -> Csr {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, C)> = Vec::with_capacity(self.entries.len());
        for (i, j, v) in self.entries.drain(..) {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        let mut row_ptr = vec![0usize; self.nrows + 1];
        for &(i, _, _) in &merged {
            row_ptr[i + 1] += 1;
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|e| e.1).collect();
        let values = merged.iter().map(|e| e.2).collect();
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl Csr {
    /// `y = A x`.
    pub fn mul_vec(&self, x: &[C]) -> Vec<C> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![C::new(0.0, 0.0); self.nrows];
        for i in 0..self.nrows {
            let mut acc = C::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
        y
    }

    /// `y = A* x` (conjugate transpose).
    pub fn mul_adjoint_vec(&self, x: &[C]) -> Vec<C> {
        debug_assert_eq!(x.len(), self.nrows);
        let mut y = vec![C::new(0.0, 0.0); self.ncols];
        for i in 0..self.nrows {
            let xi = x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k].conj() * xi;
            }
        }
        y
    }

    pub fn diagonal(&self) -> Vec<C> {
        let mut d = vec![C::new(0.0, 0.0); self.nrows.min(self.ncols)];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] += self.values[k];
                }
            }
        }
        d
    }
}

pub fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: C, x: &[C], y: &mut [C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub residual_history: Vec<f64>,
}

/// BiCGStab with Jacobi preconditioning for square complex systems.
pub fn bicgstab(
    a: &Csr,
    b: &[C],
    tol: f64,
    max_iter: usize,
) -> (Vec<C>, SolveReport) {
    let n = b.len();
    let diag = a.diagonal();
    let precond = |v: &[C]| -> Vec<C> {
        v.iter()
            .zip(&diag)
            .map(|(x, d)| {
                if d.norm_sqr() > 1e-300 {
                    x / d
                } else {
                    *x
                }
            })
            .collect()
    };
    let bnorm = norm2(b).max(1e-300);
    let mut x = vec![C::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = C::new(1.0, 0.0);
    let mut alpha = C::new(1.0, 0.0);
    let mut omega = C::new(1.0, 0.0);
    let mut v = vec![C::new(0.0, 0.0); n];
    let mut p = vec![C::new(0.0, 0.0); n];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 0..max_iter {
        iters = it + 1;
        let rho_new = dot(&r0, &r);
        if rho_new.norm() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = precond(&p);
        v = a.mul_vec(&ph);
        alpha = rho / dot(&r0, &v);
        let mut s = r.clone();
        axpy(-alpha, &v, &mut s);
        let snorm = norm2(&s) / bnorm;
        if snorm < tol {
            axpy(alpha, &ph, &mut x);
            history.push(snorm);
            converged = true;
            break;
        }
        let sh = precond(&s);
        let t = a.mul_vec(&sh);
        let tt = dot(&t, &t);
        if tt.norm() < 1e-300 {
            break;
        }
        omega = dot(&t, &s) / tt;
        axpy(alpha, &ph, &mut x);
        axpy(omega, &sh, &mut x);
        r = s;
        axpy(-omega, &t, &mut r);
        let rnorm = norm2(&r) / bnorm;
        history.push(rnorm);
        if rnorm < tol {
            converged = true;
            break;
        }
        if omega.norm() < 1e-300 {
            break;
        }
    }
    let res = norm2(&{
        let mut rr = b.to_vec();
        let ax = a.mul_vec(&x);
        for i in 0..n {
            rr[i] -= ax[i];
        }
        rr
    }) / bnorm;
    (
        x,
        SolveReport {
            iterations: iters,
            relative_residual: res,
            converged: converged && res < tol * 10.0,
            residual_history: history,
        },
    )
}

/// Conjugate gradients on the normal equations `A* A x = A* b` (CGNR).
///
/// Works for rectangular or near-singular square systems; converges to the
/// least-squares solution. Jacobi preconditioning on `A* A` via column norms.
pub fn cgnr(a: &Csr, b: &[C], tol: f64, max_iter: usize) -> (Vec<C>, SolveReport) {
    let n = a.ncols;
    // column norms of A for Jacobi on A*A
    let mut coldiag = vec![0.0f64; n];
    for i in 0..a.nrows {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            coldiag[a.col_idx[k]] += a.values[k].norm_sqr();
        }
    }
    let precond = |v: &[C]| -> Vec<C> {
        v.iter()
            .zip(&coldiag)
            .map(|(x, d)| if *d > 1e-300 { x / *d } else { *x })
            .collect()
    };
    let atb = a.mul_adjoint_vec(b);
    let rhs_norm = norm2(&atb).max(1e-300);
    let mut x = vec![C::new(0.0, 0.0); n];
    let mut r = atb;
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 0..max_iter {
        iters = it + 1;
        let ap = a.mul_vec(&p);
        let atap = a.mul_adjoint_vec(&ap);
        let denom = dot(&p, &atap);
        if denom.norm() < 1e-300 {
            break;
        }
        let alpha = rz / denom;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &atap, &mut r);
        let rel = norm2(&r) / rhs_norm;
        history.push(rel);
        if rel < tol {
            converged = true;
            break;
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = history.last().copied().unwrap_or(1.0);
    (
        x,
        SolveReport {
            iterations: iters,
            relative_residual: rel,
            converged,
            residual_history: history,
        },
    )
}

/// Plain CG for Hermitian positive-definite operators given as a closure.
pub fn cg_operator<F>(
    apply: F,
    b: &[C],
    tol: f64,
    max_iter: usize,
) -> (Vec<C>, SolveReport)
where
    F: Fn(&[C]) -> Vec<C>,
{
    let n = b.len();
    if norm2(b) == 0.0 {
        return (
            vec![C::new(0.0, 0.0); n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
                residual_history: vec![],
            },
        );
    }
    let bnorm = norm2(b).max(1e-300);
    let mut x = vec![C::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 0..max_iter {
        iters = it + 1;
        let ap = apply(&p);
        let denom = dot(&p, &ap);
        if denom.norm() < 1e-300 {
            break;
        }
        let alpha = rr / denom;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel < tol {
            converged = true;
            break;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let rel = history.last().copied().unwrap_or(1.0);
    (
        x,
        SolveReport {
            iterations: iters,
            relative_residual: rel,
            converged,
            residual_history: history,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        let mut b = Builder::new(n, n);
        for i in 0..n {
            b.push(i, i, C::new(2.0, 0.0));
            if i > 0 {
                b.push(i, i - 1, C::new(-1.0, 0.0));
            }
            if i + 1 < n {
                b.push(i, i + 1, C::new(-1.0, 0.0));
            }
        }
        b.to_csr()
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = Builder::new(2, 2);
        b.push(0, 0, C::new(1.0, 0.0));
        b.push(0, 0, C::new(2.0, 0.0));
        b.push(1, 0, C::new(3.0, 0.0));
        let m = b.to_csr();
        let y = m.mul_vec(&[C::new(1.0, 0.0), C::new(0.0, 0.0)]);
        assert!((y[0].re - 3.0).abs() < 1e-15);
        assert!((y[1].re - 3.0).abs() < 1e-15);
    }

    #[test]
    fn bicgstab_solves_spd() {
        let n = 64;
        let a = laplacian_1d(n);
        let xs: Vec<C> = (0..n).map(|i| C::new((i as f64).sin(), 0.3)).collect();
        let b = a.mul_vec(&xs);
        let (x, rep) = bicgstab(&a, &b, 1e-12, 1000);
        assert!(rep.converged, "residual {}", rep.relative_residual);
        let err: f64 = x
            .iter()
            .zip(&xs)
            .map(|(u, v)| (u - v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn cgnr_least_squares() {
        // Overdetermined: 3 rows, 2 cols.
        let mut b = Builder::new(3, 2);
        b.push(0, 0, C::new(1.0, 0.0));
        b.push(1, 1, C::new(1.0, 0.0));
        b.push(2, 0, C::new(1.0, 0.0));
        b.push(2, 1, C::new(1.0, 0.0));
        let a = b.to_csr();
        let rhs = vec![C::new(1.0, 0.0), C::new(2.0, 0.0), C::new(3.0, 0.0)];
        let (x, _) = cgnr(&a, &rhs, 1e-14, 200);
        // normal equations: [[2,1],[1,2]] x = [4,5] -> x = [1, 2]
        assert!((x[0].re - 1.0).abs() < 1e-10);
        assert!((x[1].re - 2.0).abs() < 1e-10);
    }

    #[test]
    fn cg_operator_matches_direct() {
        let n = 40;
        let a = laplacian_1d(n);
        let xs: Vec<C> = (0..n).map(|i| C::new(1.0 / (1.0 + i as f64), -0.2)).collect();
        let b = a.mul_vec(&xs);
        let (x, rep) = cg_operator(|v| a.mul_vec(v), &b, 1e-13, 500);
        assert!(rep.converged);
        let err: f64 = x
            .iter()
            .zip(&xs)
            .map(|(u, v)| (u - v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-9);
    }
}
