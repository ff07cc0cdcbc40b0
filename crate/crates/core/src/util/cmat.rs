//! Small dense complex matrices (rank 1..=3 in practice) with the handful of
//! structured operations the bundle machinery needs: skew-Hermitian checks,
//! unitary projection, exponentials and principal logarithms of unitaries.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex matrix alias used throughout the crate.
pub type CMat = DMatrix<Complex64>;

pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Identity of rank `m`.
pub fn eye(m: usize) -> CMat {
    CMat::identity(m, m)
}

/// Operator-ish norm: Frobenius norm (cheap, equivalent up to sqrt(m)).
pub fn norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|| A + A* ||`, zero for skew-Hermitian matrices.
pub fn skew_hermitian_defect(a: &CMat) -> f64 {
    norm(&(a + a.adjoint()))
}

/// `|| U U* - I ||`, zero for unitary matrices.
pub fn unitary_defect(u: &CMat) -> f64 {
    norm(&(u * u.adjoint() - eye(u.nrows())))
}

/// Determinant for ranks 1..=3 (closed form).
pub fn det(a: &CMat) -> Complex64 {
    let m = a.nrows();
    match m {
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        3 => {
            a[(0, 0)] * (a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)])
                - a[(0, 1)] * (a[(1, 0)] * a[(2, 2)] - a[(1, 2)] * a[(2, 0)])
                + a[(0, 2)] * (a[(1, 0)] * a[(2, 1)] - a[(1, 1)] * a[(2, 0)])
        }
        _ => a.clone().lu().determinant(),
    }
}

/// Matrix exponential by scaling-and-squaring with a Taylor kernel.
///
/// Accurate to machine precision for the moderate-norm matrices that occur
/// here (skew-Hermitian generators, interpolation of transports).
pub fn expm(a: &CMat) -> CMat {
    let m = a.nrows();
    let nrm = norm(a);
    let k = if nrm > 0.5 {
        (nrm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / Complex64::new(2f64.powi(k as i32), 0.0);
    // Taylor on the scaled matrix; ||scaled|| <= 0.5 so 20 terms are plenty.
    let mut sum = eye(m);
    let mut term = eye(m);
    for j in 1..=20 {
        term = (&term * &scaled) / Complex64::new(j as f64, 0.0);
        sum += &term;
        if norm(&term) < 1e-18 {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..k {
        out = &out * &out;
    }
    out
}

/// Principal square root by the Denman-Beavers iteration.
///
/// Valid for matrices with no eigenvalue on the closed negative real axis,
/// which holds for the near-identity unitaries this is applied to.
fn sqrtm(a: &CMat) -> Option<CMat> {
    let m = a.nrows();
    let mut y = a.clone();
    let mut z = eye(m);
    for _ in 0..60 {
        let yi = y.clone().try_inverse()?;
        let zi = z.clone().try_inverse()?;
        let y_next = (&y + &zi) * Complex64::new(0.5, 0.0);
        let z_next = (&z + &yi) * Complex64::new(0.5, 0.0);
        let delta = norm(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta < 1e-15 {
            break;
        }
    }
    Some(y)
}

/// Principal logarithm of a unitary matrix by inverse scaling-and-squaring.
///
/// Fails (returns `None`) when an eigenvalue sits at -1, which is exactly the
/// branch-cut obstruction callers are expected to guard against.
pub fn logm_unitary(u: &CMat) -> Option<CMat> {
    let m = u.nrows();
    // Eigenvalue at -1 <=> det(U + I) = 0.
    if det(&(u + eye(m))).norm() < 1e-12 {
        return None;
    }
    let mut x = u.clone();
    let mut k = 0u32;
    while norm(&(&x - eye(m))) > 0.3 {
        x = sqrtm(&x)?;
        k += 1;
        if k > 40 {
            return None;
        }
    }
    // log(I + E) via the Taylor series, ||E|| <= 0.3.
    let e = &x - eye(m);
    let mut term = e.clone();
    let mut sum = CMat::zeros(m, m);
    for j in 1..=40 {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        sum += &term * Complex64::new(sign / j as f64, 0.0);
        term = &term * &e;
        if norm(&term) < 1e-18 {
            break;
        }
    }
    Some(sum * Complex64::new(2f64.powi(k as i32), 0.0))
}

/// Nearest-unitary (polar) projection via a Newton iteration on `U <- (U + U^-*)/2`.
pub fn unitarize(a: &CMat) -> CMat {
    let mut u = a.clone();
    for _ in 0..30 {
        let defect = unitary_defect(&u);
        if defect < 1e-15 {
            break;
        }
        if let Some(inv_adj) = u.adjoint().try_inverse() {
            u = (&u + inv_adj) * Complex64::new(0.5, 0.0);
        } else {
            break;
        }
    }
    u
}
