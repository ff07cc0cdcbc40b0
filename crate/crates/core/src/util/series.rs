//! Truncated power-series arithmetic in one formal variable.
//!
//! Coefficients are complex; all operations truncate at the common length of
//! the operands. Used for the Fermi-coordinate metric expansion and the
//! phase/amplitude hierarchies of the Gaussian-beam construction, where a
//! handful of orders (N <= 6) is ever needed.

use num_complex::Complex64;

type C = Complex64;

/// `(a * b)` truncated to `n` coefficients.
pub fn mul(a: &[C], b: &[C], n: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); n];
    for (i, ai) in a.iter().enumerate().take(n) {
        for (j, bj) in b.iter().enumerate() {
            if i + j >= n {
                break;
            }
            out[i + j] += ai * bj;
        }
    }
    out
}

pub fn add(a: &[C], b: &[C]) -> Vec<C> {
    let n = a.len().max(b.len());
    let mut out = vec![C::new(0.0, 0.0); n];
    for (i, v) in a.iter().enumerate() {
        out[i] += v;
    }
    for (i, v) in b.iter().enumerate() {
        out[i] += v;
    }
    out
}

pub fn scale(a: &[C], c: C) -> Vec<C> {
    a.iter().map(|v| v * c).collect()
}

/// Reciprocal series of `a` (requires `a[0] != 0`), truncated to `n`.
pub fn inv(a: &[C], n: usize) -> Vec<C> {
    assert!(a[0].norm() > 0.0, "series not invertible");
    let mut out = vec![C::new(0.0, 0.0); n];
    out[0] = C::new(1.0, 0.0) / a[0];
    for k in 1..n {
        let mut acc = C::new(0.0, 0.0);
        for j in 1..=k.min(a.len() - 1) {
            acc += a[j] * out[k - j];
        }
        out[k] = -acc / a[0];
    }
    out
}

/// Term-by-term derivative: `d/dy sum(a_k y^k)`.
pub fn deriv(a: &[C]) -> Vec<C> {
    if a.len() <= 1 {
        return vec![C::new(0.0, 0.0)];
    }
    (1..a.len()).map(|k| a[k] * C::new(k as f64, 0.0)).collect()
}

/// Evaluate the truncated series at `y`.
pub fn eval(a: &[C], y: f64) -> C {
    let mut acc = C::new(0.0, 0.0);
    for &c in a.iter().rev() {
        acc = acc * y + c;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C {
        C::new(x, 0.0)
    }

    #[test]
    fn mul_and_inv_roundtrip() {
        let a = vec![c(2.0), c(-1.0), c(0.5), c(0.25)];
        let ai = inv(&a, 4);
        let prod = mul(&a, &ai, 4);
        assert!((prod[0] - c(1.0)).norm() < 1e-14);
        for k in 1..4 {
            assert!(prod[k].norm() < 1e-14);
        }
    }

    #[test]
    fn eval_horner() {
        let a = vec![c(1.0), c(2.0), c(3.0)];
        assert!((eval(&a, 0.5) - c(1.0 + 1.0 + 0.75)).norm() < 1e-15);
    }
}
