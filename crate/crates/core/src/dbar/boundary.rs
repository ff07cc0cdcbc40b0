//! Holomorphic boundary values: moment tests, Plemelj (Cauchy-integral)
//! extension into the interior, and winding numbers.

use crate::util::cmat::CMat;
use crate::{Error, Result};
use num_complex::Complex64;

type C = Complex64;

/// A sampled closed boundary curve with matrix values on it.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    /// Curve samples, positively oriented, not repeating the start point.
    pub z: Vec<C>,
    pub f: Vec<CMat>,
}

impl BoundaryTrace {
    pub fn scalar(z: Vec<C>, f: Vec<C>) -> Self {
        let f = f.into_iter().map(|v| CMat::from_element(1, 1, v)).collect();
        BoundaryTrace { z, f }
    }

    pub fn len_curve(&self) -> f64 {
        let n = self.z.len();
        (0..n).map(|i| (self.z[(i + 1) % n] - self.z[i]).norm()).sum()
    }

    fn sup_f(&self) -> f64 {
        self.f
            .iter()
            .flat_map(|m| m.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// `dz` by 4th-order centered differences along the closed polyline.
    fn dz(&self, i: usize) -> C {
        let n = self.z.len();
        let z = |o: isize| self.z[(i as isize + o).rem_euclid(n as isize) as usize];
        (-z(2) + z(1) * 8.0 - z(-1) * 8.0 + z(-2)) / 12.0
    }
}

#[derive(Debug, Clone)]
pub struct MomentTable {
    pub moments: Vec<f64>,
    pub pass: bool,
    pub threshold: f64,
}

/// Test whether boundary samples extend holomorphically: all contour
/// moments `oint z^k f dz`, `k = 0..K-1`, must vanish (trapezoid rule on
/// the closed curve, which is spectrally accurate for smooth data).
pub fn holomorphic_boundary_test(trace: &BoundaryTrace, k_count: usize, tol: f64) -> MomentTable {
    assert!(k_count >= 8, "need at least 8 moments");
    let n = trace.z.len();
    let mut moments = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut acc = CMat::zeros(trace.f[0].nrows(), trace.f[0].ncols());
        for i in 0..n {
            acc += &trace.f[i] * (trace.z[i].powu(k as u32) * trace.dz(i));
        }
        moments.push(acc.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt());
    }
    let threshold = tol * trace.sup_f().max(1e-300) * trace.len_curve();
    let pass = moments.iter().all(|m| *m <= threshold);
    MomentTable {
        moments,
        pass,
        threshold,
    }
}

/// Cauchy-integral (Plemelj) extension of holomorphic boundary values:
/// `F(z) = (1/2 pi i) oint f(zeta) / (zeta - z) dzeta` for interior `z`.
///
/// Points closer to the curve than `2 * ring` are filled by one-sided
/// linear extrapolation along the inward normal. Errors when the moment
/// test fails (the trace is not a holomorphic restriction).
pub struct PlemeljExtension {
    trace: BoundaryTrace,
    ring: f64,
}

impl PlemeljExtension {
    pub fn new(trace: BoundaryTrace, ring: f64, moment_tol: f64) -> Result<Self> {
        let table = holomorphic_boundary_test(&trace, 12, moment_tol);
        if !table.pass {
            let worst = table.moments.iter().cloned().fold(0.0, f64::max);
            return Err(Error::NotExtendable(worst));
        }
        Ok(PlemeljExtension { trace, ring })
    }

    /// Build without the holomorphy gate; the interior Cauchy integral is
    /// well defined for any trace (used by the non-abelian renormalizer,
    /// whose trace is holomorphic only for gauge-equivalent inputs).
    pub fn new_ungated(trace: BoundaryTrace, ring: f64) -> Self {
        PlemeljExtension { trace, ring }
    }

    fn raw(&self, z: C) -> CMat {
        let n = self.trace.z.len();
        let mut acc = CMat::zeros(self.trace.f[0].nrows(), self.trace.f[0].ncols());
        for i in 0..n {
            acc += &self.trace.f[i] * (self.trace.dz(i) / (self.trace.z[i] - z));
        }
        acc / C::new(0.0, 2.0 * std::f64::consts::PI)
    }

    fn distance_to_curve(&self, z: C) -> f64 {
        self.trace
            .z
            .iter()
            .map(|w| (w - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Evaluate the extension; near the curve uses the inward-offset
    /// extrapolation `2 F(z - d n) - F(z - 2 d n)`.
    pub fn eval(&self, z: C) -> CMat {
        let dist = self.distance_to_curve(z);
        if dist >= 2.0 * self.ring {
            return self.raw(z);
        }
        // inward direction: toward the curve centroid
        let n = self.trace.z.len() as f64;
        let centroid = self.trace.z.iter().sum::<C>() / n;
        let dir = centroid - z;
        let dir = if dir.norm() < 1e-12 {
            C::new(0.0, 0.0)
        } else {
            dir / dir.norm()
        };
        let d = 2.0 * self.ring - dist;
        // quadratic (3-point Lagrange) extrapolation back to z from safely
        // interior evaluation points along the inward direction
        let t1 = d + self.ring;
        let t2 = d + 2.0 * self.ring;
        let t3 = d + 3.0 * self.ring;
        let f1 = self.raw(z + dir * t1);
        let f2 = self.raw(z + dir * t2);
        let f3 = self.raw(z + dir * t3);
        let l1 = (0.0 - t2) * (0.0 - t3) / ((t1 - t2) * (t1 - t3));
        let l2 = (0.0 - t1) * (0.0 - t3) / ((t2 - t1) * (t2 - t3));
        let l3 = (0.0 - t1) * (0.0 - t2) / ((t3 - t1) * (t3 - t2));
        f1 * C::new(l1, 0.0) + f2 * C::new(l2, 0.0) + f3 * C::new(l3, 0.0)
    }

    /// Sup of `|F - f|` over the boundary samples.
    pub fn boundary_mismatch(&self) -> f64 {
        let mut worst = 0.0f64;
        for (z, f) in self.trace.z.iter().zip(&self.trace.f) {
            let got = self.eval(*z);
            worst = worst.max((got - f).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt());
        }
        worst
    }
}

/// Winding number of a nonvanishing scalar boundary trace: total continuous
/// argument increment over `2 pi`, rounded to the certified integer.
pub fn winding_number(samples: &[C]) -> Result<i64> {
    let min = samples.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min < 1e-8 {
        return Err(Error::Winding(format!(
            "samples approach zero (min |g| = {min:.3e})"
        )));
    }
    let n = samples.len();
    let mut total = 0.0;
    for i in 0..n {
        let ratio = samples[(i + 1) % n] / samples[i];
        total += ratio.arg();
    }
    let w = total / (2.0 * std::f64::consts::PI);
    let rounded = w.round();
    if (w - rounded).abs() > 0.05 {
        return Err(Error::Winding(format!(
            "argument increment {w:.4} is not close to an integer; refine the sampling"
        )));
    }
    Ok(rounded as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_trace<F: Fn(C) -> C>(n: usize, r: f64, f: F) -> BoundaryTrace {
        let z: Vec<C> = (0..n)
            .map(|k| C::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        let fv = z.iter().map(|&w| f(w)).collect();
        BoundaryTrace::scalar(z, fv)
    }

    #[test]
    fn holomorphic_passes() {
        let t = circle_trace(256, 1.0, |z| z * z);
        let table = holomorphic_boundary_test(&t, 10, 1e-8);
        assert!(table.pass, "moments {:?}", table.moments);
    }

    #[test]
    fn zbar_fails_with_area_moment() {
        let t = circle_trace(256, 1.0, |z| z.conj());
        let table = holomorphic_boundary_test(&t, 10, 1e-6);
        assert!(!table.pass);
        // moment k=0: oint conj(z) dz = 2 pi i (4th order in the sampling)
        assert!((table.moments[0] - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn plemelj_reproduces_polynomial() {
        let t = circle_trace(512, 1.0, |z| z.powu(3));
        let ext = PlemeljExtension::new(t, 0.02, 1e-8).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.4, 0.3), (-0.5, 0.2)] {
            let z = C::new(x, y);
            let got = ext.eval(z)[(0, 0)];
            assert!((got - z.powu(3)).norm() < 1e-6, "at {z}: {got}");
        }
    }

    #[test]
    fn plemelj_exponential_interior() {
        let t = circle_trace(512, 1.0, |z| z.exp());
        let ext = PlemeljExtension::new(t, 0.02, 1e-8).unwrap();
        for &(x, y) in &[(0.2, -0.1), (-0.6, 0.1), (0.0, 0.55)] {
            let z = C::new(x, y);
            let got = ext.eval(z)[(0, 0)];
            assert!((got - z.exp()).norm() < 1e-5, "at {z}: {got}");
        }
        assert!(ext.boundary_mismatch() < 1e-3);
    }

    #[test]
    fn plemelj_rejects_nonholomorphic() {
        let t = circle_trace(256, 1.0, |z| z.conj() + z);
        match PlemeljExtension::new(t, 0.02, 1e-8) {
            Err(Error::NotExtendable(worst)) => assert!(worst > 1.0),
            Err(e) => panic!("expected NotExtendable, got {e}"),
            Ok(_) => panic!("expected NotExtendable, got an extension"),
        }
    }

    #[test]
    fn winding_numbers() {
        let z1: Vec<C> = (0..256)
            .map(|k| C::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 256.0))
            .collect();
        assert_eq!(winding_number(&z1).unwrap(), 1);
        let z2: Vec<C> = z1.iter().map(|z| z * z).collect();
        assert_eq!(winding_number(&z2).unwrap(), 2);
        // e^{Phi} for continuous Phi has winding zero
        let z0: Vec<C> = z1
            .iter()
            .map(|z| (z * 1.3 + C::new(0.2, -0.4)).exp())
            .collect();
        assert_eq!(winding_number(&z0).unwrap(), 0);
        // nearly vanishing trace is rejected
        let bad: Vec<C> = z1.iter().map(|z| z - C::new(1.0, 0.0)).collect();
        assert!(winding_number(&bad).is_err());
    }

    #[test]
    fn nonvanishing_trace_with_zero_winding_has_log() {
        // winding-zero nonvanishing boundary trace extends with nonzero F
        let t = circle_trace(512, 1.0, |z| (z * 0.7).exp());
        let samples: Vec<C> = t.f.iter().map(|m| m[(0, 0)]).collect();
        assert_eq!(winding_number(&samples).unwrap(), 0);
        let ext = PlemeljExtension::new(t, 0.02, 1e-8).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.5, 0.1), (-0.3, -0.4)] {
            let v = ext.eval(C::new(x, y))[(0, 0)];
            assert!(v.norm() > 0.3, "F vanishes at ({x},{y})");
        }
    }
}
