//! Line integrals of functions and 1-forms along non-trapped geodesics.

use crate::geometry::GeodesicPath;
use crate::util::quad::simpson_weights;
use crate::{Error, Result};
use num_complex::Complex64;

type C = Complex64;

/// Composite-Simpson integral of `integrand(point, tangent)` along the
/// path. Nodes are uniform except the bisected exit node, which is handled
/// by a trapezoid tail.
pub fn line_integral<F>(path: &GeodesicPath, mut integrand: F) -> C
where
    F: FnMut(f64, [f64; 2], [f64; 2]) -> C,
{
    let n = path.len();
    if n < 2 {
        return C::new(0.0, 0.0);
    }
    let vals: Vec<C> = (0..n)
        .map(|i| integrand(path.times[i], path.points[i], path.tangents[i]))
        .collect();
    // uniform prefix
    let h = path.step;
    let uniform_end = n - 1;
    let last_dt = path.times[n - 1] - path.times[n - 2];
    if (last_dt - h).abs() < 1e-12 * h.max(1.0) {
        let w = simpson_weights(n, h);
        return vals.iter().zip(w).map(|(v, wi)| v * wi).sum();
    }
    let w = simpson_weights(uniform_end, h);
    let main: C = vals[..uniform_end]
        .iter()
        .zip(w)
        .map(|(v, wi)| v * wi)
        .sum();
    main + (vals[n - 2] + vals[n - 1]) * (0.5 * last_dt)
}

/// Geodesic X-ray transform `I(f, alpha)` along a non-trapped geodesic:
/// integral of `f(gamma) + alpha(gamma, gamma-dot)`.
///
/// `alpha` supplies covariant chart components `[alpha_u, alpha_v]`.
pub fn xray_scalar<F, A>(f: F, alpha: A, path: &GeodesicPath) -> Result<C>
where
    F: Fn(f64, f64) -> C,
    A: Fn(f64, f64) -> [C; 2],
{
    attenuated_ray(f, alpha, 0.0, path)
}

/// Attenuated transform with weight `exp(-lambda t)`.
pub fn attenuated_ray<F, A>(f: F, alpha: A, lambda: f64, path: &GeodesicPath) -> Result<C>
where
    F: Fn(f64, f64) -> C,
    A: Fn(f64, f64) -> [C; 2],
{
    if path.trapped {
        return Err(Error::Trapped(
            "attenuated ray needs a finite exit time".into(),
        ));
    }
    let val = line_integral(path, |t, p, v| {
        let a = alpha(p[0], p[1]);
        (f(p[0], p[1]) + a[0] * v[0] + a[1] * v[1]) * (-lambda * t).exp()
    });
    Ok(val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodesic_trace, Surface};

    fn zero_form(_: f64, _: f64) -> [C; 2] {
        [C::new(0.0, 0.0), C::new(0.0, 0.0)]
    }

    #[test]
    fn chord_lengths() {
        let m = Surface::euclidean_disk();
        for &s in &[0.0, 0.35, -0.7] {
            let x = [-(1.0f64 - s * s).sqrt(), s];
            let path = geodesic_trace(&m, x, [1.0, 0.0], 1e-3).unwrap();
            let got = xray_scalar(|_, _| C::new(1.0, 0.0), zero_form, &path).unwrap();
            let want = 2.0 * (1.0 - s * s).sqrt();
            assert!((got.re - want).abs() < 1e-8, "s={s}: {} vs {want}", got.re);
        }
    }

    #[test]
    fn exact_differential_in_kernel() {
        // alpha = dp with p vanishing at the boundary integrates to zero
        let m = Surface::euclidean_disk();
        let p = |u: f64, v: f64| (1.0 - u * u - v * v) * (0.5 + u * v);
        let dp = |u: f64, v: f64| {
            [
                C::new(-2.0 * u * (0.5 + u * v) + (1.0 - u * u - v * v) * v, 0.0),
                C::new(-2.0 * v * (0.5 + u * v) + (1.0 - u * u - v * v) * u, 0.0),
            ]
        };
        let _ = p;
        for &(x, dir) in &[
            ([-1.0, 0.0], [1.0, 0.0]),
            ([-0.6, -0.8], [0.3, 1.0]),
            ([0.0, 1.0], [0.2, -1.0]),
        ] {
            let path = geodesic_trace(&m, x, dir, 5e-4).unwrap();
            let got = xray_scalar(|_, _| C::new(0.0, 0.0), dp, &path).unwrap();
            assert!(got.norm() < 1e-8, "got {got}");
        }
    }

    #[test]
    fn attenuated_unit_geodesic() {
        // f = 1 on a unit-length segment with lambda = 1: 1 - e^{-1}
        let m = Surface::euclidean_disk();
        let path = geodesic_trace(&m, [-0.5, 0.0], [1.0, 0.0], 1e-4).unwrap();
        // chord length 2*sqrt(1-0) from -0.5: exits at +1 => length 1.5.
        // use a sub-path of exactly length 1 by overriding: simplest is a
        // diameter with lambda scaled; instead integrate on a catenoid-free
        // segment: take the full chord and compare against closed form.
        let l = path.exit_time.unwrap();
        let got = attenuated_ray(|_, _| C::new(1.0, 0.0), |_, _| [C::new(0.0, 0.0); 2], 1.0, &path)
            .unwrap();
        let want = 1.0 - (-l).exp();
        assert!((got.re - want).abs() < 1e-8, "{} vs {want}", got.re);
    }

    #[test]
    fn lambda_zero_matches_plain() {
        let m = Surface::catenoid_band(0.8);
        let path = geodesic_trace(&m, [-0.8, 0.4], [1.0, 0.5], 1e-3).unwrap();
        let f = |u: f64, v: f64| C::new(u * v, 0.3 * u);
        let a = attenuated_ray(f, |_, _| [C::new(0.0, 0.0); 2], 0.0, &path).unwrap();
        let b = xray_scalar(f, |_, _| [C::new(0.0, 0.0); 2], &path).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn large_lambda_decay_bound() {
        let m = Surface::euclidean_disk();
        let path = geodesic_trace(&m, [-1.0, 0.0], [1.0, 0.0], 1e-3).unwrap();
        let f = |u: f64, v: f64| C::new((u + v).cos(), 0.0);
        for &lambda in &[10.0, 40.0] {
            let got = attenuated_ray(f, |_, _| [C::new(0.0, 0.0); 2], lambda, &path).unwrap();
            assert!(got.norm() <= 1.0 / lambda + 1e-9, "lambda={lambda}: {got}");
        }
    }

    #[test]
    fn linearity() {
        let m = Surface::euclidean_disk();
        let path = geodesic_trace(&m, [-0.9, 0.3], [1.0, 0.2], 1e-3).unwrap();
        let f1 = |u: f64, v: f64| C::new(u, v);
        let f2 = |u: f64, _: f64| C::new(0.3, u);
        let a1 = |u: f64, v: f64| [C::new(v, 0.0), C::new(-u, 0.1)];
        let (ca, cb) = (C::new(1.3, -0.4), C::new(0.2, 2.0));
        let lhs = xray_scalar(
            |u, v| ca * f1(u, v) + cb * f2(u, v),
            |u, v| {
                let a = a1(u, v);
                [ca * a[0], ca * a[1]]
            },
            &path,
        )
        .unwrap();
        let r1 = xray_scalar(f1, a1, &path).unwrap();
        let r2 = xray_scalar(f2, |_, _| [C::new(0.0, 0.0); 2], &path).unwrap();
        assert!((lhs - (ca * r1 + cb * r2)).norm() < 1e-10);
    }

    #[test]
    fn trapped_rejected() {
        let m = Surface::catenoid_band(1.0);
        let path = geodesic_trace(&m, [0.0, 0.0], [0.0, 1.0], 1e-2).unwrap();
        assert!(matches!(
            xray_scalar(|_, _| C::new(1.0, 0.0), |_, _| [C::new(0.0, 0.0); 2], &path),
            Err(Error::Trapped(_))
        ));
    }
}
