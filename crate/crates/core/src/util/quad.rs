//! 1-D quadrature helpers on uniform grids.

use num_complex::Complex64;

/// Composite Simpson weights for `n` samples on a uniform grid of spacing `h`.
///
/// For even sample counts the final interval falls back to the trapezoid
/// rule, keeping the scheme defined for every `n >= 2`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2);
    let mut w = vec![0.0; n];
    if n == 2 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let odd_panels = (n - 1) % 2 == 1;
    let last_simpson = if odd_panels { n - 2 } else { n - 1 };
    // Simpson over [0, last_simpson]
    w[0] += h / 3.0;
    w[last_simpson] += h / 3.0;
    let mut i = 1;
    while i < last_simpson {
        w[i] += 4.0 * h / 3.0;
        if i + 1 < last_simpson {
            w[i + 1] += 2.0 * h / 3.0;
        }
        i += 2;
    }
    if odd_panels {
        w[n - 2] += 0.5 * h;
        w[n - 1] += 0.5 * h;
    }
    w
}

/// Composite Simpson integral of complex samples on a uniform grid.
pub fn simpson(samples: &[Complex64], h: f64) -> Complex64 {
    simpson_weights(samples.len(), h)
        .iter()
        .zip(samples)
        .map(|(w, s)| s * *w)
        .sum()
}

/// Trapezoid integral of complex samples on a uniform grid.
pub fn trapezoid(samples: &[Complex64], h: f64) -> Complex64 {
    if samples.len() < 2 {
        return Complex64::new(0.0, 0.0);
    }
    let inner: Complex64 = samples[1..samples.len() - 1].iter().sum();
    (inner + (samples[0] + samples[samples.len() - 1]) * 0.5) * h
}

/// Least-squares slope of `ln(y)` against `ln(x)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
