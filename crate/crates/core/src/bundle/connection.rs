//! Connection, potential and gauge fields as closed-form callables.
//!
//! Components are indexed `[A_1, A_u, A_v]` for cylinder coordinates
//! `(x1, u, v)`, with `(u, v)` the chart coordinates of the transversal
//! surface. Skew-Hermitian is enforced at construction (validated on a
//! sample grid) and preserved exactly by the provided combinators.

use crate::expr::Expr;
use crate::util::cmat::{self, CMat};
use crate::{Error, Result};
use num_complex::Complex64;
use std::sync::Arc;

type C = Complex64;
type CompFn = Arc<dyn Fn(f64, f64, f64) -> [CMat; 3] + Send + Sync>;
type MatFn = Arc<dyn Fn(f64, f64, f64) -> CMat + Send + Sync>;

/// Skew-Hermitian `m x m` matrix-valued connection 1-form on the cylinder.
#[derive(Clone)]
pub struct ConnectionField {
    pub rank: usize,
    comps: CompFn,
    /// x1-interval outside which all components vanish; `None` means the
    /// field does not depend on x1 at all (and has no dx1 component decay).
    pub support_x1: Option<(f64, f64)>,
    /// Period of the `v` coordinate, when living over a periodic chart.
    pub period_v: Option<f64>,
    /// Finite-difference step for derivatives of the components.
    pub h_fd: f64,
}

impl std::fmt::Debug for ConnectionField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConnectionField")
            .field("rank", &self.rank)
            .field("support_x1", &self.support_x1)
            .finish()
    }
}

impl ConnectionField {
    pub fn new(rank: usize, comps: CompFn) -> Self {
        ConnectionField {
            rank,
            comps,
            support_x1: None,
            period_v: None,
            h_fd: 1e-4,
        }
    }

    pub fn with_support_x1(mut self, lo: f64, hi: f64) -> Self {
        self.support_x1 = Some((lo, hi));
        self
    }

    pub fn with_period_v(mut self, period: f64) -> Self {
        self.period_v = Some(period);
        self
    }

    /// Components `[A_1, A_u, A_v]` at a cylinder point.
    pub fn at(&self, x1: f64, u: f64, v: f64) -> [CMat; 3] {
        let v = match self.period_v {
            Some(p) => v.rem_euclid(p),
            None => v,
        };
        (self.comps)(x1, u, v)
    }

    /// The zero connection of the given rank.
    pub fn zero(rank: usize) -> Self {
        ConnectionField::new(
            rank,
            Arc::new(move |_, _, _| {
                [
                    CMat::zeros(rank, rank),
                    CMat::zeros(rank, rank),
                    CMat::zeros(rank, rank),
                ]
            }),
        )
    }

    /// Line-bundle flux preset `A = i (b/2) (u dv - v du)`; curvature `i b du^dv`.
    pub fn flux(b: f64) -> Self {
        ConnectionField::new(
            1,
            Arc::new(move |_, u, v| {
                [
                    CMat::zeros(1, 1),
                    CMat::from_element(1, 1, C::new(0.0, -b / 2.0 * v)),
                    CMat::from_element(1, 1, C::new(0.0, b / 2.0 * u)),
                ]
            }),
        )
    }

    /// Exact differential `A = i dp` for a real scalar `p` with analytic
    /// gradient `[d1 p, du p, dv p]` (line bundle; in the X-ray kernel).
    pub fn scalar_idp(
        grad: Arc<dyn Fn(f64, f64, f64) -> [f64; 3] + Send + Sync>,
    ) -> Self {
        ConnectionField::new(
            1,
            Arc::new(move |x1, u, v| {
                let g = grad(x1, u, v);
                [
                    CMat::from_element(1, 1, C::new(0.0, g[0])),
                    CMat::from_element(1, 1, C::new(0.0, g[1])),
                    CMat::from_element(1, 1, C::new(0.0, g[2])),
                ]
            }),
        )
    }

    /// Componentwise difference `self - other` (the gauge-comparison field).
    pub fn sub(&self, other: &ConnectionField) -> ConnectionField {
        assert_eq!(self.rank, other.rank);
        let a = self.clone();
        let b = other.clone();
        let mut out = ConnectionField::new(
            self.rank,
            Arc::new(move |x1, u, v| {
                let x = a.at(x1, u, v);
                let y = b.at(x1, u, v);
                [&x[0] - &y[0], &x[1] - &y[1], &x[2] - &y[2]]
            }),
        );
        out.support_x1 = match (self.support_x1, other.support_x1) {
            (Some((a0, a1)), Some((b0, b1))) => Some((a0.min(b0), a1.max(b1))),
            _ => None,
        };
        out.period_v = self.period_v.or(other.period_v);
        out
    }

    pub fn add(&self, other: &ConnectionField) -> ConnectionField {
        assert_eq!(self.rank, other.rank);
        let a = self.clone();
        let b = other.clone();
        let mut out = ConnectionField::new(
            self.rank,
            Arc::new(move |x1, u, v| {
                let x = a.at(x1, u, v);
                let y = b.at(x1, u, v);
                [&x[0] + &y[0], &x[1] + &y[1], &x[2] + &y[2]]
            }),
        );
        out.support_x1 = match (self.support_x1, other.support_x1) {
            (Some((a0, a1)), Some((b0, b1))) => Some((a0.min(b0), a1.max(b1))),
            _ => None,
        };
        out.period_v = self.period_v.or(other.period_v);
        out
    }

    /// Matrix-valued components from an expression grid; entries are
    /// skew-Hermitized exactly: `A <- (A - A*)/2`.
    pub fn from_exprs(rank: usize, entries: [Vec<Vec<Expr>>; 3]) -> Result<Self> {
        for comp in &entries {
            if comp.len() != rank || comp.iter().any(|row| row.len() != rank) {
                return Err(Error::Config(format!(
                    "connection component matrix must be {rank} x {rank}"
                )));
            }
        }
        let make = move |x1: f64, u: f64, v: f64, comp: &Vec<Vec<Expr>>| -> CMat {
            let raw = CMat::from_fn(rank, rank, |i, j| comp[i][j].eval(x1, u, v));
            (&raw - raw.adjoint()) * C::new(0.5, 0.0)
        };
        Ok(ConnectionField::new(
            rank,
            Arc::new(move |x1, u, v| {
                [
                    make(x1, u, v, &entries[0]),
                    make(x1, u, v, &entries[1]),
                    make(x1, u, v, &entries[2]),
                ]
            }),
        ))
    }

    /// Random smooth compactly supported connection: a few Gaussian bumps
    /// with constant skew-Hermitian coefficient matrices.
    pub fn random_smooth(rank: usize, seed: u64, amplitude: f64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n_bumps = 3;
        let mut bumps = Vec::new();
        for _ in 0..n_bumps {
            let center = [
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
            ];
            let width: f64 = rng.gen_range(0.25..0.5);
            let coeff: [CMat; 3] = std::array::from_fn(|_| {
                let raw = CMat::from_fn(rank, rank, |_, _| {
                    C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                (&raw - raw.adjoint()) * C::new(0.5 * amplitude, 0.0)
            });
            bumps.push((center, width, coeff));
        }
        ConnectionField::new(
            rank,
            Arc::new(move |x1, u, v| {
                let mut out = [
                    CMat::zeros(rank, rank),
                    CMat::zeros(rank, rank),
                    CMat::zeros(rank, rank),
                ];
                for (c, w, coeff) in &bumps {
                    let d2 = (x1 - c[0]).powi(2) + (u - c[1]).powi(2) + (v - c[2]).powi(2);
                    let b = (-d2 / (w * w)).exp();
                    for k in 0..3 {
                        out[k] += &coeff[k] * C::new(b, 0.0);
                    }
                }
                out
            }),
        )
        .with_support_x1(-2.0, 2.0)
    }

    /// Max skew-Hermitian defect over a sample grid (should be ~0).
    pub fn skew_defect_sampled(&self, n: usize, extent: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let f = |idx: usize| (idx as f64 / (n - 1).max(1) as f64 - 0.5) * 2.0 * extent;
                    let a = self.at(f(i), f(j), f(k));
                    for comp in &a {
                        worst = worst.max(cmat::skew_hermitian_defect(comp));
                    }
                }
            }
        }
        worst
    }
}

/// Matrix potential `Q` (a section of the endomorphism bundle).
#[derive(Clone)]
pub struct PotentialField {
    pub rank: usize,
    f: MatFn,
}

impl PotentialField {
    pub fn new(rank: usize, f: MatFn) -> Self {
        PotentialField { rank, f }
    }

    pub fn zero(rank: usize) -> Self {
        PotentialField::new(rank, Arc::new(move |_, _, _| CMat::zeros(rank, rank)))
    }

    pub fn at(&self, x1: f64, u: f64, v: f64) -> CMat {
        (self.f)(x1, u, v)
    }

    /// Hermitian conjugate potential `Q*`.
    pub fn adjoint(&self) -> PotentialField {
        let f = self.f.clone();
        PotentialField::new(self.rank, Arc::new(move |x1, u, v| f(x1, u, v).adjoint()))
    }
}

/// Unitary bundle automorphism (gauge transformation).
#[derive(Clone)]
pub struct GaugeField {
    pub rank: usize,
    f: MatFn,
    /// Analytic derivatives `[d1 psi, du psi, dv psi]` when available.
    df: Option<CompFn>,
    pub h_fd: f64,
}

impl std::fmt::Debug for GaugeField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaugeField").field("rank", &self.rank).finish()
    }
}

impl GaugeField {
    pub fn new(rank: usize, f: MatFn) -> Self {
        GaugeField {
            rank,
            f,
            df: None,
            h_fd: 1e-4,
        }
    }

    pub fn with_derivative(mut self, df: CompFn) -> Self {
        self.df = Some(df);
        self
    }

    pub fn identity(rank: usize) -> Self {
        GaugeField::new(rank, Arc::new(move |_, _, _| CMat::identity(rank, rank)))
    }

    /// Line-bundle gauge `psi = exp(i p)` for real `p` with analytic gradient.
    pub fn scalar_phase(
        p: Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
        grad: Arc<dyn Fn(f64, f64, f64) -> [f64; 3] + Send + Sync>,
    ) -> Self {
        let p2 = p.clone();
        GaugeField::new(
            1,
            Arc::new(move |x1, u, v| {
                CMat::from_element(1, 1, (C::new(0.0, 1.0) * p(x1, u, v)).exp())
            }),
        )
        .with_derivative(Arc::new(move |x1, u, v| {
            let val = (C::new(0.0, 1.0) * p2(x1, u, v)).exp();
            let g = grad(x1, u, v);
            [
                CMat::from_element(1, 1, C::new(0.0, g[0]) * val),
                CMat::from_element(1, 1, C::new(0.0, g[1]) * val),
                CMat::from_element(1, 1, C::new(0.0, g[2]) * val),
            ]
        }))
    }

    /// `psi = exp(S)` for a skew-Hermitian field `S`; unitary by construction.
    pub fn exp_skew(rank: usize, s: MatFn) -> Self {
        GaugeField::new(rank, Arc::new(move |x1, u, v| cmat::expm(&s(x1, u, v))))
    }

    /// Random gauge equal to the identity outside a ball of radius
    /// `support`, built as `exp` of bump-shaped skew-Hermitian fields.
    pub fn random_interior(rank: usize, seed: u64, support: f64, amplitude: f64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let raw = CMat::from_fn(rank, rank, |_, _| {
            C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let coeff = (&raw - raw.adjoint()) * C::new(0.5 * amplitude, 0.0);
        let c = [
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
        ];
        Self::exp_skew(
            rank,
            Arc::new(move |x1, u, v| {
                let d2 = (x1 - c[0]).powi(2) + (u - c[1]).powi(2) + (v - c[2]).powi(2);
                let s = support * support;
                // smooth bump vanishing (with all derivatives) at radius `support`
                let b = if d2 < s {
                    (-d2 / (s - d2)).exp()
                } else {
                    0.0
                };
                &coeff * C::new(b, 0.0)
            }),
        )
    }

    pub fn at(&self, x1: f64, u: f64, v: f64) -> CMat {
        (self.f)(x1, u, v)
    }

    /// Componentwise derivatives, analytic when supplied, else centered FD.
    pub fn deriv(&self, x1: f64, u: f64, v: f64) -> [CMat; 3] {
        if let Some(df) = &self.df {
            return df(x1, u, v);
        }
        let h = self.h_fd;
        let d = |fp: CMat, fm: CMat| (fp - fm) / C::new(2.0 * h, 0.0);
        [
            d(self.at(x1 + h, u, v), self.at(x1 - h, u, v)),
            d(self.at(x1, u + h, v), self.at(x1, u - h, v)),
            d(self.at(x1, u, v + h), self.at(x1, u, v - h)),
        ]
    }

    /// Pointwise inverse gauge `psi^-1 = psi*`.
    pub fn inverse(&self) -> GaugeField {
        let f = self.f.clone();
        let df = self.df.clone();
        let mut out = GaugeField::new(self.rank, Arc::new(move |x1, u, v| f(x1, u, v).adjoint()));
        if let Some(df) = df {
            out = out.with_derivative(Arc::new(move |x1, u, v| {
                let d = df(x1, u, v);
                [d[0].adjoint(), d[1].adjoint(), d[2].adjoint()]
            }));
        }
        out
    }

    /// Max unitarity defect over a sample grid.
    pub fn unitary_defect_sampled(&self, n: usize, extent: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let f = |idx: usize| (idx as f64 / (n - 1).max(1) as f64 - 0.5) * 2.0 * extent;
                    worst = worst.max(cmat::unitary_defect(&self.at(f(i), f(j), f(k))));
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_is_skew() {
        let a = ConnectionField::flux(0.7);
        assert!(a.skew_defect_sampled(4, 1.0) < 1e-15);
    }

    #[test]
    fn random_smooth_is_skew() {
        for rank in 1..=3 {
            let a = ConnectionField::random_smooth(rank, rank as u64, 0.8);
            assert!(a.skew_defect_sampled(3, 1.0) < 1e-14);
        }
    }

    #[test]
    fn random_gauge_is_unitary_and_identity_outside() {
        let g = GaugeField::random_interior(2, 5, 0.6, 1.0);
        assert!(g.unitary_defect_sampled(4, 1.0) < 1e-12);
        let far = g.at(2.0, 0.0, 0.0);
        assert!(cmat::norm(&(far - CMat::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn expr_connection_rejects_bad_shape() {
        let e = || Expr::parse("0").unwrap();
        let bad = ConnectionField::from_exprs(2, [vec![vec![e()]], vec![vec![e()]], vec![vec![e()]]]);
        assert!(bad.is_err());
    }

    #[test]
    fn scalar_phase_derivative_matches_fd() {
        let p = Arc::new(|x1: f64, u: f64, v: f64| x1 * u + 0.3 * v * v);
        let grad = Arc::new(|_x1: f64, u: f64, v: f64| [u, 0.0, 0.6 * v]);
        let psi = GaugeField::scalar_phase(p, {
            let g = grad.clone();
            Arc::new(move |x1, u, v| {
                let gg = g(x1, u, v);
                [gg[0], x1, gg[2]]
            })
        });
        let (x1, u, v) = (0.4, -0.2, 0.7);
        let analytic = psi.deriv(x1, u, v);
        let mut fd_version = psi.clone();
        fd_version.df = None;
        let fd = fd_version.deriv(x1, u, v);
        for k in 0..3 {
            assert!(cmat::norm(&(&analytic[k] - &fd[k])) < 1e-7, "component {k}");
        }
    }
}
