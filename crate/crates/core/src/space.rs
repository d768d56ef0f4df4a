//! Model geometries: Euclidean space and the round 2-sphere.
//!
//! Both carry their exact heat kernel for the generator `Δ` (not `Δ/2`), so a
//! Euclidean Brownian increment over time `t` has per-coordinate variance `2t`.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::numerics::{gauss_legendre, integrate, legendre_all};
use crate::rng::{par_fold, Substreams};
use crate::stats::Accumulator;

/// Below this (radius-scaled) time the spectral series is not trusted.
pub const SPHERE_MIN_TIME: f64 = 1e-3;
/// Largest substep of the geodesic random walk.
pub const SPHERE_SUBSTEP: f64 = 1e-3;
const SERIES_TAIL_TOL: f64 = 1e-13;
const POINT_TOL: f64 = 1e-12;

/// A point given by its embedding coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Self(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    Euclidean { dim: usize },
    Sphere2 { radius: f64 },
}

/// A model state space with metric, reference measure, heat kernel and
/// Brownian transition sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    #[serde(flatten)]
    pub kind: SpaceKind,
    /// Fixed sphere series length; `None` selects it from `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat_kernel_truncation: Option<usize>,
}

/// Monte Carlo estimate of a distance moment of the transition law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: u32,
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl StateSpace {
    pub fn euclidean(dim: usize) -> Self {
        assert!(dim >= 1, "euclidean dimension must be positive");
        Self {
            kind: SpaceKind::Euclidean { dim },
            heat_kernel_truncation: None,
        }
    }

    pub fn sphere2(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::OutOfRange(format!("sphere radius {radius}")));
        }
        Ok(Self {
            kind: SpaceKind::Sphere2 { radius },
            heat_kernel_truncation: None,
        })
    }

    pub fn unit_sphere() -> Self {
        Self::sphere2(1.0).expect("unit radius is valid")
    }

    pub fn with_truncation(mut self, terms: usize) -> Self {
        self.heat_kernel_truncation = Some(terms);
        self
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, SpaceKind::Euclidean { .. })
    }

    /// Intrinsic dimension.
    pub fn dimension(&self) -> usize {
        match self.kind {
            SpaceKind::Euclidean { dim } => dim,
            SpaceKind::Sphere2 { .. } => 2,
        }
    }

    /// Length of the coordinate vector of a point.
    pub fn ambient_dimension(&self) -> usize {
        match self.kind {
            SpaceKind::Euclidean { dim } => dim,
            SpaceKind::Sphere2 { .. } => 3,
        }
    }

    /// Lower Ricci bound `K`.
    pub fn ricci_lower_bound(&self) -> f64 {
        match self.kind {
            SpaceKind::Euclidean { .. } => 0.0,
            SpaceKind::Sphere2 { radius } => 1.0 / (radius * radius),
        }
    }

    /// North pole of the sphere or origin of Euclidean space.
    pub fn base_point(&self) -> Point {
        match self.kind {
            SpaceKind::Euclidean { dim } => Point::origin(dim),
            SpaceKind::Sphere2 { radius } => Point::new(vec![0.0, 0.0, radius]),
        }
    }

    pub fn validate(&self, x: &Point) -> Result<()> {
        let n = self.ambient_dimension();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        if let SpaceKind::Sphere2 { radius } = self.kind {
            let gap = (x.norm() - radius).abs();
            if gap > POINT_TOL * radius.max(1.0) {
                return Err(Error::InvalidPoint(format!(
                    "|x| = {} differs from radius {radius}",
                    x.norm()
                )));
            }
        }
        Ok(())
    }

    /// Metric distance: Euclidean norm or great-circle distance.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.validate(x)?;
        self.validate(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub(crate) fn distance_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            SpaceKind::Euclidean { .. } => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            SpaceKind::Sphere2 { radius } => {
                let cross = [
                    x[1] * y[2] - x[2] * y[1],
                    x[2] * y[0] - x[0] * y[2],
                    x[0] * y[1] - x[1] * y[0],
                ];
                let c = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
                radius * c.atan2(dot(x, y))
            }
        }
    }

    /// Number of spherical harmonic degrees kept at time `t`.
    ///
    /// Smallest `L` with `(2L+3) exp(-(L+1)(L+2) t/r²) < 1e-13`.
    pub fn series_terms(&self, t: f64) -> Result<usize> {
        check_time(t)?;
        let SpaceKind::Sphere2 { radius } = self.kind else {
            return Err(Error::Unsupported("series truncation on Euclidean space".into()));
        };
        let tau = t / (radius * radius);
        if tau < SPHERE_MIN_TIME {
            return Err(Error::TooSmallTime {
                t,
                floor: SPHERE_MIN_TIME * radius * radius,
            });
        }
        if let Some(l) = self.heat_kernel_truncation {
            return Ok(l);
        }
        let mut l = 0usize;
        loop {
            let lf = l as f64;
            if (2.0 * lf + 3.0) * (-(lf + 1.0) * (lf + 2.0) * tau).exp() < SERIES_TAIL_TOL {
                return Ok(l);
            }
            l += 1;
        }
    }

    /// Heat kernel `p(t, x, y)` with respect to Lebesgue or surface measure.
    pub fn heat_kernel(&self, t: f64, x: &Point, y: &Point) -> Result<f64> {
        check_time(t)?;
        self.validate(x)?;
        self.validate(y)?;
        match self.kind {
            SpaceKind::Euclidean { dim } => {
                let r2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok(euclidean_kernel(dim, t, r2))
            }
            SpaceKind::Sphere2 { radius } => {
                let mu = (dot(x, y) / (radius * radius)).clamp(-1.0, 1.0);
                self.sphere_zonal_kernel(t, mu)
            }
        }
    }

    /// Sphere kernel as a function of `cos θ` between the two points.
    pub fn sphere_zonal_kernel(&self, t: f64, mu: f64) -> Result<f64> {
        let SpaceKind::Sphere2 { radius } = self.kind else {
            return Err(Error::Unsupported("zonal kernel on Euclidean space".into()));
        };
        let l_max = self.series_terms(t)?;
        let tau = t / (radius * radius);
        let p = legendre_all(l_max, mu);
        let s: f64 = (0..=l_max)
            .map(|l| {
                let lf = l as f64;
                (2.0 * lf + 1.0) * (-lf * (lf + 1.0) * tau).exp() * p[l]
            })
            .sum();
        Ok((s / (4.0 * PI * radius * radius)).max(0.0))
    }

    /// Analytic CDF of `cos θ(x, X_t)` on the sphere, from the spectral series.
    pub fn sphere_polar_cdf(&self, t: f64, mu: f64) -> Result<f64> {
        let SpaceKind::Sphere2 { radius } = self.kind else {
            return Err(Error::Unsupported("polar CDF on Euclidean space".into()));
        };
        let l_max = self.series_terms(t)?;
        let tau = t / (radius * radius);
        let mu = mu.clamp(-1.0, 1.0);
        let p = legendre_all(l_max + 1, mu);
        let mut f = 0.5 * (mu + 1.0);
        for l in 1..=l_max {
            let lf = l as f64;
            f += 0.5 * (-lf * (lf + 1.0) * tau).exp() * (p[l + 1] - p[l - 1]);
        }
        Ok(f.clamp(0.0, 1.0))
    }

    /// Geodesic random walk substeps used for a transition of length `t`.
    pub fn sphere_substeps(t: f64) -> usize {
        ((t / SPHERE_SUBSTEP).ceil() as usize).max(1)
    }

    /// Draws `X_t` given `X_0 = x`. `t <= 0` returns `x` unchanged.
    pub fn sample_transition<R: Rng + ?Sized>(&self, t: f64, x: &Point, rng: &mut R) -> Point {
        let mut out = x.clone();
        self.step_in_place(t, &mut out, rng);
        out
    }

    pub(crate) fn step_in_place<R: Rng + ?Sized>(&self, t: f64, x: &mut [f64], rng: &mut R) {
        if t <= 0.0 {
            return;
        }
        match self.kind {
            SpaceKind::Euclidean { .. } => {
                let s = (2.0 * t).sqrt();
                for c in x.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *c += s * z;
                }
            }
            SpaceKind::Sphere2 { radius } => {
                let n = Self::sphere_substeps(t);
                let h = t / n as f64;
                let s = (2.0 * h).sqrt();
                for _ in 0..n {
                    let g: [f64; 3] = [
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    ];
                    geodesic_step(x, radius, &g, s);
                }
            }
        }
    }

    /// Monte Carlo estimate of `∫ d(x,y)^order p(t,x,y) m(dy)`.
    pub fn moment_check(
        &self,
        t: f64,
        x: &Point,
        order: u32,
        n_samples: usize,
        streams: Substreams,
    ) -> Result<MomentEstimate> {
        check_time(t)?;
        self.validate(x)?;
        if order != 2 && order != 4 {
            return Err(Error::OutOfRange(format!("moment order {order}")));
        }
        if n_samples < 10_000 {
            return Err(Error::InsufficientSamples {
                needed: 10_000,
                got: n_samples,
            });
        }
        let acc = par_fold(
            n_samples,
            Accumulator::default,
            |acc, i| {
                let mut rng = streams.stream(i as u64);
                let y = self.sample_transition(t, x, &mut rng);
                acc.push(self.distance_unchecked(x, &y).powi(order as i32));
            },
            Accumulator::merge,
        );
        Ok(MomentEstimate {
            order,
            t,
            mean: acc.mean(),
            stderr: acc.stderr(),
            n_samples,
        })
    }

    /// Exact `∫ d(x,y)^order p(t,x,y) m(dy)`: closed form on `ℝ^d`, zonal
    /// quadrature on the sphere.
    pub fn exact_distance_moment(&self, t: f64, order: u32) -> Result<f64> {
        check_time(t)?;
        if order != 2 && order != 4 {
            return Err(Error::OutOfRange(format!("moment order {order}")));
        }
        match self.kind {
            SpaceKind::Euclidean { dim } => Ok(gaussian_distance_moment(dim, t, order)),
            SpaceKind::Sphere2 { radius } => {
                self.series_terms(t)?;
                let f = |theta: f64| {
                    let k = self.sphere_zonal_kernel(t, theta.cos()).unwrap_or(0.0);
                    (radius * theta).powi(order as i32) * k * 2.0 * PI * radius * radius * theta.sin()
                };
                let peak = (8.0 * t).sqrt() / radius;
                let mut cuts = vec![0.0];
                for m in [1.0, 2.0, 4.0, 8.0] {
                    if m * peak < PI {
                        cuts.push(m * peak);
                    }
                }
                cuts.push(PI);
                Ok(cuts.windows(2).map(|w| integrate(f, w[0], w[1], 1e-14, 1e-12)).sum())
            }
        }
    }

    /// Total mass `∫ p(t,x,y) m(dy)` computed by quadrature.
    ///
    /// Euclidean: radial quadrature in `d` dimensions. Sphere: Gauss-Legendre
    /// in the polar coordinate times a periodic rule in longitude, around the
    /// fixed axis `e_3` (so `x` off the pole exercises the full kernel).
    pub fn total_mass(&self, t: f64, x: &Point) -> Result<f64> {
        check_time(t)?;
        self.validate(x)?;
        match self.kind {
            SpaceKind::Euclidean { dim } => {
                let d = dim as f64;
                let area = 2.0 * PI.powf(d / 2.0) / libm::tgamma(d / 2.0);
                let rmax = 40.0 * (2.0 * t).sqrt();
                Ok(integrate(
                    |r| area * r.powi(dim as i32 - 1) * euclidean_kernel(dim, t, r * r),
                    0.0,
                    rmax,
                    1e-15,
                    1e-13,
                ))
            }
            SpaceKind::Sphere2 { radius } => {
                let l = self.series_terms(t)?;
                let n_mu = l + 8;
                let n_phi = 2 * l + 8;
                let (nodes, weights) = gauss_legendre(n_mu);
                let mut total = 0.0;
                for (mu, w) in nodes.iter().zip(&weights) {
                    let st = (1.0 - mu * mu).sqrt();
                    for k in 0..n_phi {
                        let phi = 2.0 * PI * k as f64 / n_phi as f64;
                        let y = Point::new(vec![
                            radius * st * phi.cos(),
                            radius * st * phi.sin(),
                            radius * mu,
                        ]);
                        let p = self.heat_kernel(t, x, &y)?;
                        total += w * (2.0 * PI / n_phi as f64) * radius * radius * p;
                    }
                }
                Ok(total)
            }
        }
    }
}

pub(crate) fn euclidean_kernel(dim: usize, t: f64, r2: f64) -> f64 {
    (4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-r2 / (4.0 * t)).exp()
}

/// Moves `x` along the geodesic in the direction of the tangent projection of
/// `g`, scaled by `scale`, and renormalizes onto the sphere.
pub(crate) fn geodesic_step(x: &mut [f64], radius: f64, g: &[f64; 3], scale: f64) {
    let inv = 1.0 / radius;
    let u = [x[0] * inv, x[1] * inv, x[2] * inv];
    let gu = g[0] * u[0] + g[1] * u[1] + g[2] * u[2];
    let v = [
        scale * (g[0] - gu * u[0]),
        scale * (g[1] - gu * u[1]),
        scale * (g[2] - gu * u[2]),
    ];
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if len == 0.0 {
        return;
    }
    let ang = len * inv;
    let (s, c) = ang.sin_cos();
    let mut n2 = 0.0;
    for i in 0..3 {
        x[i] = c * x[i] + radius * s * v[i] / len;
        n2 += x[i] * x[i];
    }
    let fix = radius / n2.sqrt();
    for c in x.iter_mut() {
        *c *= fix;
    }
}

/// Closed-form `E|X_t - x|^order` for Euclidean Brownian motion in `dim` dimensions.
pub fn gaussian_distance_moment(dim: usize, t: f64, order: u32) -> f64 {
    let d = dim as f64;
    match order {
        2 => 2.0 * d * t,
        4 => 4.0 * d * (d + 2.0) * t * t,
        _ => f64::NAN,
    }
}

/// Residual of Chapman-Kolmogorov on `euclidean(1)` by quadrature over `z`.
pub fn chapman_kolmogorov_residual_1d(t: f64, s: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    check_time(s)?;
    let width = 40.0 * (2.0 * (t + s)).sqrt();
    let c = 0.5 * (x + y);
    let lhs = integrate(
        |z| {
            euclidean_kernel(1, t, (x - z) * (x - z)) * euclidean_kernel(1, s, (z - y) * (z - y))
        },
        c - width,
        c + width,
        1e-16,
        1e-13,
    );
    Ok((lhs - euclidean_kernel(1, t + s, (x - y) * (x - y))).abs())
}
