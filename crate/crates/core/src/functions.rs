//! Bounded test functions and their exact heat semigroup images.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::numerics::{integrate, integrate_pieces, legendre_all};
use crate::space::{euclidean_kernel, SpaceKind, StateSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// `sign(x_axis)`.
    Sign { axis: usize },
    /// `1{⟨n, x⟩ > offset}` with `n` normalized internally.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// Indicator of the open metric ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// `tanh(⟨n, x⟩ / scale)`, Lipschitz with constant `1/scale`.
    Tanh { normal: Vec<f64>, scale: f64 },
    /// `exp(-rate |x - center|)`.
    ExpRadial { center: Vec<f64>, rate: f64 },
    /// `exp(-|x - center|² / (2 width²))`.
    Gaussian { center: Vec<f64>, width: f64 },
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Sign { axis } => {
                let v = x[*axis];
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            TestFunction::HalfSpace { normal, offset } => {
                f64::from(dot(&unit(normal), x) > *offset)
            }
            TestFunction::Ball { center, radius } => f64::from(dist(x, center) < *radius),
            TestFunction::Tanh { normal, scale } => (dot(&unit(normal), x) / scale).tanh(),
            TestFunction::ExpRadial { center, rate } => (-rate * dist(x, center)).exp(),
            TestFunction::Gaussian { center, width } => {
                let r = dist(x, center);
                (-r * r / (2.0 * width * width)).exp()
            }
        }
    }

    /// Evaluation on the sphere, where `Ball` uses geodesic distance.
    pub fn eval_on(&self, space: &StateSpace, x: &[f64]) -> f64 {
        match (self, space.kind) {
            (TestFunction::Ball { center, radius }, SpaceKind::Sphere2 { .. }) => {
                f64::from(space.distance_unchecked(x, center) < *radius)
            }
            _ => self.eval(x),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            TestFunction::Constant { value } => value.abs(),
            _ => 1.0,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            TestFunction::Constant { value } => *value >= 0.0,
            TestFunction::Sign { .. } | TestFunction::Tanh { .. } => false,
            _ => true,
        }
    }

    /// `e^{tΔ} f (x)` computed by quadrature against the exact heat kernel.
    ///
    /// Euclidean: one-dimensional reductions for functions of a single
    /// direction, radial reductions for balls and radial profiles (d = 1 or 3),
    /// products for Gaussians. Sphere: Funk-Hecke expansion for cap indicators.
    pub fn heat_semigroup(&self, space: &StateSpace, t: f64, x: &[f64]) -> Result<f64> {
        check_time(t)?;
        if x.len() != space.ambient_dimension() {
            return Err(Error::DimensionMismatch {
                expected: space.ambient_dimension(),
                got: x.len(),
            });
        }
        match space.kind {
            SpaceKind::Euclidean { dim } => self.euclidean_semigroup(dim, t, x),
            SpaceKind::Sphere2 { radius } => self.sphere_semigroup(space, radius, t, x),
        }
    }

    fn euclidean_semigroup(&self, dim: usize, t: f64, x: &[f64]) -> Result<f64> {
        let w = 40.0 * (2.0 * t).sqrt();
        // f(s + u) integrated against the 1D kernel in u, discontinuity at u = -s
        let directional = |s: f64, g: &dyn Fn(f64) -> f64| {
            integrate_pieces(
                |u: f64| g(s + u) * euclidean_kernel(1, t, u * u),
                -w,
                w,
                &[-s],
                1e-15,
                1e-13,
            )
        };
        Ok(match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Sign { axis } => directional(x[*axis], &|v| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }),
            TestFunction::HalfSpace { normal, offset } => {
                let s = dot(&unit(normal), x) - offset;
                directional(s, &|v| f64::from(v > 0.0))
            }
            TestFunction::Tanh { normal, scale } => {
                let s = dot(&unit(normal), x);
                directional(s, &|v| (v / scale).tanh())
            }
            TestFunction::Gaussian { center, width } => {
                let mut prod = 1.0;
                for (xi, ci) in x.iter().zip(center) {
                    let s = xi - ci;
                    prod *= directional(s, &|v| (-v * v / (2.0 * width * width)).exp());
                }
                prod
            }
            TestFunction::Ball { center, radius } => {
                let a = dist(x, center);
                match dim {
                    1 => {
                        let s = x[0] - center[0];
                        directional(s, &|v| f64::from(v.abs() < *radius))
                    }
                    3 => radial3(t, a, |rho| f64::from(rho < *radius), Some(*radius)),
                    _ => return Err(Error::Unsupported(format!("ball semigroup in dimension {dim}"))),
                }
            }
            TestFunction::ExpRadial { center, rate } => {
                let a = dist(x, center);
                match dim {
                    1 => {
                        let s = x[0] - center[0];
                        directional(s, &|v| (-rate * v.abs()).exp())
                    }
                    3 => radial3(t, a, |rho| (-rate * rho).exp(), None),
                    _ => {
                        return Err(Error::Unsupported(format!(
                            "radial semigroup in dimension {dim}"
                        )))
                    }
                }
            }
        })
    }

    fn sphere_semigroup(&self, space: &StateSpace, radius: f64, t: f64, x: &[f64]) -> Result<f64> {
        let cap = |axis: &[f64], h: f64| -> Result<f64> {
            let mu = (dot(&unit(axis), x) / radius).clamp(-1.0, 1.0);
            zonal_cap_semigroup(space, t, h, mu)
        };
        match self {
            TestFunction::Constant { value } => Ok(*value),
            TestFunction::HalfSpace { normal, offset } => cap(normal, offset / radius),
            TestFunction::Ball { center, radius: rb } => cap(center, (rb / radius).min(PI).cos()),
            TestFunction::Sign { axis } => {
                let mut e = vec![0.0; 3];
                e[*axis] = 1.0;
                Ok(2.0 * cap(&e, 0.0)? - 1.0)
            }
            _ => Err(Error::Unsupported(
                "sphere semigroup is available for cap indicators and constants".into(),
            )),
        }
    }
}

/// `e^{tΔ} 1{μ > h}` on the sphere at a point with `μ = cos θ` from the cap axis.
pub fn zonal_cap_semigroup(space: &StateSpace, t: f64, h: f64, mu: f64) -> Result<f64> {
    let SpaceKind::Sphere2 { radius } = space.kind else {
        return Err(Error::Unsupported("zonal expansion on Euclidean space".into()));
    };
    let l_max = space.series_terms(t)?;
    let tau = t / (radius * radius);
    let h = h.clamp(-1.0, 1.0);
    let ph = legendre_all(l_max + 1, h);
    let pm = legendre_all(l_max, mu);
    let mut v = 0.5 * (1.0 - h);
    for l in 1..=l_max {
        let lf = l as f64;
        let a = 0.5 * (ph[l - 1] - ph[l + 1]);
        v += (-lf * (lf + 1.0) * tau).exp() * a * pm[l];
    }
    Ok(v)
}

/// Semigroup of a radial profile `g(|y - c|)` in three dimensions at distance `a` from `c`.
fn radial3<G: Fn(f64) -> f64>(t: f64, a: f64, g: G, jump: Option<f64>) -> f64 {
    let w = 40.0 * (2.0 * t).sqrt();
    let hi = a + w;
    let breaks: Vec<f64> = jump.into_iter().collect();
    if a < 1e-12 {
        let c = 4.0 * PI * (4.0 * PI * t).powf(-1.5);
        return integrate_pieces(
            |rho: f64| g(rho) * c * rho * rho * (-rho * rho / (4.0 * t)).exp(),
            0.0,
            hi,
            &breaks,
            1e-15,
            1e-13,
        );
    }
    let c = 1.0 / (a * (4.0 * PI * t).sqrt());
    let lo = (a - w).max(0.0);
    integrate_pieces(
        |rho: f64| {
            let k = (-(rho - a) * (rho - a) / (4.0 * t)).exp() - (-(rho + a) * (rho + a) / (4.0 * t)).exp();
            g(rho) * c * rho * k
        },
        lo,
        hi,
        &breaks,
        1e-15,
        1e-13,
    )
}

/// `e^{tΔ} f` by brute-force quadrature over the whole sphere (test oracle helper).
pub fn sphere_semigroup_by_quadrature(
    space: &StateSpace,
    f: &TestFunction,
    t: f64,
    x: &[f64],
    n_theta: usize,
) -> Result<f64> {
    let SpaceKind::Sphere2 { radius } = space.kind else {
        return Err(Error::Unsupported("sphere quadrature on Euclidean space".into()));
    };
    let xp = crate::space::Point::new(x.to_vec());
    let mut total = 0.0;
    for i in 0..n_theta {
        let th = PI * (i as f64 + 0.5) / n_theta as f64;
        let st = th.sin();
        let row = integrate(
            |phi: f64| {
                let y = crate::space::Point::new(vec![
                    radius * st * phi.cos(),
                    radius * st * phi.sin(),
                    radius * th.cos(),
                ]);
                space.heat_kernel(t, &xp, &y).unwrap_or(f64::NAN) * f.eval_on(space, &y)
            },
            0.0,
            2.0 * PI,
            1e-12,
            1e-10,
        );
        total += row * radius * radius * st * PI / n_theta as f64;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{erf, normal_cdf};

    #[test]
    fn sign_semigroup_matches_erf() {
        let e = StateSpace::euclidean(1);
        let f = TestFunction::Sign { axis: 0 };
        for t in [0.25, 1.0, 4.0] {
            for x in [-2.0, -0.3, 0.0, 0.01, 1.5] {
                let v = f.heat_semigroup(&e, t, &[x]).unwrap();
                let exact = erf(x / (2.0 * f64::sqrt(t)));
                assert!((v - exact).abs() < 1e-11, "t={t} x={x}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn half_space_semigroup_in_three_dimensions() {
        let e = StateSpace::euclidean(3);
        let f = TestFunction::HalfSpace {
            normal: vec![1.0, 1.0, 0.0],
            offset: 0.2,
        };
        let x = [0.4, -0.1, 3.0];
        let s = (0.4 - 0.1) / 2f64.sqrt() - 0.2;
        let exact = normal_cdf(s / (2.0f64 * 0.7).sqrt());
        assert!((f.heat_semigroup(&e, 0.7, &x).unwrap() - exact).abs() < 1e-11);
    }

    #[test]
    fn gaussian_semigroup_closed_form() {
        // e^{tΔ} e^{-x²/2w²} = (w²/(w²+2t))^{d/2} exp(-x²/(2(w²+2t)))
        let e = StateSpace::euclidean(2);
        let f = TestFunction::Gaussian {
            center: vec![0.0, 0.0],
            width: 1.0,
        };
        let x = [0.5, -1.0];
        let t = 0.3;
        let s2: f64 = 1.0 + 2.0 * t;
        let exact = (1.0 / s2) * (-(0.25 + 1.0) / (2.0 * s2)).exp();
        assert!((f.heat_semigroup(&e, t, &x).unwrap() - exact).abs() < 1e-11);
    }

    #[test]
    fn ball_semigroup_three_dimensions_matches_product_quadrature_at_center() {
        // at the centre: P(|√(2t) Z| < R) = P(chi_3 < R/√(2t))
        let e = StateSpace::euclidean(3);
        let f = TestFunction::Ball {
            center: vec![0.0; 3],
            radius: 1.0,
        };
        let t = 0.2;
        let u = 1.0 / (2.0f64 * t).sqrt();
        let chi3 = erf(u / 2f64.sqrt()) - (2.0 / PI).sqrt() * u * (-u * u / 2.0).exp();
        assert!((f.heat_semigroup(&e, t, &[0.0; 3]).unwrap() - chi3).abs() < 1e-11);
        // continuity in the centre offset
        let near = f.heat_semigroup(&e, t, &[1e-9, 0.0, 0.0]).unwrap();
        assert!((near - chi3).abs() < 1e-8);
    }

    #[test]
    fn exp_radial_semigroup_small_time_limit() {
        let e = StateSpace::euclidean(3);
        let f = TestFunction::ExpRadial {
            center: vec![0.0; 3],
            rate: 0.5,
        };
        let x = [1.0, 0.0, 0.0];
        let v = f.heat_semigroup(&e, 1e-6, &x).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn hemisphere_semigroup_matches_quadrature() {
        let s = StateSpace::unit_sphere();
        let f = TestFunction::HalfSpace {
            normal: vec![0.0, 0.0, 1.0],
            offset: 0.0,
        };
        for x in [[0.6, 0.0, 0.8], [0.0, 1.0, 0.0], [0.0, -0.6, -0.8]] {
            let series = f.heat_semigroup(&s, 0.5, &x).unwrap();
            let quad = sphere_semigroup_by_quadrature(&s, &f, 0.5, &x, 400).unwrap();
            assert!((series - quad).abs() < 1e-5, "{series} vs {quad}");
        }
        let eq = f.heat_semigroup(&s, 0.5, &[1.0, 0.0, 0.0]).unwrap();
        assert!((eq - 0.5).abs() < 1e-14);
    }

    #[test]
    fn constant_and_sup_norms() {
        let c = TestFunction::Constant { value: -3.0 };
        assert_eq!(c.sup_norm(), 3.0);
        assert_eq!(c.heat_semigroup(&StateSpace::euclidean(2), 1.0, &[0.0, 1.0]).unwrap(), -3.0);
        assert_eq!(TestFunction::Sign { axis: 0 }.sup_norm(), 1.0);
    }
}
