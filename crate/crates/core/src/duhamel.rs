//! Deterministic check of the perturbation identity
//! `e^{-tH_V}Ψ = e^{-tH}Ψ - ∫₀^t e^{-sH} V e^{-(t-s)H_V}Ψ ds` on `ℝ¹`.
//!
//! Space is a periodic Fourier grid on `[-L, L)`, where `e^{-sH}` acts as the
//! exact periodized heat semigroup on trigonometric polynomials. Both
//! semigroups come from symmetric eigendecompositions, so the residual
//! measures the composite Gauss rule in time.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::numerics::gauss_legendre;
use crate::potential::Potential;
use crate::space::SpaceKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuhamelGrid {
    /// Even number of space points.
    pub n_space: usize,
    pub half_width: f64,
    pub n_panels: usize,
    /// Gauss-Legendre nodes per time panel; 1 is the midpoint rule.
    pub gauss_points: usize,
}

impl Default for DuhamelGrid {
    fn default() -> Self {
        Self {
            n_space: 128,
            half_width: 8.0,
            n_panels: 8,
            gauss_points: 1,
        }
    }
}

/// Symmetric matrix of `-d²/dx²` on the periodic Fourier grid.
fn fourier_laplacian(n: usize, period: f64) -> DMatrix<f64> {
    let half = n / 2;
    let kappa = |k: usize| 2.0 * PI * k as f64 / period;
    // column of the circulant: a_m = (1/n)(Σ_{k<n/2} 2κ_k² cos(2πkm/n) + κ_{n/2}² (-1)^m)
    let col: Vec<f64> = (0..n)
        .map(|m| {
            let mut s = kappa(half).powi(2) * if m % 2 == 0 { 1.0 } else { -1.0 };
            for k in 1..half {
                s += 2.0 * kappa(k).powi(2) * (2.0 * PI * (k * m) as f64 / n as f64).cos();
            }
            s / n as f64
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| col[(i + n - j) % n])
}

struct Propagator {
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl Propagator {
    fn new(m: DMatrix<f64>) -> Self {
        Self { eig: m.symmetric_eigen() }
    }

    fn apply(&self, s: f64, v: &DVector<f64>) -> DVector<f64> {
        let q = &self.eig.eigenvectors;
        let mut c = q.tr_mul(v);
        for (ci, l) in c.iter_mut().zip(self.eig.eigenvalues.iter()) {
            *ci *= (-s * l).exp();
        }
        q * c
    }
}

/// Sup-norm residual of the perturbation identity on the space grid.
pub fn duhamel_residual(v: &Potential, psi: &dyn Fn(f64) -> f64, t: f64, grid: &DuhamelGrid) -> Result<f64> {
    check_time(t)?;
    if v.space.kind != (SpaceKind::Euclidean { dim: 1 }) {
        return Err(Error::Unsupported("the perturbation identity is checked on euclidean(1)".into()));
    }
    if !v.sup_abs().is_finite() {
        return Err(Error::HypothesisViolated("potential must be bounded".into()));
    }
    if grid.n_space < 4 || grid.n_space % 2 != 0 || grid.n_panels == 0 || grid.gauss_points == 0 || !(grid.half_width > 0.0) {
        return Err(Error::OutOfRange(format!("{grid:?}")));
    }
    let n = grid.n_space;
    let period = 2.0 * grid.half_width;
    let h = period / n as f64;
    let xs: Vec<f64> = (0..n).map(|j| -grid.half_width + h * j as f64).collect();
    let vx = DVector::from_iterator(n, xs.iter().map(|&x| v.eval(&[x])));
    let phi = DVector::from_iterator(n, xs.iter().map(|&x| psi(x)));

    let lap = fourier_laplacian(n, period);
    let heat = Propagator::new(lap.clone());
    let schrodinger = Propagator::new(lap + DMatrix::from_diagonal(&vx));

    let lhs = schrodinger.apply(t, &phi);
    let mut rhs = heat.apply(t, &phi);
    let (nodes, weights) = gauss_legendre(grid.gauss_points);
    let width = t / grid.n_panels as f64;
    for p in 0..grid.n_panels {
        let a = p as f64 * width;
        for (z, w) in nodes.iter().zip(&weights) {
            let s = a + 0.5 * width * (z + 1.0);
            let inner = schrodinger.apply(t - s, &phi).component_mul(&vx);
            rhs -= heat.apply(s, &inner) * (0.5 * width * w);
        }
    }
    Ok((lhs - rhs).amax())
}

/// Smooth compactly supported profile `exp(1 - 1/(1 - x²/w²))` on `|x| < w`.
pub fn smooth_bump(x: f64, width: f64) -> f64 {
    let r2 = x * x / (width * width);
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialKind;
    use crate::space::StateSpace;

    fn bump_potential() -> Potential {
        Potential::new(
            StateSpace::euclidean(1),
            PotentialKind::Bump {
                center: vec![0.0],
                width: 1.5,
                height: 3.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn laplacian_matches_fourier_symbol() {
        // oracle: cos(κx) is an eigenvector with eigenvalue κ²
        let (n, period) = (32, 6.0);
        let lap = fourier_laplacian(n, period);
        let kappa = 2.0 * PI * 3.0 / period;
        let v = DVector::from_fn(n, |j, _| (kappa * period * j as f64 / n as f64).cos());
        let err = (&lap * &v - &v * kappa * kappa).amax();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn heat_propagator_matches_periodized_kernel() {
        let (n, l) = (128, 8.0);
        let h = 2.0 * l / n as f64;
        let xs: Vec<f64> = (0..n).map(|j| -l + h * j as f64).collect();
        let phi = DVector::from_iterator(n, xs.iter().map(|&x| smooth_bump(x, 1.0)));
        let heat = Propagator::new(fourier_laplacian(n, 2.0 * l));
        let s = 0.3;
        let got = heat.apply(s, &phi);
        for (i, &x) in xs.iter().enumerate() {
            let mut exact = 0.0;
            for (j, &y) in xs.iter().enumerate() {
                for wrap in [-1.0, 0.0, 1.0] {
                    let d = x - y + wrap * 2.0 * l;
                    exact += h * (-d * d / (4.0 * s)).exp() / (4.0 * PI * s).sqrt() * phi[j];
                }
            }
            assert!((got[i] - exact).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn zero_potential_has_zero_residual() {
        let v = Potential::zero(StateSpace::euclidean(1));
        let r = duhamel_residual(&v, &|x| smooth_bump(x, 1.0), 0.5, &DuhamelGrid::default()).unwrap();
        assert!(r < 1e-13, "{r}");
    }

    #[test]
    fn constant_potential_residual() {
        let v = Potential::constant(StateSpace::euclidean(1), 1.3);
        let grid = DuhamelGrid {
            gauss_points: 6,
            n_panels: 4,
            ..DuhamelGrid::default()
        };
        let r = duhamel_residual(&v, &|x| smooth_bump(x, 1.0), 0.5, &grid).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn bump_residual_is_second_order() {
        let v = bump_potential();
        let res: Vec<f64> = [4, 8, 16, 32]
            .iter()
            .map(|&p| {
                let grid = DuhamelGrid {
                    n_panels: p,
                    ..DuhamelGrid::default()
                };
                duhamel_residual(&v, &|x| smooth_bump(x, 1.0), 0.5, &grid).unwrap()
            })
            .collect();
        for w in res.windows(2) {
            assert!(w[0] / w[1] >= 3.5, "{res:?}");
        }
    }

    #[test]
    fn rejects_unbounded_or_other_spaces() {
        let f = |x: f64| smooth_bump(x, 1.0);
        assert!(duhamel_residual(&Potential::harmonic(1, 1.0), &f, 0.5, &DuhamelGrid::default()).is_err());
        assert!(duhamel_residual(&Potential::hydrogen(), &f, 0.5, &DuhamelGrid::default()).is_err());
    }
}
