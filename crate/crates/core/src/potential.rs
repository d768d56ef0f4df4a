//! Potentials on the model spaces and their elementary-term decomposition.
//!
//! Every potential is a finite signed sum of elementary terms. The Kato
//! evaluators and the Feynman-Kac action integrator work term by term: the
//! heat-smoothed absolute value of each term is known in closed form or by a
//! one-dimensional quadrature.

use std::f64::consts::PI;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{erf, integrate_pieces};
use crate::path::PathSkeleton;
use crate::space::{euclidean_kernel, Point, SpaceKind, StateSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nucleus {
    #[serde(rename = "R")]
    pub position: [f64; 3],
    #[serde(rename = "Z")]
    pub charge: f64,
}

/// `m` electrons in the field of fixed nuclei, on `ℝ^{3m}`:
/// `−Σ_j Σ_i Z_i/|x_j − R_i| + Σ_{i<j} 1/|x_i − x_j|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MolecularPotential {
    pub m: usize,
    pub nuclei: Vec<Nucleus>,
}

impl MolecularPotential {
    pub fn hydrogen() -> Self {
        Self {
            m: 1,
            nuclei: vec![Nucleus {
                position: [0.0; 3],
                charge: 1.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::OutOfRange("molecule needs at least one electron".into()));
        }
        for n in &self.nuclei {
            if !(n.charge >= 0.0) || n.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::OutOfRange(format!("nucleus {n:?}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mol: Self = serde_json::from_str(text)
            .map_err(|e| Error::OutOfRange(format!("molecule JSON line {} column {}: {e}", e.line(), e.column())))?;
        mol.validate()?;
        Ok(mol)
    }

    pub fn from_file(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::OutOfRange(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("molecule is serializable")
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for j in 0..self.m {
            let xj = &x[3 * j..3 * j + 3];
            for n in &self.nuclei {
                v -= n.charge / dist(xj, &n.position);
            }
            for i in 0..j {
                v += 1.0 / dist(&x[3 * i..3 * i + 3], xj);
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    Constant { value: f64 },
    /// `coefficient / |x − center|` on `ℝ³`.
    Coulomb { center: [f64; 3], coefficient: f64 },
    /// `coefficient · |x|²`.
    Harmonic { coefficient: f64 },
    /// `height · exp(1 − 1/(1 − |x−c|²/w²))` inside the ball of radius `w`, zero outside.
    Bump { center: Vec<f64>, width: f64, height: f64 },
    Molecular(MolecularPotential),
    Sum { terms: Vec<PotentialKind> },
    Scaled { factor: f64, inner: Box<PotentialKind> },
}

/// A potential on a fixed state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub space: StateSpace,
    pub kind: PotentialKind,
}

/// Elementary signed term. Singular terms carry the block structure needed to
/// project a configuration onto `ℝ³`.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Constant(f64),
    /// `strength / |x_{block} − center|`; `x_block` is a 3-vector of coordinates.
    Point { strength: f64, block: usize, center: [f64; 3] },
    /// `strength / |x_i − x_j|` between two 3-blocks.
    Pair { strength: f64, i: usize, j: usize },
    /// Bounded bump, see [`PotentialKind::Bump`].
    Bump { center: Vec<f64>, width: f64, height: f64 },
    /// `coefficient |x|²`, unbounded at infinity.
    Harmonic { coefficient: f64 },
}

/// Where a potential is infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Singularity {
    /// The affine subspace `{x : x_block = center}`.
    Point { block: usize, center: [f64; 3] },
    /// The coincidence subspace `{x : x_i = x_j}`.
    Coincidence { i: usize, j: usize },
}

impl Singularity {
    /// Euclidean distance from `x` to the singular subspace.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Singularity::Point { block, center } => dist(&x[3 * block..3 * block + 3], center),
            Singularity::Coincidence { i, j } => {
                dist(&x[3 * i..3 * i + 3], &x[3 * j..3 * j + 3]) / std::f64::consts::SQRT_2
            }
        }
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn bump_value(x: &[f64], center: &[f64], width: f64, height: f64) -> f64 {
    let r2 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (width * width);
    if r2 >= 1.0 {
        0.0
    } else {
        height * (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

/// `erf(u)/u`, with its removable value `2/√π` at 0.
pub(crate) fn erf_over(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        2.0 / PI.sqrt() * (1.0 - u2 / 3.0 + u2 * u2 / 10.0 - u2 * u2 * u2 / 42.0)
    } else {
        erf(u) / u
    }
}

/// `∫ p(s, x, y) |y − center|^{-1} dy` on `ℝ³`, equal to `erf(ρ/(2√s))/ρ` with `ρ = |x − center|`.
pub fn smoothed_coulomb(s: f64, x: &[f64], center: &[f64]) -> Result<f64> {
    crate::error::check_time(s)?;
    if x.len() != 3 || center.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: x.len(),
        });
    }
    let rho = dist(x, center);
    Ok(erf_over(rho / (2.0 * s.sqrt())) / (2.0 * s.sqrt()))
}

impl Term {
    pub fn is_singular(&self) -> bool {
        matches!(self, Term::Point { .. } | Term::Pair { .. })
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Term::Constant(_) | Term::Bump { .. })
    }

    /// Whether the term takes negative values somewhere.
    pub fn can_be_negative(&self) -> bool {
        match self {
            Term::Constant(c) => *c < 0.0,
            Term::Point { strength, .. } | Term::Pair { strength, .. } => *strength < 0.0,
            Term::Bump { height, .. } => *height < 0.0,
            Term::Harmonic { coefficient } => *coefficient < 0.0,
        }
    }

    pub fn scaled(&self, f: f64) -> Term {
        match self.clone() {
            Term::Constant(c) => Term::Constant(f * c),
            Term::Point { strength, block, center } => Term::Point {
                strength: f * strength,
                block,
                center,
            },
            Term::Pair { strength, i, j } => Term::Pair { strength: f * strength, i, j },
            Term::Bump { center, width, height } => Term::Bump {
                center,
                width,
                height: f * height,
            },
            Term::Harmonic { coefficient } => Term::Harmonic {
                coefficient: f * coefficient,
            },
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Term::Constant(c) => *c,
            Term::Point { strength, block, center } => strength / dist(&x[3 * block..3 * block + 3], center),
            Term::Pair { strength, i, j } => strength / dist(&x[3 * i..3 * i + 3], &x[3 * j..3 * j + 3]),
            Term::Bump { center, width, height } => bump_value(x, center, *width, *height),
            Term::Harmonic { coefficient } => coefficient * x.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    /// `sup |term|`, infinite for singular or unbounded terms.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Term::Constant(c) => c.abs(),
            Term::Bump { height, .. } => height.abs(),
            Term::Harmonic { coefficient } if *coefficient == 0.0 => 0.0,
            _ => f64::INFINITY,
        }
    }

    /// Diffusivity of the distance coordinate the term depends on, in units of
    /// a 3D Brownian motion: 1 for a point charge, 2 for a pair term.
    fn diffusivity(&self) -> f64 {
        match self {
            Term::Pair { .. } => 2.0,
            _ => 1.0,
        }
    }

    /// Distance coordinate of a singular term.
    fn rho(&self, x: &[f64]) -> f64 {
        match self {
            Term::Point { block, center, .. } => dist(&x[3 * block..3 * block + 3], center),
            Term::Pair { i, j, .. } => dist(&x[3 * i..3 * i + 3], &x[3 * j..3 * j + 3]),
            _ => 0.0,
        }
    }

    /// `√s · ∫ p(s, x, y) |term(y)| dy`, bounded as `s → 0` for every term of
    /// this crate (singular terms tend to `|strength| / (√π √κ)` at the singular set).
    ///
    /// Infinite for the harmonic term.
    pub fn sqrt_s_smoothed_abs(&self, space: &StateSpace, s: f64, x: &[f64]) -> f64 {
        match self {
            Term::Constant(c) => s.sqrt() * c.abs(),
            Term::Point { strength, .. } | Term::Pair { strength, .. } => {
                let kappa = self.diffusivity();
                let u = self.rho(x) / (2.0 * (kappa * s).sqrt());
                strength.abs() * erf_over(u) / (2.0 * kappa.sqrt())
            }
            Term::Bump { center, width, height } => s.sqrt() * smoothed_bump(space, s, x, center, *width, height.abs()),
            Term::Harmonic { coefficient } => {
                if *coefficient == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `∫ p(s, x, y) |term(y)| dy`.
    pub fn smoothed_abs(&self, space: &StateSpace, s: f64, x: &[f64]) -> f64 {
        match self {
            Term::Constant(c) => c.abs(),
            Term::Bump { center, width, height } => smoothed_bump(space, s, x, center, *width, height.abs()),
            Term::Harmonic { coefficient } => {
                let d = x.len() as f64;
                coefficient.abs() * (x.iter().map(|v| v * v).sum::<f64>() + 2.0 * d * s)
            }
            _ => self.sqrt_s_smoothed_abs(space, s, x) / s.sqrt(),
        }
    }

    /// Points where `∫ p |term|` is maximal, as seeds for the sup search.
    fn hot_spots(&self, dim: usize) -> Vec<Vec<f64>> {
        match self {
            Term::Point { block, center, .. } => {
                let mut x = vec![0.0; dim];
                x[3 * block..3 * block + 3].copy_from_slice(center);
                vec![x]
            }
            Term::Bump { center, .. } => vec![center.clone()],
            _ => Vec::new(),
        }
    }
}

/// Heat-smoothed bump for `d = 1` (direct quadrature) and `d = 3` (radial quadrature).
fn smoothed_bump(space: &StateSpace, s: f64, x: &[f64], center: &[f64], width: f64, height: f64) -> f64 {
    let profile = |r: f64| {
        let r2 = r * r / (width * width);
        if r2 >= 1.0 {
            0.0
        } else {
            height * (1.0 - 1.0 / (1.0 - r2)).exp()
        }
    };
    match space.kind {
        SpaceKind::Euclidean { dim: 1 } => {
            let c = center[0];
            integrate_pieces(
                |y: f64| profile(y - c) * euclidean_kernel(1, s, (x[0] - y) * (x[0] - y)),
                c - width,
                c + width,
                &[c],
                1e-15,
                1e-12,
            )
        }
        SpaceKind::Euclidean { dim: 3 } => {
            let a = dist(x, center);
            if a < 1e-9 {
                let k = 4.0 * PI * (4.0 * PI * s).powf(-1.5);
                return integrate_pieces(
                    |r: f64| profile(r) * k * r * r * (-r * r / (4.0 * s)).exp(),
                    0.0,
                    width,
                    &[],
                    1e-15,
                    1e-12,
                );
            }
            let k = 1.0 / (a * (4.0 * PI * s).sqrt());
            integrate_pieces(
                |r: f64| {
                    let g = (-(r - a) * (r - a) / (4.0 * s)).exp() - (-(r + a) * (r + a) / (4.0 * s)).exp();
                    profile(r) * k * r * g
                },
                0.0,
                width,
                &[a],
                1e-15,
                1e-12,
            )
        }
        // any other case falls back to the sup norm, which still bounds the integral
        _ => height,
    }
}

fn flatten(kind: &PotentialKind, factor: f64, out: &mut Vec<Term>) {
    match kind {
        PotentialKind::Zero => {}
        PotentialKind::Constant { value } => out.push(Term::Constant(factor * value)),
        PotentialKind::Coulomb { center, coefficient } => out.push(Term::Point {
            strength: factor * coefficient,
            block: 0,
            center: *center,
        }),
        PotentialKind::Harmonic { coefficient } => out.push(Term::Harmonic {
            coefficient: factor * coefficient,
        }),
        PotentialKind::Bump { center, width, height } => out.push(Term::Bump {
            center: center.clone(),
            width: *width,
            height: factor * height,
        }),
        PotentialKind::Molecular(mol) => {
            for j in 0..mol.m {
                for n in &mol.nuclei {
                    if n.charge != 0.0 {
                        out.push(Term::Point {
                            strength: -factor * n.charge,
                            block: j,
                            center: n.position,
                        });
                    }
                }
                for i in 0..j {
                    out.push(Term::Pair { strength: factor, i, j });
                }
            }
        }
        PotentialKind::Sum { terms } => {
            for t in terms {
                flatten(t, factor, out);
            }
        }
        PotentialKind::Scaled { factor: f, inner } => flatten(inner, factor * f, out),
    }
}

impl Potential {
    pub fn new(space: StateSpace, kind: PotentialKind) -> Result<Self> {
        let p = Self { space, kind };
        p.validate()?;
        Ok(p)
    }

    pub fn zero(space: StateSpace) -> Self {
        Self {
            space,
            kind: PotentialKind::Zero,
        }
    }

    pub fn constant(space: StateSpace, value: f64) -> Self {
        Self {
            space,
            kind: PotentialKind::Constant { value },
        }
    }

    /// `coefficient / |x|` on `ℝ³`.
    pub fn coulomb(coefficient: f64) -> Self {
        Self {
            space: StateSpace::euclidean(3),
            kind: PotentialKind::Coulomb {
                center: [0.0; 3],
                coefficient,
            },
        }
    }

    /// Hydrogen: `−1/|x|` on `ℝ³`.
    pub fn hydrogen() -> Self {
        Self::coulomb(-1.0)
    }

    pub fn molecular(mol: MolecularPotential) -> Result<Self> {
        mol.validate()?;
        Self::new(StateSpace::euclidean(3 * mol.m), PotentialKind::Molecular(mol))
    }

    pub fn harmonic(dim: usize, coefficient: f64) -> Self {
        Self {
            space: StateSpace::euclidean(dim),
            kind: PotentialKind::Harmonic { coefficient },
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            space: self.space,
            kind: PotentialKind::Scaled {
                factor,
                inner: Box::new(self.kind.clone()),
            },
        }
    }

    pub fn plus(&self, other: &Potential) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::OutOfRange("sum of potentials on different spaces".into()));
        }
        Ok(Self {
            space: self.space,
            kind: PotentialKind::Sum {
                terms: vec![self.kind.clone(), other.kind.clone()],
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.space.ambient_dimension();
        for t in self.terms() {
            let ok = match &t {
                Term::Point { block, .. } => self.space.is_euclidean() && 3 * block + 3 <= dim && dim % 3 == 0,
                Term::Pair { i, j, .. } => self.space.is_euclidean() && 3 * i.max(j) + 3 <= dim,
                Term::Bump { center, width, .. } => center.len() == dim && *width > 0.0,
                Term::Harmonic { .. } => self.space.is_euclidean(),
                Term::Constant(_) => true,
            };
            if !ok {
                return Err(Error::Unsupported(format!(
                    "term {t:?} on {:?}; singular and unbounded potentials need Euclidean space of matching dimension",
                    self.space.kind
                )));
            }
        }
        Ok(())
    }

    pub fn terms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        flatten(&self.kind, 1.0, &mut out);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Molecular(m) => m.eval(x),
            _ => self.terms().iter().map(|t| t.eval(x)).sum(),
        }
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        self.terms()
            .iter()
            .filter_map(|t| match t {
                Term::Point { block, center, .. } => Some(Singularity::Point {
                    block: *block,
                    center: *center,
                }),
                Term::Pair { i, j, .. } => Some(Singularity::Coincidence { i: *i, j: *j }),
                _ => None,
            })
            .collect()
    }

    /// Distance to the nearest singular subspace, `∞` when there is none.
    pub fn singular_distance(&self, x: &[f64]) -> f64 {
        self.singularities()
            .iter()
            .map(|s| s.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// `sup |V|` when finite.
    pub fn sup_abs(&self) -> f64 {
        self.terms().iter().map(Term::sup_abs).sum()
    }

    /// Terms whose negative parts majorize `V⁻ = max(−V, 0)`, sign flipped to be non-negative.
    pub fn negative_part_terms(&self) -> Vec<Term> {
        self.terms()
            .into_iter()
            .filter(Term::can_be_negative)
            .map(|t| t.scaled(-1.0))
            .collect()
    }

    /// Seeds for searching the supremum in `x` of smoothed quantities.
    pub fn sup_search_seeds(&self) -> Vec<Vec<f64>> {
        let dim = self.space.ambient_dimension();
        let mut seeds = vec![self.space.base_point().0];
        if let PotentialKind::Molecular(mol) = &self.kind {
            let l = mol.nuclei.len();
            let put = |assign: &dyn Fn(usize) -> [f64; 3]| {
                let mut x = vec![0.0; dim];
                for j in 0..mol.m {
                    x[3 * j..3 * j + 3].copy_from_slice(&assign(j));
                }
                x
            };
            for a in 0..l {
                seeds.push(put(&|_| mol.nuclei[a].position));
                for b in a + 1..l {
                    let (p, q) = (mol.nuclei[a].position, mol.nuclei[b].position);
                    seeds.push(put(&|_| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])]));
                }
            }
            if l > 0 {
                seeds.push(put(&|j| mol.nuclei[j % l].position));
            }
        } else {
            for t in self.terms() {
                seeds.extend(t.hot_spots(dim));
            }
        }
        seeds.dedup();
        seeds
    }
}

/// Projection of configuration space `ℝ^{3m}` onto `ℝ³`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    /// `x ↦ x_j`.
    Electron { j: usize },
    /// `x ↦ (x_i − x_j)/√2`, a Riemannian submersion.
    Pair { i: usize, j: usize },
    /// `x ↦ x_i − x_j`, which runs at twice the Brownian speed.
    PairUnnormalized { i: usize, j: usize },
}

impl Projection {
    pub fn apply(&self, x: &[f64]) -> [f64; 3] {
        let blk = |k: usize| [x[3 * k], x[3 * k + 1], x[3 * k + 2]];
        match *self {
            Projection::Electron { j } => blk(j),
            Projection::Pair { i, j } | Projection::PairUnnormalized { i, j } => {
                let s = if matches!(self, Projection::Pair { .. }) {
                    std::f64::consts::FRAC_1_SQRT_2
                } else {
                    1.0
                };
                let (a, b) = (blk(i), blk(j));
                [s * (a[0] - b[0]), s * (a[1] - b[1]), s * (a[2] - b[2])]
            }
        }
    }

    fn max_index(&self) -> usize {
        match *self {
            Projection::Electron { j } => j,
            Projection::Pair { i, j } | Projection::PairUnnormalized { i, j } => i.max(j),
        }
    }
}

/// Projects a skeleton in `ℝ^{3m}` onto `ℝ³`.
pub fn submersion_project(path: &PathSkeleton, projection: Projection) -> Result<PathSkeleton> {
    let SpaceKind::Euclidean { dim } = path.space.kind else {
        return Err(Error::Unsupported("submersion of a sphere path".into()));
    };
    let m = dim / 3;
    if dim % 3 != 0 || projection.max_index() >= m {
        return Err(Error::IndexOutOfRange {
            index: projection.max_index(),
            len: m,
        });
    }
    if let Projection::Pair { i, j } | Projection::PairUnnormalized { i, j } = projection {
        if i == j {
            return Err(Error::OutOfRange("pair projection needs distinct electrons".into()));
        }
    }
    let points = path.points().iter().map(|p| Point::new(projection.apply(p).to_vec())).collect();
    Ok(PathSkeleton::from_parts(
        StateSpace::euclidean(3),
        path.times().to_vec(),
        points,
        path.lineage.clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::sample_path;
    use crate::rng::{par_map, Substreams};
    use crate::stats::correlation;

    #[test]
    fn smoothed_coulomb_values() {
        let c = [0.0; 3];
        let v = smoothed_coulomb(1.0, &c, &c).unwrap();
        assert!((v - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!((v - 0.564_19).abs() < 1e-5);
        let far = smoothed_coulomb(0.1, &[100.0, 0.0, 0.0], &c).unwrap();
        assert!((far - 0.01).abs() < 1e-15);
        // removable singularity: continuous across the series switch
        let a = smoothed_coulomb(1.0, &[1.999e-3, 0.0, 0.0], &c).unwrap();
        let b = smoothed_coulomb(1.0, &[2.001e-3, 0.0, 0.0], &c).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn smoothed_coulomb_matches_radial_quadrature() {
        // independent oracle: 3D radial integral of |y|^{-1} against the kernel
        let s = 0.3;
        for a in [0.0, 0.2, 1.0, 2.5] {
            let quad = crate::numerics::integrate(
                |r: f64| {
                    let k = if a == 0.0 {
                        4.0 * PI * r * r * (4.0 * PI * s).powf(-1.5) * (-r * r / (4.0 * s)).exp()
                    } else {
                        r / (a * (4.0 * PI * s).sqrt())
                            * ((-(r - a) * (r - a) / (4.0 * s)).exp() - (-(r + a) * (r + a) / (4.0 * s)).exp())
                    };
                    k / r
                },
                0.0,
                a + 30.0,
                1e-14,
                1e-12,
            );
            let v = smoothed_coulomb(s, &[a, 0.0, 0.0], &[0.0; 3]).unwrap();
            assert!((v - quad).abs() < 1e-10, "a={a}: {v} vs {quad}");
        }
    }

    #[test]
    fn smoothed_coulomb_is_monotone_in_distance() {
        let mut last = f64::INFINITY;
        for k in 0..2000 {
            let r = k as f64 * 0.005;
            let v = smoothed_coulomb(0.5, &[r, 0.0, 0.0], &[0.0; 3]).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn molecular_json_round_trip_and_eval() {
        let text = r#"{"m": 2, "nuclei": [{"R": [0, 0, 0], "Z": 2}]}"#;
        let mol = MolecularPotential::from_json(text).unwrap();
        assert_eq!(mol.m, 2);
        let back = MolecularPotential::from_json(&mol.to_json()).unwrap();
        assert_eq!(back, mol);
        let x = [1.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        let expect = -2.0 - 1.0 + 1.0 / 5f64.sqrt();
        assert!((mol.eval(&x) - expect).abs() < 1e-15);
        let p = Potential::molecular(mol).unwrap();
        assert!((p.terms().iter().map(|t| t.eval(&x)).sum::<f64>() - expect).abs() < 1e-15);
        assert!(MolecularPotential::from_json(r#"{"m": 1, "nuclei": [], "extra": 1}"#).is_err());
    }

    #[test]
    fn singular_locus_matches_non_finiteness() {
        let mol = MolecularPotential {
            m: 2,
            nuclei: vec![
                Nucleus {
                    position: [0.0, 0.0, 0.0],
                    charge: 1.0,
                },
                Nucleus {
                    position: [1.4, 0.0, 0.0],
                    charge: 1.0,
                },
            ],
        };
        let p = Potential::molecular(mol).unwrap();
        assert_eq!(p.singularities().len(), 5);
        let on_nucleus = [1.4, 0.0, 0.0, 0.3, 0.2, 0.1];
        assert_eq!(p.singular_distance(&on_nucleus), 0.0);
        assert!(!p.eval(&on_nucleus).is_finite());
        let coincide = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        assert_eq!(p.singular_distance(&coincide), 0.0);
        assert!(!p.eval(&coincide).is_finite());
        // grid away from the locus: finite values
        for k in 0..50 {
            let x = [0.1 + 0.03 * k as f64, 0.2, -0.1, -0.4, 0.05 * k as f64, 0.3];
            assert!(p.singular_distance(&x) > 0.0);
            assert!(p.eval(&x).is_finite());
        }
    }

    #[test]
    fn negative_part_of_hydrogen_is_repulsive_coulomb() {
        let h = Potential::hydrogen();
        let neg = h.negative_part_terms();
        assert_eq!(neg.len(), 1);
        assert!(matches!(neg[0], Term::Point { strength, .. } if strength == 1.0));
        assert!(Potential::harmonic(1, 1.0).negative_part_terms().is_empty());
    }

    #[test]
    fn bump_smoothing_against_kernel_quadrature() {
        let e = StateSpace::euclidean(1);
        let t = Term::Bump {
            center: vec![0.0],
            width: 1.0,
            height: 2.0,
        };
        // small-time limit recovers the bump
        let v = t.smoothed_abs(&e, 1e-7, &[0.3]);
        assert!((v - t.eval(&[0.3])).abs() < 1e-5);
        let e3 = StateSpace::euclidean(3);
        let t3 = Term::Bump {
            center: vec![0.0; 3],
            width: 1.0,
            height: 1.0,
        };
        let centre = t3.smoothed_abs(&e3, 0.1, &[0.0; 3]);
        let near = t3.smoothed_abs(&e3, 0.1, &[1e-6, 0.0, 0.0]);
        assert!((centre - near).abs() < 1e-8);
        assert!(centre < 1.0 && centre > 0.0);
    }

    #[test]
    fn projections_are_brownian_with_the_right_speed() {
        let e = StateSpace::euclidean(6);
        let s = Substreams::new(17);
        let h = 0.1;
        let n = 20_000;
        let incs: Vec<[f64; 4]> = par_map(n, |i| {
            let p = sample_path(&e, &Point::origin(6), 0.2, h, &mut s.stream(i as u64)).unwrap();
            let a = submersion_project(&p, Projection::Electron { j: 1 }).unwrap();
            let b = submersion_project(&p, Projection::Pair { i: 0, j: 1 }).unwrap();
            let c = submersion_project(&p, Projection::PairUnnormalized { i: 0, j: 1 }).unwrap();
            let d0 = |q: &PathSkeleton, k: usize| q.points()[k + 1][0] - q.points()[k][0];
            [d0(&a, 0), d0(&b, 0), d0(&c, 0), d0(&b, 1)]
        });
        let var = |k: usize| incs.iter().map(|v| v[k] * v[k]).sum::<f64>() / n as f64;
        let tol = 4.0 * 2.0 * h * (2.0 / n as f64).sqrt();
        assert!((var(0) - 2.0 * h).abs() < tol);
        assert!((var(1) - 2.0 * h).abs() < tol);
        assert!((var(2) - 4.0 * h).abs() < 2.0 * tol);
        let first: Vec<f64> = incs.iter().map(|v| v[1]).collect();
        let second: Vec<f64> = incs.iter().map(|v| v[3]).collect();
        assert!(correlation(&first, &second).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn projection_index_checks() {
        let e = StateSpace::euclidean(6);
        let mut rng = Substreams::new(0).stream(0);
        let p = sample_path(&e, &Point::origin(6), 0.2, 0.1, &mut rng).unwrap();
        assert!(matches!(
            submersion_project(&p, Projection::Electron { j: 2 }),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(submersion_project(&p, Projection::Pair { i: 1, j: 1 }).is_err());
    }
}
