//! Brownian path skeletons with bridge refinement and Hölder diagnostics.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::rng::Substreams;
use crate::space::{Point, StateSpace};

/// How a skeleton was produced, enough to regenerate it bit for bit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub seed: Option<u64>,
    pub path_index: Option<u64>,
    /// Times at which bridge midpoints were inserted, in insertion order.
    pub refinements: Vec<f64>,
}

/// A Brownian path observed at finitely many times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSkeleton {
    pub space: StateSpace,
    times: Vec<f64>,
    points: Vec<Point>,
    pub lineage: SeedLineage,
}

/// Samples the bridge midpoint of one coordinate pair over an interval of
/// length `delta`: mean `(a+b)/2`, variance `delta/2`.
pub fn bridge_midpoint<R: Rng + ?Sized>(a: f64, b: f64, delta: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    0.5 * (a + b) + (0.5 * delta).sqrt() * z
}

/// Grid times `0, h, 2h, ...` with a final (possibly shorter) step ending at `horizon`.
pub fn uniform_grid(horizon: f64, grid_step: f64) -> Vec<f64> {
    let n = ((horizon / grid_step) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..n).map(|i| i as f64 * grid_step).collect();
    times.push(horizon);
    times
}

/// Samples a skeleton on the uniform grid of step `grid_step` by chained transitions.
pub fn sample_path<R: Rng + ?Sized>(
    space: &StateSpace,
    x: &Point,
    horizon: f64,
    grid_step: f64,
    rng: &mut R,
) -> Result<PathSkeleton> {
    check_time(horizon)?;
    if !(grid_step > 0.0 && grid_step <= horizon) {
        return Err(Error::OutOfRange(format!(
            "grid step {grid_step} for horizon {horizon}"
        )));
    }
    space.validate(x)?;
    let times = uniform_grid(horizon, grid_step);
    let mut points = Vec::with_capacity(times.len());
    let mut cur = x.clone();
    points.push(cur.clone());
    for w in times.windows(2) {
        space.step_in_place(w[1] - w[0], &mut cur, rng);
        points.push(cur.clone());
    }
    Ok(PathSkeleton {
        space: *space,
        times,
        points,
        lineage: SeedLineage::default(),
    })
}

/// [`sample_path`] driven by stream `index` of `streams`, recorded in the lineage.
pub fn sample_path_seeded(
    space: &StateSpace,
    x: &Point,
    horizon: f64,
    grid_step: f64,
    streams: &Substreams,
    index: u64,
) -> Result<PathSkeleton> {
    let mut rng = streams.stream(index);
    let mut p = sample_path(space, x, horizon, grid_step, &mut rng)?;
    p.lineage.seed = Some(streams.seed());
    p.lineage.path_index = Some(index);
    Ok(p)
}

impl PathSkeleton {
    pub(crate) fn from_parts(space: StateSpace, times: Vec<f64>, points: Vec<Point>, lineage: SeedLineage) -> Self {
        debug_assert_eq!(times.len(), points.len());
        Self {
            space,
            times,
            points,
            lineage,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("skeleton is never empty")
    }

    pub fn endpoint(&self) -> &Point {
        self.points.last().expect("skeleton is never empty")
    }

    /// Index of the skeleton entry at exactly time `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|s| s.total_cmp(&t)).ok()
    }

    /// Inserts a Brownian-bridge midpoint into interval `[times[i], times[i+1]]`.
    ///
    /// Returns the index of the new entry.
    pub fn refine_bridge<R: Rng + ?Sized>(&mut self, interval_index: usize, rng: &mut R) -> Result<usize> {
        if !self.space.is_euclidean() {
            return Err(Error::Unsupported("bridge refinement on the sphere".into()));
        }
        if interval_index + 1 >= self.times.len() {
            return Err(Error::IndexOutOfRange {
                index: interval_index,
                len: self.times.len().saturating_sub(1),
            });
        }
        let (t0, t1) = (self.times[interval_index], self.times[interval_index + 1]);
        let delta = t1 - t0;
        let mid_t = 0.5 * (t0 + t1);
        if !(mid_t > t0 && mid_t < t1) {
            return Err(Error::OutOfRange(format!("interval [{t0}, {t1}] too short to split")));
        }
        let a = &self.points[interval_index];
        let b = &self.points[interval_index + 1];
        let mid: Vec<f64> = a
            .iter()
            .zip(b.iter())
            .map(|(&u, &v)| bridge_midpoint(u, v, delta, rng))
            .collect();
        let at = self.times.partition_point(|&s| s < mid_t);
        debug_assert_eq!(at, interval_index + 1);
        self.times.insert(at, mid_t);
        self.points.insert(at, Point(mid));
        self.lineage.refinements.push(mid_t);
        Ok(at)
    }

    /// Largest Hölder quotient `d(ω(s), ω(s')) / |s - s'|^α` over skeleton pairs, `α ∈ (0, 1/2)`.
    pub fn holder_modulus(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::OutOfRange(format!(
                "Hölder exponent {alpha} outside (0, 1/2); use holder_modulus_diagnostic"
            )));
        }
        Ok(self.max_quotient(alpha))
    }

    /// Same quotient for any `α ∈ (0, 1]`, where it may diverge under refinement.
    pub fn holder_modulus_diagnostic(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::OutOfRange(format!("Hölder exponent {alpha}")));
        }
        Ok(self.max_quotient(alpha))
    }

    /// Exact maximum over pairs by branch and bound.
    ///
    /// For each left index `i` the right indices are bisected; a sparse table of
    /// per-coordinate ranges bounds the distance from `ω(i)` to every point of a
    /// candidate block, and blocks that cannot beat the current maximum are
    /// dropped.
    fn max_quotient(&self, alpha: f64) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let dim = self.space.ambient_dimension();
        // chord-to-arc factor on the sphere
        let arc = if self.space.is_euclidean() {
            1.0
        } else {
            std::f64::consts::FRAC_PI_2
        };
        let table = RangeTable::new(&self.points, dim);
        let dist = |i: usize, j: usize| self.space.distance_unchecked(&self.points[i], &self.points[j]);
        let quotient = |i: usize, j: usize| dist(i, j) / (self.times[j] - self.times[i]).powf(alpha);

        let mut best = quotient(0, n - 1);
        for i in 0..n - 1 {
            best = best.max(quotient(i, i + 1));
        }
        let mut stack = Vec::new();
        for i in 0..n - 1 {
            stack.push((i + 1, n - 1));
            while let Some((lo, hi)) = stack.pop() {
                if lo == hi {
                    best = best.max(quotient(i, lo));
                    continue;
                }
                let gap = self.times[lo] - self.times[i];
                let bound = arc * table.reach_bound(&self.points[i], lo, hi) / gap.powf(alpha);
                if bound <= best {
                    continue;
                }
                let mid = lo + (hi - lo) / 2;
                stack.push((lo, mid));
                stack.push((mid + 1, hi));
            }
        }
        best
    }

    /// CSV rows `(path_id, time, coord_0, ...)`.
    pub fn write_csv<W: Write>(&self, path_id: u64, out: &mut W) -> io::Result<()> {
        for (t, p) in self.times.iter().zip(&self.points) {
            write!(out, "{path_id},{t}")?;
            for c in p.iter() {
                write!(out, ",{c}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// CSV header matching [`PathSkeleton::write_csv`].
pub fn csv_header(dim: usize) -> String {
    let mut h = String::from("path_id,time");
    for i in 0..dim {
        h.push_str(&format!(",coord_{i}"));
    }
    h
}

struct RangeTable {
    dim: usize,
    // levels[k][i * dim + c] = (min, max) of coordinate c over [i, i + 2^k)
    levels: Vec<Vec<(f64, f64)>>,
}

impl RangeTable {
    fn new(points: &[Point], dim: usize) -> Self {
        let n = points.len();
        let base: Vec<(f64, f64)> = points.iter().flat_map(|p| p.iter().map(|&c| (c, c))).collect();
        let mut levels = vec![base];
        let mut span = 1usize;
        while 2 * span <= n {
            let prev = levels.last().expect("base level exists");
            let count = n + 1 - 2 * span;
            let mut next = Vec::with_capacity(count * dim);
            for i in 0..count {
                for c in 0..dim {
                    let (a0, a1) = prev[i * dim + c];
                    let (b0, b1) = prev[(i + span) * dim + c];
                    next.push((a0.min(b0), a1.max(b1)));
                }
            }
            levels.push(next);
            span *= 2;
        }
        Self { dim, levels }
    }

    /// Upper bound on the Euclidean distance from `x` to any point with index in `[lo, hi]`.
    fn reach_bound(&self, x: &[f64], lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let k = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        let level = &self.levels[k];
        let right = hi + 1 - (1 << k);
        let mut s = 0.0;
        for c in 0..self.dim {
            let (a0, a1) = level[lo * self.dim + c];
            let (b0, b1) = level[right * self.dim + c];
            let r = (a1.max(b1) - x[c]).max(x[c] - a0.min(b0));
            s += r * r;
        }
        s.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal_cdf;
    use crate::rng::par_map;
    use crate::stats::{correlation, ks_test, quantile};

    fn brute_force_modulus(p: &PathSkeleton, alpha: f64) -> f64 {
        let mut best = 0.0f64;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let d = p.space.distance_unchecked(&p.points()[i], &p.points()[j]);
                best = best.max(d / (p.times()[j] - p.times()[i]).powf(alpha));
            }
        }
        best
    }

    #[test]
    fn single_step_skeleton() {
        let e = StateSpace::euclidean(2);
        let mut rng = Substreams::new(0).stream(0);
        let p = sample_path(&e, &Point::origin(2), 1.0, 1.0, &mut rng).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.times(), &[0.0, 1.0]);
        assert_eq!(p.points()[0], Point::origin(2));
    }

    #[test]
    fn grid_ends_at_horizon() {
        let g = uniform_grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(uniform_grid(1.0, 0.01).len(), 101);
    }

    #[test]
    fn rejects_bad_grid() {
        let e = StateSpace::euclidean(1);
        let mut rng = Substreams::new(0).stream(0);
        assert!(sample_path(&e, &Point::origin(1), 1.0, 2.0, &mut rng).is_err());
        assert!(sample_path(&e, &Point::origin(1), 0.0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn increments_on_disjoint_intervals_uncorrelated() {
        let e = StateSpace::euclidean(1);
        let n = 100_000;
        let s = Substreams::new(77);
        let pairs: Vec<(f64, f64)> = par_map(n, |i| {
            let p = sample_path(&e, &Point::origin(1), 1.0, 0.25, &mut s.stream(i as u64)).unwrap();
            let w = p.points();
            (w[1][0] - w[0][0], w[3][0] - w[2][0])
        });
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = correlation(&a, &b);
        assert!(r.abs() < 3.0 / (n as f64).sqrt(), "corr {r}");
    }

    #[test]
    fn endpoint_law_matches_single_transition() {
        let e = StateSpace::euclidean(3);
        let s = Substreams::new(3);
        let x = Point::new(vec![0.5, -1.0, 2.0]);
        let horizon = 0.8;
        let ys: Vec<f64> = par_map(20_000, |i| {
            let p = sample_path(&e, &x, horizon, 0.1, &mut s.stream(i as u64)).unwrap();
            p.endpoint()[1]
        });
        let sd = (2.0 * horizon).sqrt();
        let ks = ks_test(&ys, |v| normal_cdf((v - x[1]) / sd));
        assert!(ks.passes(1e-3), "{ks:?}");
    }

    #[test]
    fn degenerate_bridge_collapses() {
        let mut rng = Substreams::new(1).stream(0);
        for delta in [1e-6, 1e-10, 1e-14] {
            let m = bridge_midpoint(0.7, 0.7, delta, &mut rng);
            assert!((m - 0.7).abs() < 10.0 * (delta / 2.0).sqrt());
        }
        assert_eq!(bridge_midpoint(0.7, 0.7, 0.0, &mut rng), 0.7);
    }

    #[test]
    fn bridge_midpoint_variance_is_half_interval() {
        let s = Substreams::new(8);
        let n = 100_000;
        let v: Vec<f64> = par_map(n, |i| bridge_midpoint(0.0, 0.0, 1.0, &mut s.stream(i as u64)));
        let var = v.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // sample variance of N(0, 1/2) has standard error 0.5 * sqrt(2/n)
        assert!((var - 0.5).abs() < 4.0 * 0.5 * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn refinement_preserves_existing_entries_and_marginals() {
        let e = StateSpace::euclidean(1);
        let s = Substreams::new(21);
        let mids: Vec<(f64, f64)> = par_map(20_000, |i| {
            let mut rng = s.stream(i as u64);
            let mut p = sample_path(&e, &Point::origin(1), 1.0, 1.0, &mut rng).unwrap();
            let before = p.clone();
            // split [0,1], then [0.5,1], then [0.5,0.75]
            p.refine_bridge(0, &mut rng).unwrap();
            p.refine_bridge(1, &mut rng).unwrap();
            p.refine_bridge(1, &mut rng).unwrap();
            for (t, x) in before.times().iter().zip(before.points()) {
                let k = p.index_of(*t).unwrap();
                assert_eq!(&p.points()[k], x);
            }
            assert_eq!(p.times(), &[0.0, 0.5, 0.625, 0.75, 1.0]);
            (p.points()[1][0], p.points()[2][0])
        });
        // time t marginal is N(0, 2t)
        let half: Vec<f64> = mids.iter().map(|m| m.0).collect();
        let five8: Vec<f64> = mids.iter().map(|m| m.1).collect();
        assert!(ks_test(&half, |v| normal_cdf(v / 1.0)).passes(1e-3));
        assert!(ks_test(&five8, |v| normal_cdf(v / 1.25f64.sqrt())).passes(1e-3));
    }

    #[test]
    fn sphere_refinement_unsupported() {
        let sp = StateSpace::unit_sphere();
        let mut rng = Substreams::new(0).stream(0);
        let mut p = sample_path(&sp, &sp.base_point(), 0.1, 0.05, &mut rng).unwrap();
        assert!(matches!(p.refine_bridge(0, &mut rng), Err(Error::Unsupported(_))));
        let e = StateSpace::euclidean(1);
        let mut q = sample_path(&e, &Point::origin(1), 1.0, 0.5, &mut rng).unwrap();
        assert!(matches!(q.refine_bridge(2, &mut rng), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn skeletons_are_deterministic() {
        let e = StateSpace::euclidean(2);
        let s = Substreams::new(5);
        let build = || {
            let mut p = sample_path_seeded(&e, &Point::origin(2), 1.0, 0.1, &s, 9).unwrap();
            let mut rng = s.named("refine").stream(9);
            p.refine_bridge(3, &mut rng).unwrap();
            p.refine_bridge(0, &mut rng).unwrap();
            p
        };
        let a = build();
        let b = build();
        assert_eq!(a, b);
        assert_eq!(a.lineage.seed, Some(5));
        assert_eq!(a.lineage.refinements.len(), 2);
    }

    #[test]
    fn markov_consistency_after_grid_time() {
        // X_1 - X_{0.5} is independent of X_{0.5} and distributed as N(0, 1)
        let e = StateSpace::euclidean(1);
        let s = Substreams::new(31);
        let pairs: Vec<(f64, f64)> = par_map(20_000, |i| {
            let p = sample_path(&e, &Point::origin(1), 1.0, 0.5, &mut s.stream(i as u64)).unwrap();
            (p.points()[1][0], p.points()[2][0] - p.points()[1][0])
        });
        let inc: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        assert!(ks_test(&inc, normal_cdf).passes(1e-3));
        let given_pos: Vec<f64> = pairs.iter().filter(|p| p.0 > 0.5).map(|p| p.1).collect();
        assert!(ks_test(&given_pos, normal_cdf).passes(1e-3));
    }

    #[test]
    fn constant_path_has_zero_modulus() {
        let e = StateSpace::euclidean(1);
        let mut rng = Substreams::new(0).stream(0);
        let p = sample_path(&e, &Point::origin(1), 1.0, 0.1, &mut rng).unwrap();
        let c = PathSkeleton {
            points: vec![Point::origin(1); p.len()],
            ..p
        };
        assert_eq!(c.holder_modulus(0.3).unwrap(), 0.0);
    }

    #[test]
    fn pruned_modulus_equals_brute_force() {
        let s = Substreams::new(4);
        for (space, step) in [
            (StateSpace::euclidean(1), 0.003),
            (StateSpace::euclidean(3), 0.01),
            (StateSpace::unit_sphere(), 0.004),
        ] {
            for i in 0..5 {
                let p = sample_path(&space, &space.base_point(), 1.0, step, &mut s.stream(i)).unwrap();
                for alpha in [0.2, 0.4, 0.6, 1.0] {
                    let fast = p.holder_modulus_diagnostic(alpha).unwrap();
                    let slow = brute_force_modulus(&p, alpha);
                    assert_eq!(fast, slow, "{:?} alpha={alpha}", space.kind);
                }
            }
        }
    }

    #[test]
    fn modulus_alpha_domain() {
        let e = StateSpace::euclidean(1);
        let mut rng = Substreams::new(0).stream(0);
        let p = sample_path(&e, &Point::origin(1), 1.0, 0.1, &mut rng).unwrap();
        assert!(p.holder_modulus(0.6).is_err());
        assert!(p.holder_modulus_diagnostic(0.6).is_ok());
    }

    fn modulus_p99(alpha: f64, step: f64, n_paths: usize) -> f64 {
        let e = StateSpace::euclidean(1);
        let s = Substreams::new(1234);
        let v: Vec<f64> = par_map(n_paths, |i| {
            let p = sample_path(&e, &Point::origin(1), 1.0, step, &mut s.stream(i as u64)).unwrap();
            p.holder_modulus_diagnostic(alpha).unwrap()
        });
        assert!(v.iter().all(|m| m.is_finite()));
        quantile(&v, 0.99)
    }

    #[test]
    fn holder_modulus_stabilizes_below_one_half() {
        let coarse = modulus_p99(0.4, 1e-2, 600);
        let mid = modulus_p99(0.4, 1e-3, 600);
        let fine = modulus_p99(0.4, 1e-4, 600);
        assert!(fine / coarse < 1.5, "{coarse} {mid} {fine}");
        assert!((fine - mid).abs() < (mid - coarse).abs() + 0.1 * mid, "{coarse} {mid} {fine}");
    }

    #[test]
    fn holder_modulus_grows_above_one_half() {
        let coarse = modulus_p99(0.6, 1e-2, 600);
        let fine = modulus_p99(0.6, 1e-4, 600);
        assert!(fine >= 2.0 * coarse, "{coarse} {fine}");
    }
}
