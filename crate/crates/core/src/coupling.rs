//! Reflection and synchronous couplings of Brownian motions, coupling-time
//! statistics, and the total-variation checks built on them.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::f_k;
use crate::error::{check_time, Error, Result};
use crate::functions::TestFunction;
use crate::numerics::{erf, integrate_pieces};
use crate::path::{bridge_midpoint, uniform_grid, PathSkeleton, SeedLineage};
use crate::report::{BoundReport, Verdict};
use crate::rng::{par_map, Substreams};
use crate::space::{euclidean_kernel, geodesic_step, Point, SpaceKind, StateSpace};
use crate::stats::Accumulator;

/// Coupling time of a run that never couples.
pub const NEVER: f64 = f64::INFINITY;

/// Recursion depth of the first-passage localization inside one grid step.
const MAX_BRIDGE_DEPTH: u32 = 24;
/// Bridge crossing probabilities below this are treated as zero.
const NEGLIGIBLE_CROSSING: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Reflection,
    Synchronous,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Reflection => "reflection",
            Strategy::Synchronous => "synchronous",
        }
    }
}

/// One coupled pair of paths on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    pub strategy: Strategy,
    pub x: Point,
    pub y: Point,
    pub horizon: f64,
    /// Coupling time, [`NEVER`] when the legs had not met by the horizon.
    pub tau: f64,
    pub paths: (PathSkeleton, PathSkeleton),
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(u, v)| u - v).collect()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// First time in `(t0, t0 + delta)` at which a Brownian bridge of the
/// separation coordinate, with generator `d²/ds²`, from `a > 0` to `b` hits 0.
///
/// Without recursion the hit probability is exactly `exp(-a b / delta)` for
/// `b > 0` (and 1 for `b ≤ 0`). The time is localized by sampling bridge
/// midpoints and searching the left half first, so the returned time has the
/// exact first-passage law up to `delta / 2^MAX_BRIDGE_DEPTH`.
fn first_passage<R: Rng + ?Sized>(a: f64, b: f64, t0: f64, delta: f64, depth: u32, rng: &mut R) -> Option<f64> {
    let p = if b <= 0.0 { 1.0 } else { (-a * b / delta).exp() };
    if p < NEGLIGIBLE_CROSSING {
        return None;
    }
    if depth >= MAX_BRIDGE_DEPTH {
        if p >= 1.0 || rng.random::<f64>() < p {
            return Some(t0 + 0.5 * delta);
        }
        return None;
    }
    let half = 0.5 * delta;
    let mid = bridge_midpoint(a, b, delta, rng);
    if let Some(tau) = first_passage(a, mid, t0, half, depth + 1, rng) {
        return Some(tau);
    }
    first_passage(mid, b, t0 + half, half, depth + 1, rng)
}

/// Output of one simulated coupling on a time grid.
struct Simulated {
    tau: f64,
    xs: Vec<Vec<f64>>,
    ys: Vec<Vec<f64>>,
}

fn check_pair(space: &StateSpace, x: &Point, y: &Point, horizon: f64, grid_step: f64) -> Result<()> {
    check_time(horizon)?;
    if !(grid_step > 0.0 && grid_step <= horizon) {
        return Err(Error::OutOfRange(format!("grid step {grid_step} for horizon {horizon}")));
    }
    space.validate(x)?;
    space.validate(y)
}

/// Mirror coupling on `ℝ^d`: reflect across the bisector of `[x, y]` until the
/// separation coordinate first hits zero, then glue.
fn simulate_reflection<R: Rng + ?Sized>(x: &[f64], y: &[f64], times: &[f64], keep: bool, rng: &mut R) -> Simulated {
    let diff = sub(x, y);
    let sep = norm(&diff);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut cur = x.to_vec();
    if keep {
        xs.push(cur.clone());
        ys.push(y.to_vec());
    }
    if sep == 0.0 {
        for w in times.windows(2) {
            let s = (2.0 * (w[1] - w[0])).sqrt();
            for c in cur.iter_mut() {
                *c += s * rng.sample::<f64, _>(StandardNormal);
            }
            if keep {
                xs.push(cur.clone());
                ys.push(cur.clone());
            }
        }
        let last = cur.clone();
        return Simulated {
            tau: 0.0,
            xs: if keep { xs } else { vec![last.clone()] },
            ys: if keep { ys } else { vec![last] },
        };
    }
    let e: Vec<f64> = diff.iter().map(|v| v / sep).collect();
    let m: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    let coord = |p: &[f64]| p.iter().zip(&m).zip(&e).map(|((pi, mi), ei)| (pi - mi) * ei).sum::<f64>();
    let mirror = |p: &[f64], s: f64| -> Vec<f64> { p.iter().zip(&e).map(|(pi, ei)| pi - 2.0 * s * ei).collect() };

    let mut tau = NEVER;
    let mut s_prev = 0.5 * sep;
    let mut y_last = y.to_vec();
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let sd = (2.0 * h).sqrt();
        for c in cur.iter_mut() {
            *c += sd * rng.sample::<f64, _>(StandardNormal);
        }
        if tau == NEVER {
            let s_next = coord(&cur);
            if let Some(t) = first_passage(s_prev, s_next, w[0], h, 0, rng) {
                tau = t;
            }
            s_prev = s_next;
            y_last = if tau == NEVER { mirror(&cur, s_next) } else { cur.clone() };
        } else {
            y_last.clone_from(&cur);
        }
        if keep {
            xs.push(cur.clone());
            ys.push(y_last.clone());
        }
    }
    if !keep {
        xs.push(cur);
        ys.push(y_last);
    }
    Simulated { tau, xs, ys }
}

/// Same driving noise for both legs. On the sphere both legs project the same
/// ambient Gaussian onto their own tangent planes.
fn simulate_synchronous<R: Rng + ?Sized>(
    space: &StateSpace,
    x: &[f64],
    y: &[f64],
    times: &[f64],
    keep: bool,
    rng: &mut R,
) -> Simulated {
    let tau = if x == y { 0.0 } else { NEVER };
    let mut cx = x.to_vec();
    let mut cy = y.to_vec();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    if keep {
        xs.push(cx.clone());
        ys.push(cy.clone());
    }
    for w in times.windows(2) {
        let h = w[1] - w[0];
        match space.kind {
            SpaceKind::Euclidean { .. } => {
                let sd = (2.0 * h).sqrt();
                for (a, b) in cx.iter_mut().zip(cy.iter_mut()) {
                    let z = sd * rng.sample::<f64, _>(StandardNormal);
                    *a += z;
                    *b += z;
                }
            }
            SpaceKind::Sphere2 { radius } => {
                let n = StateSpace::sphere_substeps(h);
                let sd = (2.0 * h / n as f64).sqrt();
                for _ in 0..n {
                    let g = [
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    ];
                    geodesic_step(&mut cx, radius, &g, sd);
                    if tau == 0.0 {
                        cy.clone_from(&cx);
                    } else {
                        geodesic_step(&mut cy, radius, &g, sd);
                    }
                }
            }
        }
        if keep {
            xs.push(cx.clone());
            ys.push(cy.clone());
        }
    }
    if !keep {
        xs.push(cx);
        ys.push(cy);
    }
    Simulated { tau, xs, ys }
}

fn build_run(strategy: Strategy, space: &StateSpace, x: &Point, y: &Point, times: Vec<f64>, sim: Simulated) -> CouplingRun {
    let horizon = *times.last().expect("grid is non-empty");
    let mk = |pts: Vec<Vec<f64>>| PathSkeleton::from_parts(*space, times.clone(), pts.into_iter().map(Point).collect(), SeedLineage::default());
    CouplingRun {
        strategy,
        x: x.clone(),
        y: y.clone(),
        horizon,
        tau: sim.tau,
        paths: (mk(sim.xs), mk(sim.ys)),
    }
}

/// Mirror coupling in Euclidean space with exact in-step crossing detection.
pub fn reflect_couple<R: Rng + ?Sized>(
    space: &StateSpace,
    x: &Point,
    y: &Point,
    horizon: f64,
    grid_step: f64,
    rng: &mut R,
) -> Result<CouplingRun> {
    if !space.is_euclidean() {
        return Err(Error::Unsupported("reflection coupling on the sphere".into()));
    }
    check_pair(space, x, y, horizon, grid_step)?;
    let times = uniform_grid(horizon, grid_step);
    let sim = simulate_reflection(x, y, &times, true, rng);
    Ok(build_run(Strategy::Reflection, space, x, y, times, sim))
}

/// Both legs driven by identical increments.
pub fn synchronous_couple<R: Rng + ?Sized>(
    space: &StateSpace,
    x: &Point,
    y: &Point,
    horizon: f64,
    grid_step: f64,
    rng: &mut R,
) -> Result<CouplingRun> {
    check_pair(space, x, y, horizon, grid_step)?;
    let times = uniform_grid(horizon, grid_step);
    let sim = simulate_synchronous(space, x, y, &times, true, rng);
    Ok(build_run(Strategy::Synchronous, space, x, y, times, sim))
}

/// Coupling times and horizon endpoints of a batch of independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingStats {
    pub strategy: Strategy,
    pub space: StateSpace,
    pub x: Point,
    pub y: Point,
    pub horizon: f64,
    pub taus: Vec<f64>,
    pub end_x: Vec<Vec<f64>>,
    pub end_y: Vec<Vec<f64>>,
}

/// Runs `n_runs` couplings, run `i` on stream `i` of `streams`, keeping only
/// coupling times and horizon endpoints.
#[allow(clippy::too_many_arguments)]
pub fn run_couplings(
    strategy: Strategy,
    space: &StateSpace,
    x: &Point,
    y: &Point,
    horizon: f64,
    grid_step: f64,
    n_runs: usize,
    streams: &Substreams,
) -> Result<CouplingStats> {
    if strategy == Strategy::Reflection && !space.is_euclidean() {
        return Err(Error::Unsupported("reflection coupling on the sphere".into()));
    }
    check_pair(space, x, y, horizon, grid_step)?;
    let times = uniform_grid(horizon, grid_step);
    let out: Vec<Simulated> = par_map(n_runs, |i| {
        let mut rng = streams.stream(i as u64);
        match strategy {
            Strategy::Reflection => simulate_reflection(x, y, &times, false, &mut rng),
            Strategy::Synchronous => simulate_synchronous(space, x, y, &times, false, &mut rng),
        }
    });
    let mut taus = Vec::with_capacity(n_runs);
    let mut end_x = Vec::with_capacity(n_runs);
    let mut end_y = Vec::with_capacity(n_runs);
    for mut s in out {
        taus.push(s.tau);
        end_x.push(s.xs.pop().expect("endpoint"));
        end_y.push(s.ys.pop().expect("endpoint"));
    }
    Ok(CouplingStats {
        strategy,
        space: *space,
        x: x.clone(),
        y: y.clone(),
        horizon,
        taus,
        end_x,
        end_y,
    })
}

impl CouplingStats {
    pub fn n_runs(&self) -> usize {
        self.taus.len()
    }

    pub fn separation(&self) -> f64 {
        self.space.distance_unchecked(&self.x, &self.y)
    }

    /// `(P̂{τ > t}, stderr)` for `t ≤ horizon`.
    pub fn survival(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::OutOfRange(format!("t = {t} beyond horizon {}", self.horizon)));
        }
        let n = self.taus.len() as f64;
        let p = self.taus.iter().filter(|&&tau| tau > t).count() as f64 / n;
        Ok((p, (p * (1.0 - p) / n).sqrt()))
    }
}

/// Total variation `sup_B |μ₁(B) − μ₂(B)|` between `N(x, 2tI)` and `N(y, 2tI)`.
pub fn total_variation_gaussian(dim: usize, separation: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if dim == 0 || !(separation >= 0.0) {
        return Err(Error::OutOfRange(format!("dimension {dim}, separation {separation}")));
    }
    Ok(erf(separation / (4.0 * t.sqrt())))
}

/// `½ ∫ |ρ₁ − ρ₂|` for the same pair of Gaussians, by quadrature along the
/// separation axis (orthogonal directions cancel).
pub fn half_l1_gaussian(separation: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let w = 40.0 * (2.0 * t).sqrt();
    Ok(0.5
        * integrate_pieces(
            |u: f64| (euclidean_kernel(1, t, u * u) - euclidean_kernel(1, t, (u - separation) * (u - separation))).abs(),
            -w,
            separation + w,
            &[0.5 * separation],
            1e-15,
            1e-13,
        ))
}

/// One row of the maximality table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalityRow {
    pub strategy: Strategy,
    pub d: usize,
    pub separation: f64,
    pub t: f64,
    pub p_tau_gt_t: f64,
    pub stderr: f64,
    /// Closed-form `sup_B` total variation.
    pub tv_sup_b: f64,
    /// Quadrature `½ ∫|ρ₁ − ρ₂|`; equal to `tv_sup_b` for densities.
    pub half_l1: f64,
    /// Which of `P = δ`, `P = ½δ`, `P = 2δ` (δ in the `sup_B` convention) hold within 3 stderr.
    pub identities: Vec<String>,
    /// `½ F_K(t) d(x, y)`.
    pub rate_bound: f64,
    pub verdict: Verdict,
}

pub const MAXIMALITY_CSV_HEADER: &str = "strategy,d,separation,t,p_tau_gt_t,stderr,tv_supB,half_L1,verdict";

impl MaximalityRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.strategy.as_str(),
            self.d,
            self.separation,
            self.t,
            self.p_tau_gt_t,
            self.stderr,
            self.tv_sup_b,
            self.half_l1,
            self.verdict.as_str()
        )
    }
}

pub fn write_maximality_csv<W: Write>(rows: &[MaximalityRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "{MAXIMALITY_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalityCheck {
    pub rows: Vec<MaximalityRow>,
    pub reports: Vec<BoundReport>,
}

/// Compares `P̂{τ > t}` with the total variation of the time-`t` marginals.
///
/// Every `t` gets three reports: the one-sided coupling inequality in the
/// `½ sup_B` and `sup_B` conventions, and the rate bound `P ≤ ½ F_K(t) d`.
/// The identity columns record which equality the strategy satisfies.
pub fn check_maximality(stats: &CouplingStats, t_grid: &[f64], allowance: f64) -> Result<MaximalityCheck> {
    if stats.n_runs() < 10_000 {
        return Err(Error::InsufficientSamples {
            needed: 10_000,
            got: stats.n_runs(),
        });
    }
    if !stats.space.is_euclidean() {
        return Err(Error::Unsupported("closed-form total variation on the sphere".into()));
    }
    let d = stats.space.dimension();
    let sep = stats.separation();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &t in t_grid {
        let (p, se) = stats.survival(t)?;
        let tv = total_variation_gaussian(d, sep, t)?;
        let half_l1 = half_l1_gaussian(sep, t)?;
        let slack = 3.0 * se + allowance;
        let mut identities = Vec::new();
        for (label, target) in [("sup_B", tv), ("half_sup_B", 0.5 * tv), ("l1", 2.0 * tv)] {
            if (p - target).abs() <= slack {
                identities.push(label.to_string());
            }
        }
        let base = |name: &str, theoretical: f64, empirical: f64| {
            BoundReport::check(name, theoretical, empirical, se, 0.0)
                .param("strategy", stats.strategy.as_str())
                .param("d", d)
                .param("separation", sep)
                .param("t", t)
                .with_witness(stats.x.clone(), stats.y.clone())
        };
        let half = base("coupling_tail_lower_half_sup_b", p, 0.5 * tv).param("convention", "half_sup_B");
        let full = base("coupling_tail_lower_sup_b", p, tv).param("convention", "sup_B");
        let rate_bound = 0.5 * f_k(0.0, t)? * sep;
        let rate = base("coupling_tail_rate", rate_bound, p).param("K", 0.0);
        let verdict = half.verdict;
        reports.extend([half, full, rate]);
        rows.push(MaximalityRow {
            strategy: stats.strategy,
            d,
            separation: sep,
            t,
            p_tau_gt_t: p,
            stderr: se,
            tv_sup_b: tv,
            half_l1,
            identities,
            rate_bound,
            verdict,
        });
    }
    Ok(MaximalityCheck { rows, reports })
}

/// Checks `|E f(X_t) − E f(Y_t)| ≤ F(t) d ‖f‖` and its α-versions
/// `F(t)^α 2^{1−α} d^α ‖f‖` with `F(t) := 2 P̂{τ > t} / d(x, y)`.
pub fn check_equivalence_ladder(
    stats: &CouplingStats,
    t: f64,
    alphas: &[f64],
    family: &[TestFunction],
) -> Result<Vec<BoundReport>> {
    if (t - stats.horizon).abs() > 1e-12 * stats.horizon {
        return Err(Error::OutOfRange(format!(
            "ladder needs endpoints at t = {t}, runs end at {}",
            stats.horizon
        )));
    }
    let dist = stats.separation();
    let (p, se_p) = stats.survival(t)?;
    let mut reports = Vec::new();
    for (k, f) in family.iter().enumerate() {
        let mut acc = Accumulator::default();
        for (a, b) in stats.end_x.iter().zip(&stats.end_y) {
            acc.push(f.eval_on(&stats.space, a) - f.eval_on(&stats.space, b));
        }
        let diff = acc.mean().abs();
        let norm_f = f.sup_norm();
        for &alpha in std::iter::once(&1.0).chain(alphas.iter()) {
            let (cap, se) = if dist == 0.0 {
                (0.0, acc.stderr())
            } else {
                let big_f = 2.0 * p / dist;
                let cap = big_f.powf(alpha) * 2f64.powf(1.0 - alpha) * dist.powf(alpha) * norm_f;
                // d cap / d p at the estimate, for error propagation
                let dcap = if p > 0.0 { alpha * cap / p } else { 0.0 };
                (cap, (acc.stderr().powi(2) + (dcap * se_p).powi(2)).sqrt())
            };
            reports.push(
                BoundReport::check("coupling_ladder", cap, diff, se, 0.0)
                    .param("alpha", alpha)
                    .param("t", t)
                    .param("function_index", k)
                    .param("function", serde_json::to_value(f).expect("serializable"))
                    .param("p_tau_gt_t", p)
                    .with_witness(stats.x.clone(), stats.y.clone()),
            );
        }
    }
    Ok(reports)
}
