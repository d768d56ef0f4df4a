//! Monte Carlo Feynman-Kac estimates of `e^{-tH_V}Ψ(x) = E^x[exp(-∫₀^t V(ω_s) ds) Ψ(ω_t)]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::functions::TestFunction;
use crate::kato::{kato_integral_terms, KatoCertificate, KatoMethod, KatoWeight};
use crate::path::{bridge_midpoint, uniform_grid};
use crate::potential::{Potential, Singularity, Term};
use crate::rng::{par_fold, Substreams};
use crate::space::{Point, StateSpace};
use crate::stats::Accumulator;

/// How `V` is capped along paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapPolicy {
    None,
    /// `V` clamped to `[-1/ε, 1/ε]`.
    Fixed { epsilon: f64 },
    /// ε halved from `epsilon0` until the estimate moves by at most half a standard error.
    Adaptive { epsilon0: f64, max_halvings: usize },
}

impl Default for CapPolicy {
    fn default() -> Self {
        CapPolicy::Adaptive {
            epsilon0: 0.1,
            max_halvings: 14,
        }
    }
}

/// Trapezoid action integrator on the path skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionIntegrator {
    pub grid_step: f64,
    /// An interval is bisected by a bridge sample while the nearer endpoint is
    /// within `distance_factor · √(2δ)` of a singularity.
    pub distance_factor: f64,
    pub max_depth: usize,
    pub cap: CapPolicy,
}

impl Default for ActionIntegrator {
    fn default() -> Self {
        Self {
            grid_step: 0.01,
            distance_factor: 4.0,
            max_depth: 30,
            cap: CapPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub integrator: ActionIntegrator,
}

impl FkConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            integrator: ActionIntegrator::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupEstimate {
    pub x: Point,
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub epsilon: Option<f64>,
    pub grid_step: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SemigroupEstimate {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("estimate is serializable")
    }
}

struct PathContext<'a> {
    space: StateSpace,
    terms: &'a [Term],
    singularities: Vec<Singularity>,
    clamps: &'a [(f64, f64)],
    factor: f64,
    max_depth: usize,
}

impl PathContext<'_> {
    fn v(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    fn rho(&self, x: &[f64]) -> f64 {
        self.singularities.iter().map(|s| s.distance(x)).fold(f64::INFINITY, f64::min)
    }

    fn trapezoid(&self, v0: f64, v1: f64, delta: f64, out: &mut [f64]) {
        for (acc, &(lo, hi)) in out.iter_mut().zip(self.clamps) {
            *acc += 0.5 * delta * (v0.clamp(lo, hi) + v1.clamp(lo, hi));
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn segment(
        &self,
        x0: &[f64],
        (v0, r0): (f64, f64),
        x1: &[f64],
        (v1, r1): (f64, f64),
        delta: f64,
        depth: usize,
        rng: &mut ChaCha8Rng,
        out: &mut [f64],
    ) {
        if depth < self.max_depth && r0.min(r1) < self.factor * (2.0 * delta).sqrt() {
            let mid: Vec<f64> = x0.iter().zip(x1).map(|(&a, &b)| bridge_midpoint(a, b, delta, rng)).collect();
            let vm = (self.v(&mid), self.rho(&mid));
            self.segment(x0, (v0, r0), &mid, vm, 0.5 * delta, depth + 1, rng, out);
            self.segment(&mid, vm, x1, (v1, r1), 0.5 * delta, depth + 1, rng, out);
        } else {
            self.trapezoid(v0, v1, delta, out);
        }
    }

    /// Samples one path from `x`, filling `actions` (one per clamp) and returning `ω_t`.
    fn run(&self, x: &[f64], times: &[f64], rng: &mut ChaCha8Rng, actions: &mut [f64]) -> Vec<f64> {
        actions.iter_mut().for_each(|a| *a = 0.0);
        let mut cur = x.to_vec();
        let mut vr = (self.v(&cur), self.rho(&cur));
        let mut next = cur.clone();
        for w in times.windows(2) {
            let delta = w[1] - w[0];
            next.copy_from_slice(&cur);
            if self.space.is_euclidean() {
                let sd = (2.0 * delta).sqrt();
                for c in next.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *c += sd * z;
                }
            } else {
                self.space.step_in_place(delta, &mut next, rng);
            }
            let vr1 = (self.v(&next), self.rho(&next));
            self.segment(&cur, vr, &next, vr1, delta, 0, rng, actions);
            std::mem::swap(&mut cur, &mut next);
            vr = vr1;
        }
        cur
    }
}

/// Per-clamp accumulators of `exp(-action) Ψ(ω_t)` over `n_paths` paths.
#[allow(clippy::too_many_arguments)]
fn simulate(
    space: StateSpace,
    terms: &[Term],
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &Point,
    t: f64,
    cfg: &FkConfig,
    clamps: &[(f64, f64)],
    singular: bool,
) -> Vec<Accumulator> {
    let ctx = PathContext {
        space,
        terms,
        singularities: if singular {
            terms
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
        } else {
            Vec::new()
        },
        clamps,
        factor: cfg.integrator.distance_factor,
        max_depth: cfg.integrator.max_depth,
    };
    let times = uniform_grid(t, cfg.integrator.grid_step);
    let streams = Substreams::new(cfg.seed).named("feynman_kac");
    let levels = clamps.len();
    par_fold(
        cfg.n_paths,
        || vec![Accumulator::default(); levels],
        |accs, i| {
            let mut rng = streams.stream(i as u64);
            let mut actions = vec![0.0; levels];
            let end = ctx.run(x, &times, &mut rng, &mut actions);
            let p = psi(&end);
            for (acc, a) in accs.iter_mut().zip(&actions) {
                acc.push((-a).exp() * p);
            }
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x = x.merge(y);
            }
            a
        },
    )
}

fn check_inputs(v: &Potential, x: &Point, t: f64, n_paths: usize) -> Result<()> {
    check_time(t)?;
    v.space.validate(x)?;
    if n_paths < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: n_paths,
        });
    }
    if let Some(bad) = v.negative_part_terms().iter().find(|term| !term.is_bounded() && !term.is_singular()) {
        return Err(Error::NotKato(format!(
            "negative part {bad:?} is unbounded at infinity, so e^{{-tH_V}} is not given by a convergent path integral"
        )));
    }
    Ok(())
}

/// `sup_x E^x exp(∫₀^t V⁻(ω_s) ds)` bound from the Kato integral of the negative-part majorant.
fn negative_part_c_exp(v: &Potential, t: f64) -> Result<f64> {
    let neg = v.negative_part_terms();
    if neg.is_empty() {
        return Ok(1.0);
    }
    let seeds = v.sup_search_seeds();
    let kato0 = kato_integral_terms(&v.space, &neg, &seeds, 0.0, t, KatoMethod::Auto, KatoWeight::Kato)?;
    Ok(khashminskii_terms(&v.space, &neg, &seeds, t, &kato0)?.bound_on_c_exp)
}

/// Feynman-Kac estimate with a closed-form `Ψ` of sup norm `psi_sup`.
pub fn fk_evaluate_fn(
    v: &Potential,
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    psi_sup: f64,
    x: &Point,
    t: f64,
    cfg: &FkConfig,
) -> Result<SemigroupEstimate> {
    check_inputs(v, x, t, cfg.n_paths)?;
    let terms = v.terms();
    let singular = terms.iter().any(Term::is_singular);
    let caps: Vec<Option<f64>> = match cfg.integrator.cap {
        CapPolicy::None => vec![None],
        CapPolicy::Fixed { epsilon } => vec![Some(epsilon)],
        CapPolicy::Adaptive { epsilon0, max_halvings } => {
            (0..=max_halvings).map(|k| Some(epsilon0 / 2f64.powi(k as i32))).collect()
        }
    };
    let clamps: Vec<(f64, f64)> = caps
        .iter()
        .map(|c| match c {
            Some(e) => (-1.0 / e, 1.0 / e),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        })
        .collect();
    let accs = simulate(v.space, &terms, psi, x, t, cfg, &clamps, singular);

    let mut warnings = Vec::new();
    let mut chosen = accs.len() - 1;
    if accs.len() > 1 {
        match (0..accs.len() - 1).find(|&k| (accs[k].mean() - accs[k + 1].mean()).abs() <= 0.5 * accs[k + 1].stderr()) {
            Some(k) => chosen = k + 1,
            None => warnings.push(format!(
                "cap did not stabilize after {} halvings",
                accs.len() - 1
            )),
        }
    }
    let acc = accs[chosen];
    let mut est = SemigroupEstimate {
        x: x.clone(),
        t,
        value: acc.mean(),
        stderr: acc.stderr(),
        n_paths: cfg.n_paths,
        epsilon: caps[chosen],
        grid_step: cfg.integrator.grid_step,
        seed: cfg.seed,
        warnings,
    };
    if !est.value.is_finite() {
        return Err(Error::Divergent(format!("non-finite Feynman-Kac mean at x = {:?}", x.0)));
    }
    let ceiling = negative_part_c_exp(v, t)? * psi_sup;
    if est.value.abs() - 3.0 * est.stderr > ceiling {
        est.warnings.push(format!(
            "integration bias: |value| - 3 stderr = {} exceeds the Khashminskii ceiling {ceiling}",
            est.value.abs() - 3.0 * est.stderr
        ));
    }
    Ok(est)
}

pub fn fk_evaluate(v: &Potential, psi: &TestFunction, x: &Point, t: f64, cfg: &FkConfig) -> Result<SemigroupEstimate> {
    let space = v.space;
    let f = |y: &[f64]| psi.eval_on(&space, y);
    fk_evaluate_fn(v, &f, psi.sup_norm(), x, t, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KhashminskiiCertificate {
    pub r: f64,
    /// Kato integral at `α = 0` over the full horizon.
    pub kappa: f64,
    pub bound_on_c_exp: f64,
    /// Number of equal pieces of `[0, r]`; 1 when `kappa < 1`.
    pub subdivisions: usize,
    pub kappa_per_interval: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_v: Option<f64>,
    /// `2 e^{C_V r}` for a user-supplied `C_V`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_style_bound: Option<f64>,
}

impl KhashminskiiCertificate {
    pub fn with_splitting_constant(mut self, c_v: f64) -> Self {
        self.c_v = Some(c_v);
        self.paper_style_bound = Some(2.0 * (c_v * self.r).exp());
        self
    }
}

const MAX_SUBDIVISIONS: usize = 1 << 20;

fn khashminskii_terms(
    space: &StateSpace,
    terms: &[Term],
    seeds: &[Vec<f64>],
    r: f64,
    kato0: &KatoCertificate,
) -> Result<KhashminskiiCertificate> {
    check_time(r)?;
    if kato0.alpha != 0.0 || (kato0.t - r).abs() > 1e-12 * r {
        return Err(Error::OutOfRange(format!(
            "need an α = 0 certificate at horizon {r}, got α = {} at t = {}",
            kato0.alpha, kato0.t
        )));
    }
    if !kato0.is_finite() {
        return Err(Error::NotKato("Kato integral is infinite".into()));
    }
    let kappa = kato0.certified();
    let mut cert = KhashminskiiCertificate {
        r,
        kappa,
        bound_on_c_exp: 0.0,
        subdivisions: 1,
        kappa_per_interval: kappa,
        c_v: None,
        paper_style_bound: None,
    };
    if kappa < 1.0 {
        cert.bound_on_c_exp = 1.0 / (1.0 - kappa);
        return Ok(cert);
    }
    let kappa_at = |k: usize| -> Result<f64> {
        Ok(kato_integral_terms(space, terms, seeds, 0.0, r / k as f64, KatoMethod::Auto, KatoWeight::Kato)?.certified())
    };
    // smallest k with κ(r/k) < ½: double, then bisect
    let mut hi = 2;
    while kappa_at(hi)? >= 0.5 {
        hi *= 2;
        if hi > MAX_SUBDIVISIONS {
            return Err(Error::NotKato(format!("κ(r/k) ≥ ½ for k up to {MAX_SUBDIVISIONS}")));
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if kappa_at(mid)? < 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let kk = kappa_at(hi)?;
    cert.subdivisions = hi;
    cert.kappa_per_interval = kk;
    cert.bound_on_c_exp = (1.0 / (1.0 - kk)).powi(hi as i32);
    Ok(cert)
}

/// Bound on `C_exp(V, r) = sup_x E^x exp(∫₀^r |V(ω_s)| ds)` from an α = 0 Kato certificate.
pub fn khashminskii_certify(v: &Potential, r: f64, kato0: &KatoCertificate) -> Result<KhashminskiiCertificate> {
    khashminskii_terms(&v.space, &v.terms(), &v.sup_search_seeds(), r, kato0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub n: f64,
    pub m: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationLadder {
    pub rows: Vec<LadderRow>,
    /// Estimates nondecreasing in `n` at fixed `m`, within 3 standard errors.
    pub monotone_in_n: bool,
    /// Estimates nonincreasing in `m` at fixed `n`, within 3 standard errors.
    pub monotone_in_m: bool,
    pub bias_flag: bool,
}

/// Estimates with `V_{n,m} = min(m, max(V, -n))` on common paths.
pub fn truncation_ladder(
    v: &Potential,
    psi: &TestFunction,
    x: &Point,
    t: f64,
    levels: &[(f64, f64)],
    cfg: &FkConfig,
) -> Result<TruncationLadder> {
    check_inputs(v, x, t, cfg.n_paths)?;
    if !psi.is_nonnegative() {
        return Err(Error::HypothesisViolated("truncation ladder needs Ψ ≥ 0".into()));
    }
    if levels.is_empty() || levels.iter().any(|&(n, m)| !(n >= 0.0) || !(m >= 0.0)) {
        return Err(Error::OutOfRange("levels must be non-empty pairs of non-negative caps".into()));
    }
    let clamps: Vec<(f64, f64)> = levels.iter().map(|&(n, m)| (-n, m)).collect();
    let terms = v.terms();
    let singular = terms.iter().any(Term::is_singular);
    let space = v.space;
    let f = |y: &[f64]| psi.eval_on(&space, y);
    let accs = simulate(space, &terms, &f, x, t, cfg, &clamps, singular);
    let rows: Vec<LadderRow> = levels
        .iter()
        .zip(&accs)
        .map(|(&(n, m), a)| LadderRow {
            n,
            m,
            value: a.mean(),
            stderr: a.stderr(),
        })
        .collect();
    let mut monotone_in_n = true;
    let mut monotone_in_m = true;
    for a in &rows {
        for b in &rows {
            let slack = 3.0 * (a.stderr + b.stderr);
            if a.m == b.m && a.n < b.n && b.value < a.value - slack {
                monotone_in_n = false;
            }
            if a.n == b.n && a.m < b.m && b.value > a.value + slack {
                monotone_in_m = false;
            }
        }
    }
    Ok(TruncationLadder {
        rows,
        monotone_in_n,
        monotone_in_m,
        bias_flag: !(monotone_in_n && monotone_in_m),
    })
}
