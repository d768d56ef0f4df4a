//! The α-Kato functional `sup_x ∫₀^t s^{-α/2} ∫ p(s,x,y) |V(y)| dy ds` and its certificates.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::numerics::{integrate, log_log_slope};
use crate::potential::{Potential, Term};
use crate::rng::{par_fold, Substreams};
use crate::space::{Point, StateSpace};
use crate::stats::Accumulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KatoMethod {
    /// Closed form when available, quadrature otherwise.
    Auto,
    ClosedForm,
    Quadrature,
    MonteCarlo { n_samples: usize, seed: u64 },
}

/// Time weight in front of the smoothed potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KatoWeight {
    /// `s^{-α/2}`.
    Kato,
    /// `F_K(s)^α`, the coupling-rate weight of the smoothing constant.
    CouplingRate { k: f64 },
}

impl KatoWeight {
    /// The weight divided by `s^{-α/2}`; bounded and continuous on `[0, ∞)`.
    fn relative(&self, alpha: f64, s: f64) -> f64 {
        match *self {
            KatoWeight::Kato => 1.0,
            KatoWeight::CouplingRate { k } => {
                let r = if k == 0.0 || s == 0.0 {
                    0.5
                } else {
                    s * k / (2.0 * k * s).exp_m1()
                };
                r.powf(alpha / 2.0)
            }
        }
    }

    /// Factor by which the weight scales the closed forms, when it is constant.
    fn closed_form_factor(&self, alpha: f64) -> Option<f64> {
        match *self {
            KatoWeight::Kato => Some(1.0),
            KatoWeight::CouplingRate { k } if k == 0.0 => Some(0.5f64.powf(alpha / 2.0)),
            KatoWeight::CouplingRate { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoCertificate {
    pub alpha: f64,
    pub t: f64,
    /// Value at `sup_witness`; a lower estimate of the supremum when the
    /// witness comes from a numerical search.
    pub bound: f64,
    pub method: MethodTag,
    pub weight: KatoWeight,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_witness: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    /// Sum of per-term suprema, an upper bound for the supremum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
    #[serde(default)]
    pub divergent: bool,
    /// Fitted exponent of the truncated integral `∫_ε^t` against `ε` when divergent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extended_from: Option<f64>,
}

impl KatoCertificate {
    /// Certified value: the upper bound when present, otherwise `bound`.
    pub fn certified(&self) -> f64 {
        self.upper_bound.unwrap_or(self.bound)
    }

    pub fn is_finite(&self) -> bool {
        !self.divergent && self.bound.is_finite()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificate is serializable")
    }

    fn new(alpha: f64, t: f64, bound: f64, method: MethodTag, weight: KatoWeight) -> Self {
        Self {
            alpha,
            t,
            bound,
            method,
            weight,
            sup_witness: None,
            stderr: None,
            upper_bound: None,
            divergent: false,
            blowup_exponent: None,
            extended_from: None,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..2.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha = {alpha}, expected 0 ≤ α < 2")));
    }
    Ok(())
}

/// `∫₀^t s^{-(α+1)/2} ds = 2 t^{(1-α)/2} / (1-α)` times the singular coefficient.
fn singular_peak(strength: f64, kappa: f64, alpha: f64, t: f64) -> f64 {
    strength.abs() / (PI * kappa).sqrt() * 2.0 * t.powf((1.0 - alpha) / 2.0) / (1.0 - alpha)
}

fn constant_value(c: f64, alpha: f64, t: f64) -> f64 {
    c.abs() * t.powf(1.0 - alpha / 2.0) / (1.0 - alpha / 2.0)
}

/// Peak value of a single term given in closed form, when one exists.
fn term_closed_form(term: &Term, alpha: f64, t: f64, weight: KatoWeight) -> Option<f64> {
    let w = weight.closed_form_factor(alpha)?;
    match term {
        Term::Constant(c) => Some(w * constant_value(*c, alpha, t)),
        Term::Point { strength, .. } if alpha < 1.0 => Some(w * singular_peak(*strength, 1.0, alpha, t)),
        Term::Pair { strength, .. } if alpha < 1.0 => Some(w * singular_peak(*strength, 2.0, alpha, t)),
        Term::Harmonic { coefficient } if *coefficient == 0.0 => Some(0.0),
        _ => None,
    }
}

const QUAD_ABS: f64 = 1e-14;
const QUAD_REL: f64 = 1e-11;

/// `∫₀^t s^{-α/2} m(s) ∫ p(s,x,y)|term(y)| dy ds` at a fixed `x` by quadrature.
///
/// On `[0, t/100]` the substitution `s = s₀ u^p` with `p = 2/(1-α)` for
/// singular terms (`p = 2` otherwise) absorbs the endpoint singularity exactly.
pub fn term_integral_at(space: &StateSpace, term: &Term, x: &[f64], alpha: f64, t: f64, weight: KatoWeight) -> f64 {
    if term.sup_abs() == 0.0 {
        return 0.0;
    }
    if matches!(term, Term::Harmonic { .. }) {
        return f64::INFINITY;
    }
    if term.is_singular() && alpha >= 1.0 {
        return f64::INFINITY;
    }
    let s0 = t / 100.0;
    let head = if term.is_singular() {
        let p = 2.0 / (1.0 - alpha);
        let pref = p * s0.powf((1.0 - alpha) / 2.0);
        integrate(
            |u: f64| {
                let s = s0 * u.powf(p);
                if s == 0.0 {
                    return pref * weight.relative(alpha, 0.0) * term.sqrt_s_smoothed_abs(space, f64::MIN_POSITIVE, x);
                }
                pref * weight.relative(alpha, s) * term.sqrt_s_smoothed_abs(space, s, x)
            },
            0.0,
            1.0,
            QUAD_ABS,
            QUAD_REL,
        )
    } else {
        let pref = 2.0 * s0.powf(1.0 - alpha / 2.0);
        integrate(
            |u: f64| {
                let s = s0 * u * u;
                if s == 0.0 {
                    return 0.0;
                }
                pref * u.powf(1.0 - alpha) * weight.relative(alpha, s) * term.smoothed_abs(space, s, x)
            },
            0.0,
            1.0,
            QUAD_ABS,
            QUAD_REL,
        )
    };
    let tail = integrate(
        |s: f64| s.powf(-alpha / 2.0) * weight.relative(alpha, s) * term.smoothed_abs(space, s, x),
        s0,
        t,
        QUAD_ABS,
        QUAD_REL,
    );
    head + tail
}

fn terms_integral_at(space: &StateSpace, terms: &[Term], x: &[f64], alpha: f64, t: f64, weight: KatoWeight) -> f64 {
    terms.iter().map(|term| term_integral_at(space, term, x, alpha, t, weight)).sum()
}

/// Point where a single term attains its smoothed maximum, or `None` when it is constant in `x`.
fn term_peak(term: &Term, dim: usize) -> Option<Vec<f64>> {
    match term {
        Term::Point { block, center, .. } => {
            let mut x = vec![0.0; dim];
            x[3 * block..3 * block + 3].copy_from_slice(center);
            Some(x)
        }
        Term::Pair { .. } => Some(vec![0.0; dim]),
        Term::Bump { center, .. } => Some(center.clone()),
        _ => None,
    }
}

/// Compass search maximizing `f` from `start`.
fn pattern_search(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step0: f64, step_min: f64) -> (Vec<f64>, f64) {
    let mut x = start.to_vec();
    let mut fx = f(&x);
    let mut step = step0;
    let mut trial = x.clone();
    while step > step_min {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[i] += dir * step;
                let ft = f(&trial);
                if ft > fx {
                    x.copy_from_slice(&trial);
                    fx = ft;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Evaluates the Kato functional of `v` with the `s^{-α/2}` weight.
pub fn kato_integral(v: &Potential, alpha: f64, t: f64, method: KatoMethod) -> Result<KatoCertificate> {
    kato_integral_weighted(v, alpha, t, method, KatoWeight::Kato)
}

pub fn kato_integral_weighted(
    v: &Potential,
    alpha: f64,
    t: f64,
    method: KatoMethod,
    weight: KatoWeight,
) -> Result<KatoCertificate> {
    kato_integral_terms(&v.space, &v.terms(), &v.sup_search_seeds(), alpha, t, method, weight)
}

/// Kato functional of the majorant `Σ |term|` of a term list.
pub fn kato_integral_terms(
    space: &StateSpace,
    terms: &[Term],
    seeds: &[Vec<f64>],
    alpha: f64,
    t: f64,
    method: KatoMethod,
    weight: KatoWeight,
) -> Result<KatoCertificate> {
    check_time(t)?;
    check_alpha(alpha)?;
    let dim = space.ambient_dimension();
    let live: Vec<&Term> = terms.iter().filter(|term| term.sup_abs() != 0.0).collect();
    let tag = match method {
        KatoMethod::MonteCarlo { .. } => MethodTag::MonteCarlo,
        KatoMethod::Quadrature => MethodTag::Quadrature,
        _ => MethodTag::ClosedForm,
    };

    if live.iter().any(|term| matches!(term, Term::Harmonic { .. })) {
        let mut c = KatoCertificate::new(alpha, t, f64::INFINITY, tag, weight);
        c.divergent = true;
        return Ok(c);
    }
    if alpha >= 1.0 {
        if let Some(term) = live.iter().find(|term| term.is_singular()) {
            return Ok(divergent_certificate(space, term, dim, alpha, t, tag, weight));
        }
    }

    let singular = live.iter().filter(|term| term.is_singular()).count();
    let closed: Option<f64> = if singular <= 1 && live.iter().all(|term| term.is_singular() || matches!(term, Term::Constant(_))) {
        live.iter()
            .map(|term| term_closed_form(term, alpha, t, weight))
            .sum::<Option<f64>>()
    } else {
        None
    };

    let per_term_sup = |term: &Term| -> f64 {
        term_closed_form(term, alpha, t, weight).unwrap_or_else(|| {
            let x = term_peak(term, dim).unwrap_or_else(|| space.base_point().0);
            term_integral_at(space, term, &x, alpha, t, weight)
        })
    };

    let (bound, witness, upper) = match (method, closed) {
        (KatoMethod::ClosedForm, None) => {
            return Err(Error::Unsupported(
                "closed form exists only for constants plus at most one Coulomb-type term".into(),
            ))
        }
        (KatoMethod::Auto | KatoMethod::ClosedForm, Some(b)) => (b, single_peak(&live, dim, space), None),
        _ => {
            if live.len() <= 1 || singular <= 1 && live.iter().all(|term| term.is_singular() || matches!(term, Term::Constant(_))) {
                let x = single_peak(&live, dim, space).unwrap_or_else(|| space.base_point());
                let b = terms_integral_at(space, terms, &x, alpha, t, weight);
                (b, Some(x), None)
            } else {
                let upper: f64 = live.iter().map(|term| per_term_sup(term)).sum();
                let f = |x: &[f64]| terms_integral_at(space, terms, x, alpha, t, weight);
                let mut best = (space.base_point().0, f64::NEG_INFINITY);
                let step0 = 0.5 * t.sqrt().min(1.0);
                for seed in seeds {
                    let found = if space.is_euclidean() {
                        pattern_search(&f, seed, step0, 1e-4 * step0)
                    } else {
                        let v = f(seed);
                        (seed.clone(), v)
                    };
                    if found.1 > best.1 {
                        best = found;
                    }
                }
                (best.1, Some(Point::new(best.0)), Some(upper.max(best.1)))
            }
        }
    };

    let mut cert = KatoCertificate::new(alpha, t, bound, tag, weight);
    if closed.is_some() && matches!(method, KatoMethod::Auto) {
        cert.method = MethodTag::ClosedForm;
    } else if matches!(method, KatoMethod::Auto) {
        cert.method = MethodTag::Quadrature;
    }
    cert.sup_witness = witness;
    cert.upper_bound = upper;

    if let KatoMethod::MonteCarlo { n_samples, seed } = method {
        let x = cert.sup_witness.clone().unwrap_or_else(|| space.base_point());
        let (mean, se) = monte_carlo_at(space, &live, &x, alpha, t, weight, n_samples, seed)?;
        cert.bound = mean;
        cert.stderr = Some(se);
        cert.sup_witness = Some(x);
    }
    Ok(cert)
}

fn single_peak(live: &[&Term], dim: usize, space: &StateSpace) -> Option<Point> {
    live.iter()
        .find_map(|term| term_peak(term, dim))
        .map(Point::new)
        .or_else(|| Some(space.base_point()))
}

fn divergent_certificate(
    space: &StateSpace,
    term: &Term,
    dim: usize,
    alpha: f64,
    t: f64,
    tag: MethodTag,
    weight: KatoWeight,
) -> KatoCertificate {
    let x = term_peak(term, dim).unwrap_or_else(|| space.base_point().0);
    let eps: Vec<f64> = (3..=8).map(|k| t * 10f64.powi(-k)).collect();
    let vals: Vec<f64> = eps
        .iter()
        .map(|&e| {
            integrate(
                |s: f64| s.powf(-alpha / 2.0) * weight.relative(alpha, s) * term.smoothed_abs(space, s, &x),
                e,
                t,
                QUAD_ABS,
                1e-9,
            )
        })
        .collect();
    let mut c = KatoCertificate::new(alpha, t, f64::INFINITY, tag, weight);
    c.divergent = true;
    c.blowup_exponent = Some(log_log_slope(&eps, &vals));
    c.sup_witness = Some(Point::new(x));
    c
}

/// Path-form estimate `E ∫₀^t s^{-α/2} m(s) Σ|term(X_s)| ds` at `x`.
///
/// Times are drawn from the density `∝ s^{-(α+1)/2}` when a singular term is
/// present and `∝ s^{-α/2}` otherwise; both give finite variance.
#[allow(clippy::too_many_arguments)]
fn monte_carlo_at(
    space: &StateSpace,
    live: &[&Term],
    x: &Point,
    alpha: f64,
    t: f64,
    weight: KatoWeight,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: n_samples,
        });
    }
    let singular = live.iter().any(|term| term.is_singular());
    // density c s^{-γ} on [0, t], γ < 1
    let gamma = if singular { (alpha + 1.0) / 2.0 } else { alpha / 2.0 };
    let streams = Substreams::new(seed).named("kato_mc");
    let acc = par_fold(
        n_samples,
        Accumulator::default,
        |acc, i| {
            let mut rng = streams.stream(i as u64);
            let u: f64 = rng.random::<f64>();
            let s = t * (1.0 - u).powf(1.0 / (1.0 - gamma));
            if s <= 0.0 {
                acc.push(0.0);
                return;
            }
            let y = space.sample_transition(s, x, &mut rng);
            let v: f64 = live.iter().map(|term| term.eval(&y).abs()).sum();
            let inv_density = t.powf(1.0 - gamma) / (1.0 - gamma) * s.powf(gamma);
            acc.push(s.powf(-alpha / 2.0) * weight.relative(alpha, s) * v * inv_density);
        },
        Accumulator::merge,
    );
    Ok((acc.mean(), acc.stderr()))
}

/// Membership of a potential in the α-Kato class, judged along a time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NotMember,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoClassification {
    pub alpha: f64,
    pub status: Membership,
    /// Log-log slope of the certified value against `t`.
    pub exponent: Option<f64>,
    pub certificates: Vec<KatoCertificate>,
}

impl KatoClassification {
    pub fn is_member(&self) -> bool {
        self.status == Membership::Member
    }
}

pub fn classify_kato(v: &Potential, t_grid: &[f64], alpha: f64) -> Result<KatoClassification> {
    if t_grid.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: t_grid.len(),
        });
    }
    if t_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::OutOfRange("t_grid must be strictly decreasing".into()));
    }
    let certificates = t_grid
        .iter()
        .map(|&t| kato_integral(v, alpha, t, KatoMethod::Auto))
        .collect::<Result<Vec<_>>>()?;
    let mut out = KatoClassification {
        alpha,
        status: Membership::Inconclusive,
        exponent: None,
        certificates,
    };
    if out.certificates.iter().any(|c| !c.is_finite()) {
        out.status = Membership::NotMember;
        return Ok(out);
    }
    let values: Vec<f64> = out.certificates.iter().map(KatoCertificate::certified).collect();
    if values.iter().all(|&b| b == 0.0) {
        out.status = Membership::Member;
        return Ok(out);
    }
    if values.iter().any(|&b| !(b > 0.0)) {
        return Ok(out);
    }
    let slope = log_log_slope(t_grid, &values);
    out.exponent = Some(slope);
    let decreasing = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    if slope > 1e-3 && decreasing {
        out.status = Membership::Member;
    }
    Ok(out)
}

/// Bound at `t ≥ t'` from a certificate at `t'`: `ceil(t/t')` times the bound.
pub fn extend_small_time(cert: &KatoCertificate, t: f64) -> Result<KatoCertificate> {
    check_time(t)?;
    if !cert.is_finite() {
        return Err(Error::NotKato("cannot extend a divergent certificate".into()));
    }
    if t < cert.t {
        return Err(Error::OutOfRange(format!("target {t} below certificate time {}", cert.t)));
    }
    let l = (t / cert.t * (1.0 - 1e-12)).ceil().max(1.0);
    let mut out = cert.clone();
    out.t = t;
    out.bound = l * cert.bound;
    out.stderr = cert.stderr.map(|s| l * s);
    out.upper_bound = cert.upper_bound.map(|u| l * u);
    out.extended_from = Some(cert.extended_from.unwrap_or(cert.t));
    Ok(out)
}

/// Declared split `V = V₁ + V₂` with `V₁ ∈ L^q` and `V₂ ∈ L^∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqSplit {
    pub q: f64,
    pub lq_norm: f64,
    pub sup_norm: f64,
}

impl LqSplit {
    /// `1/|y|` on `ℝ³` split at the unit sphere: `‖1_B/|y|‖_q = (4π/(3-q))^{1/q}` and the rest is at most 1.
    pub fn coulomb(q: f64) -> Result<Self> {
        if !(1.0..3.0).contains(&q) {
            return Err(Error::OutOfRange(format!("1/|y| restricted to the ball is in L^q only for q < 3, got {q}")));
        }
        Ok(Self {
            q,
            lq_norm: (4.0 * PI / (3.0 - q)).powf(1.0 / q),
            sup_norm: 1.0,
        })
    }
}

/// `‖V₁‖_q (4π)^{-d/2q} t^β/β + ‖V₂‖_∞ t^{1-α/2}/(1-α/2)` with `β = 1 - α/2 - d/2q`,
/// from Hölder's inequality and the on-diagonal bound `p(s,x,y) ≤ (4πs)^{-d/2}`.
pub fn lq_kato_bound(dim: usize, split: LqSplit, alpha: f64, t: f64) -> Result<KatoCertificate> {
    check_time(t)?;
    check_alpha(alpha)?;
    let d = dim as f64;
    let threshold = d / (2.0 - alpha);
    if !(split.q > threshold) || split.q < 1.0 {
        return Err(Error::HypothesisViolated(format!(
            "q = {} must exceed d/(2-α) = {threshold}",
            split.q
        )));
    }
    let beta = 1.0 - alpha / 2.0 - d / (2.0 * split.q);
    let singular = split.lq_norm * (4.0 * PI).powf(-d / (2.0 * split.q)) * t.powf(beta) / beta;
    let bounded = constant_value(split.sup_norm, alpha, t);
    Ok(KatoCertificate::new(alpha, t, singular + bounded, MethodTag::ClosedForm, KatoWeight::Kato))
}
