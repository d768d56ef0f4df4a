//! Smoothing constants and the checks of the Hölder bounds built from them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_time, Error, Result};
use crate::fk::{fk_evaluate, khashminskii_certify, FkConfig, KhashminskiiCertificate};
use crate::functions::TestFunction;
use crate::kato::{kato_integral, kato_integral_weighted, KatoCertificate, KatoMethod, KatoWeight};
use crate::numerics::log_log_slope;
use crate::potential::{MolecularPotential, Potential, PotentialKind, Projection};
use crate::report::{BoundReport, Verdict};
use crate::space::{Point, SpaceKind, StateSpace};

/// Coupling rate `F_K(t)`: `1/√(2t)` at `K = 0`, else `√(K / (e^{2Kt} - 1))`.
pub fn f_k(k: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if k == 0.0 {
        return Ok(1.0 / (2.0 * t).sqrt());
    }
    Ok((k / (2.0 * k * t).exp_m1()).sqrt())
}

/// `2^{1-α} F_K(t)^α`.
pub fn holder_cap(k: f64, alpha: f64, t: f64) -> Result<f64> {
    Ok(2f64.powf(1.0 - alpha) * f_k(k, t)?.powf(alpha))
}

pub type Pair = (Point, Point);

/// Pairs symmetric about each center at separations `scale · 2^{-k}`, `k = 0..=levels`.
///
/// Euclidean pairs are axis aligned; sphere pairs lie on the two geodesics
/// through the center tangent to the other coordinate great circles.
pub fn pair_grid(space: &StateSpace, centers: &[Point], scale: f64, levels: u32) -> Result<Vec<Pair>> {
    let mut out = Vec::new();
    for c in centers {
        space.validate(c)?;
        let dirs = tangent_directions(space, c);
        for dir in &dirs {
            for k in 0..=levels {
                let sep = scale * 0.5f64.powi(k as i32);
                out.push((offset(space, c, dir, -0.5 * sep), offset(space, c, dir, 0.5 * sep)));
            }
        }
    }
    Ok(out)
}

fn tangent_directions(space: &StateSpace, c: &Point) -> Vec<Vec<f64>> {
    let n = space.ambient_dimension();
    let axes = (0..n).map(|i| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    });
    match space.kind {
        SpaceKind::Euclidean { .. } => axes.collect(),
        SpaceKind::Sphere2 { radius } => {
            let u: Vec<f64> = c.iter().map(|v| v / radius).collect();
            let mut dirs = Vec::new();
            for e in axes {
                let d: f64 = e.iter().zip(&u).map(|(a, b)| a * b).sum();
                let tang: Vec<f64> = e.iter().zip(&u).map(|(a, b)| a - d * b).collect();
                let norm = tang.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    dirs.push(tang.iter().map(|v| v / norm).collect());
                }
            }
            dirs.truncate(2);
            dirs
        }
    }
}

fn offset(space: &StateSpace, c: &Point, dir: &[f64], s: f64) -> Point {
    match space.kind {
        SpaceKind::Euclidean { .. } => Point::new(c.iter().zip(dir).map(|(a, b)| a + s * b).collect::<Vec<_>>()),
        SpaceKind::Sphere2 { radius } => {
            let th = s / radius;
            Point::new(
                c.iter()
                    .zip(dir)
                    .map(|(a, b)| th.cos() * a + th.sin() * radius * b)
                    .collect::<Vec<_>>(),
            )
        }
    }
}

/// Centers across the feature of `f`: a line through the base point along the
/// first axis (Euclidean) or a meridian (sphere).
pub fn default_centers(space: &StateSpace, t: f64, count: usize) -> Vec<Point> {
    let half = count as i64 / 2;
    match space.kind {
        SpaceKind::Euclidean { dim } => (-half..=half)
            .map(|j| {
                let mut x = vec![0.0; dim];
                x[0] = j as f64 * 0.25 * t.sqrt();
                Point::new(x)
            })
            .collect(),
        SpaceKind::Sphere2 { radius } => (0..=2 * half)
            .map(|j| {
                let th = std::f64::consts::PI * (j as f64 + 0.5) / (2 * half + 1) as f64;
                Point::new(vec![radius * th.sin(), 0.0, radius * th.cos()])
            })
            .collect(),
    }
}

/// Semigroup values at the distinct points of a pair set.
fn values_at(pairs: &[Pair], eval: &dyn Fn(&Point) -> Result<(f64, f64)>) -> Result<HashMap<Vec<u64>, (f64, f64)>> {
    let mut cache = HashMap::new();
    for (x, y) in pairs {
        for p in [x, y] {
            let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
            if !cache.contains_key(&key) {
                cache.insert(key, eval(p)?);
            }
        }
    }
    Ok(cache)
}

fn lookup<'a>(cache: &'a HashMap<Vec<u64>, (f64, f64)>, p: &Point) -> &'a (f64, f64) {
    &cache[&p.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()]
}

/// Largest `|P_t f(x) - P_t f(y)| / (d(x,y)^α ‖f‖_∞)` over the pairs, with its witness.
pub fn quotient_sup(space: &StateSpace, t: f64, alpha: f64, f: &TestFunction, pairs: &[Pair]) -> Result<(f64, Option<Pair>)> {
    let sup = f.sup_norm();
    let cache = values_at(pairs, &|p| Ok((f.heat_semigroup(space, t, p)?, 0.0)))?;
    let mut best = (0.0, None);
    if sup == 0.0 {
        return Ok(best);
    }
    for (x, y) in pairs {
        let d = space.distance(x, y)?;
        if d == 0.0 {
            continue;
        }
        let q = (lookup(&cache, x).0 - lookup(&cache, y).0).abs() / (d.powf(alpha) * sup);
        if q > best.0 {
            best = (q, Some((x.clone(), y.clone())));
        }
    }
    Ok(best)
}

fn quotient_report(name: &str, space: &StateSpace, t: f64, alpha: f64, f: &TestFunction, pairs: &[Pair]) -> Result<BoundReport> {
    let k = space.ricci_lower_bound();
    let theoretical = holder_cap(k, alpha, t)?;
    let (q, witness) = quotient_sup(space, t, alpha, f, pairs)?;
    let mut r = BoundReport::check(name, theoretical, q, 0.0, 1e-12)
        .param("t", t)
        .param("K", k)
        .param("alpha", alpha)
        .param("pairs", pairs.len() as u64);
    if let Some((x, y)) = witness {
        r = r.with_witness(x, y);
    }
    Ok(r)
}

/// Measured Lipschitz quotient of `e^{-tH} f` against `F_K(t)`.
pub fn lipschitz_quotient(space: &StateSpace, t: f64, f: &TestFunction, pairs: &[Pair]) -> Result<BoundReport> {
    quotient_report("lipschitz_smoothing", space, t, 1.0, f, pairs)
}

/// Measured α-Hölder quotient of `e^{-tH} f` against `2^{1-α} F_K(t)^α`.
pub fn holder_quotient(space: &StateSpace, t: f64, alpha: f64, f: &TestFunction, pairs: &[Pair]) -> Result<BoundReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha}, expected 0 < α ≤ 1")));
    }
    quotient_report("holder_smoothing", space, t, alpha, f, pairs)
}

/// `C(V, K, α, r) = sup_x ∫₀^r F_K(s)^α ∫ p(s,x,y)|V(y)| dy ds`.
pub fn c_constant(v: &Potential, k: f64, alpha: f64, r: f64) -> Result<KatoCertificate> {
    kato_integral_weighted(v, alpha, r, KatoMethod::Auto, KatoWeight::CouplingRate { k })
}

/// Khashminskii bound on `C_exp(V, t)` from the α = 0 Kato integral of `|V|`.
pub fn c_exp_bound(v: &Potential, t: f64) -> Result<KhashminskiiCertificate> {
    let kato0 = kato_integral(v, 0.0, t, KatoMethod::Auto)?;
    khashminskii_certify(v, t, &kato0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AConstant {
    pub k: f64,
    pub alpha: f64,
    pub t: f64,
    /// `2^{2-α}`.
    pub prefactor: f64,
    pub c_exp: f64,
    /// `C(V, K, α, t/2)`, certified value.
    pub c: f64,
    pub value: f64,
    pub divergent: bool,
}

/// `A(V, K, α, t) = 2^{2-α} C_exp(V, t) C(V, K, α, t/2)`.
pub fn a_constant(v: &Potential, k: f64, alpha: f64, t: f64, c_exp: f64) -> Result<AConstant> {
    check_time(t)?;
    let c = c_constant(v, k, alpha, t / 2.0)?;
    let prefactor = 2f64.powf(2.0 - alpha);
    let divergent = !c.is_finite() || !c_exp.is_finite();
    let cv = if c.is_finite() { c.certified() } else { f64::INFINITY };
    Ok(AConstant {
        k,
        alpha,
        t,
        prefactor,
        c_exp,
        c: cv,
        value: if divergent {
            f64::INFINITY
        } else if cv == 0.0 {
            0.0
        } else {
            prefactor * c_exp * cv
        },
        divergent,
    })
}

/// How `e^{-tH_V}Φ` is evaluated in the theorem check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Route {
    /// Feynman-Kac estimates, common seed at every point.
    MonteCarlo(FkConfig),
    /// Exact heat kernel quadrature; only for zero or constant `V`.
    ExactKernel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCheck {
    pub a: AConstant,
    pub holder_cap: f64,
    pub reports: Vec<BoundReport>,
    /// Largest measured `|u(x) - u(y)| / (‖Φ‖_∞ d^α)`.
    pub max_quotient: f64,
}

impl TheoremCheck {
    pub fn verdict(&self) -> Verdict {
        crate::report::overall(&self.reports)
    }

    pub fn holds(&self) -> bool {
        self.verdict() == Verdict::Holds
    }
}

/// Checks `|e^{-tH_V}Φ(x) - e^{-tH_V}Φ(y)| ≤ (2^{1-α}F_K(t)^α + A) ‖Φ‖_∞ d(x,y)^α` on every pair.
pub fn verify_main_theorem(
    v: &Potential,
    phi: &TestFunction,
    alpha: f64,
    t: f64,
    pairs: &[Pair],
    route: Route,
) -> Result<TheoremCheck> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha}, expected 0 < α ≤ 1")));
    }
    let space = v.space;
    let k = space.ricci_lower_bound();
    let c_exp = c_exp_bound(v, t)?.bound_on_c_exp;
    let a = a_constant(v, k, alpha, t, c_exp)?;
    let cap = holder_cap(k, alpha, t)?;
    let sup = phi.sup_norm();

    let cache = match route {
        Route::ExactKernel => {
            let c = match &v.kind {
                PotentialKind::Zero => 0.0,
                PotentialKind::Constant { value } => *value,
                _ => return Err(Error::Unsupported("exact-kernel route needs V zero or constant".into())),
            };
            let factor = (-c * t).exp();
            values_at(pairs, &|p| Ok((factor * phi.heat_semigroup(&space, t, p)?, 0.0)))?
        }
        Route::MonteCarlo(cfg) => values_at(pairs, &|p| {
            let e = fk_evaluate(v, phi, p, t, &cfg)?;
            Ok((e.value, e.stderr))
        })?,
    };

    let mut reports = Vec::with_capacity(pairs.len());
    let mut max_quotient: f64 = 0.0;
    for (x, y) in pairs {
        let d = space.distance(x, y)?;
        let (ux, sx) = *lookup(&cache, x);
        let (uy, sy) = *lookup(&cache, y);
        let lhs = (ux - uy).abs();
        if d > 0.0 && sup > 0.0 {
            max_quotient = max_quotient.max(lhs / (sup * d.powf(alpha)));
        }
        let rhs = (cap + a.value) * sup * d.powf(alpha);
        reports.push(
            BoundReport::check("main_theorem", rhs, lhs, (sx * sx + sy * sy).sqrt(), 0.0)
                .param("alpha", alpha)
                .param("t", t)
                .param("K", k)
                .param("d", d)
                .param("A", a.value)
                .with_witness(x.clone(), y.clone()),
        );
    }
    Ok(TheoremCheck {
        a,
        holder_cap: cap,
        reports,
        max_quotient,
    })
}

/// Eigenfunction form: `|Ψ(x) - Ψ(y)| ≤ e^{tλ} (2^{1-α}F_K(t)^α + A) ‖Ψ‖_∞ d^α` with the exact `Ψ`.
pub fn eigenfunction_holder_check(
    v: &Potential,
    psi: &TestFunction,
    lambda: f64,
    alpha: f64,
    t: f64,
    pairs: &[Pair],
) -> Result<Vec<BoundReport>> {
    let space = v.space;
    let k = space.ricci_lower_bound();
    let c_exp = c_exp_bound(v, t)?.bound_on_c_exp;
    let a = a_constant(v, k, alpha, t, c_exp)?;
    let factor = (t * lambda).exp() * (holder_cap(k, alpha, t)? + a.value) * psi.sup_norm();
    pairs
        .iter()
        .map(|(x, y)| {
            let d = space.distance(x, y)?;
            let lhs = (psi.eval(x) - psi.eval(y)).abs();
            Ok(BoundReport::check("eigenfunction_holder", factor * d.powf(alpha), lhs, 0.0, 1e-12)
                .param("alpha", alpha)
                .param("t", t)
                .param("lambda", lambda)
                .with_witness(x.clone(), y.clone()))
        })
        .collect()
}

/// A base-space potential pulled back along a submersion `ℝ^{3m} → ℝ³`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulledBackTerm {
    pub base: Potential,
    pub projection: Projection,
}

/// Base terms of a molecular potential: `V_j(z) = -Σ_i Z_i/|z - R_i|` along
/// `π_j`, and `V_ij(z) = 1/(√2 |z|)` along the normalized `π_ij`.
pub fn molecular_base_terms(mol: &MolecularPotential) -> Vec<PulledBackTerm> {
    let e3 = StateSpace::euclidean(3);
    let attraction = PotentialKind::Sum {
        terms: mol
            .nuclei
            .iter()
            .map(|n| PotentialKind::Coulomb {
                center: n.position,
                coefficient: -n.charge,
            })
            .collect(),
    };
    let mut out = Vec::new();
    for j in 0..mol.m {
        out.push(PulledBackTerm {
            base: Potential {
                space: e3,
                kind: attraction.clone(),
            },
            projection: Projection::Electron { j },
        });
    }
    for j in 0..mol.m {
        for i in 0..j {
            out.push(PulledBackTerm {
                base: Potential::coulomb(std::f64::consts::FRAC_1_SQRT_2),
                projection: Projection::Pair { i, j },
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BConstant {
    pub prefactor: f64,
    pub c_exp: f64,
    /// Certified `C(V_term, K, α, t/2)` per base term.
    pub term_c: Vec<f64>,
    pub value: f64,
    pub divergent: bool,
}

/// `B = 2^{2-α} C_exp(Σ π^*V, t) Σ_terms C(V_term, K, α, t/2)`.
pub fn corollary_b_constant(total: &Potential, terms: &[PulledBackTerm], k: f64, alpha: f64, t: f64) -> Result<BConstant> {
    check_time(t)?;
    let prefactor = 2f64.powf(2.0 - alpha);
    let term_c = terms
        .iter()
        .map(|term| {
            let c = c_constant(&term.base, k, alpha, t / 2.0)?;
            Ok(if c.is_finite() { c.certified() } else { f64::INFINITY })
        })
        .collect::<Result<Vec<f64>>>()?;
    let sum: f64 = term_c.iter().sum();
    if sum == 0.0 {
        return Ok(BConstant {
            prefactor,
            c_exp: 1.0,
            term_c,
            value: 0.0,
            divergent: false,
        });
    }
    let divergent = !sum.is_finite();
    let c_exp = if divergent { f64::INFINITY } else { c_exp_bound(total, t)?.bound_on_c_exp };
    Ok(BConstant {
        prefactor,
        c_exp,
        term_c,
        value: prefactor * c_exp * sum,
        divergent,
    })
}

/// Inputs of the closed-form molecular `L^r → C^{0,α}` estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MolecularBoundParams {
    pub m: usize,
    /// Lebesgue exponent of the input space; `f64::INFINITY` for `L^∞`.
    pub r: f64,
    pub alpha: f64,
    /// Absolute prefactor `C_{m,Z}`.
    pub c_mz: f64,
    /// Exponential rate `C`.
    pub c: f64,
}

/// `t^{-3m/2r} e^{Ct} (2^{1-α} t^{-α/2} + (t/4)^{(1-α)/2} / ((1-α)/2) · e^{Ct})`.
pub fn molecular_shape(m: usize, r: f64, alpha: f64, c: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha}; the molecular estimate needs 0 < α < 1")));
    }
    if !(r >= 1.0) {
        return Err(Error::OutOfRange(format!("Lebesgue exponent r = {r} < 1")));
    }
    let e = (c * t).exp();
    let lebesgue = if r.is_infinite() { 1.0 } else { t.powf(-3.0 * m as f64 / (2.0 * r)) };
    let beta = (1.0 - alpha) / 2.0;
    Ok(lebesgue * e * (2f64.powf(1.0 - alpha) * t.powf(-alpha / 2.0) + (t / 4.0).powf(beta) / beta * e))
}

pub fn molecular_bound(p: &MolecularBoundParams, t: f64) -> Result<f64> {
    Ok(p.c_mz * molecular_shape(p.m, p.r, p.alpha, p.c, t)?)
}

/// Fits `(C_{m,Z}, C)` to measured quotients `(t, q)`.
///
/// `C ≥ 0` matches the first and last measurements in log-ratio when such a
/// value exists, else 0; `C_{m,Z}` is then the smallest prefactor that
/// dominates every measurement.
pub fn calibrate_molecular(m: usize, r: f64, alpha: f64, measurements: &[(f64, f64)]) -> Result<MolecularBoundParams> {
    if measurements.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: measurements.len(),
        });
    }
    let (t1, q1) = measurements[0];
    let (t2, q2) = measurements[measurements.len() - 1];
    let mismatch = |c: f64| -> Result<f64> {
        Ok((q2 / q1).ln() - (molecular_shape(m, r, alpha, c, t2)? / molecular_shape(m, r, alpha, c, t1)?).ln())
    };
    let mut c = 0.0;
    let (mut lo, mut hi) = (0.0, 50.0 / t1.max(t2));
    if q1 > 0.0 && q2 > 0.0 && mismatch(lo)?.signum() != mismatch(hi)?.signum() {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mismatch(mid)?.signum() == mismatch(lo)?.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c = 0.5 * (lo + hi);
    }
    let mut c_mz: f64 = 0.0;
    for &(t, q) in measurements {
        c_mz = c_mz.max(q / molecular_shape(m, r, alpha, c, t)?);
    }
    Ok(MolecularBoundParams { m, r, alpha, c_mz, c })
}

/// Fitted log-log slope of `values` against `1 - α`.
pub fn blowup_slope(alphas: &[f64], values: &[f64]) -> f64 {
    let gaps: Vec<f64> = alphas.iter().map(|a| 1.0 - a).collect();
    log_log_slope(&gaps, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal_pdf;
    use crate::potential::Nucleus;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn f_k_values() {
        assert_eq!(f_k(0.0, 2.0).unwrap(), 0.5);
        let v = f_k(1.0, 1.0).unwrap();
        assert!((v - (1.0 / (std::f64::consts::E.powi(2) - 1.0)).sqrt()).abs() < 1e-15);
        assert!((v - 0.395_623).abs() < 1e-6);
        assert!(f_k(0.0, 0.0).is_err());
    }

    #[test]
    fn f_k_continuous_at_zero_curvature() {
        for t in [0.1, 1.0, 5.0] {
            let limit = f_k(0.0, t).unwrap();
            // F_K / F_0 = 1 - K t / 2 + O(K² t²)
            for k in [1e-6, -1e-6] {
                let v = f_k(k, t).unwrap();
                let gap = (v - limit) / limit;
                assert!((gap + k * t / 2.0).abs() < 1e-11, "k={k} t={t} gap={gap}");
            }
            let tiny = f_k(1e-12, t).unwrap();
            assert!(((tiny - limit) / limit).abs() < 1e-8);
        }
    }

    fn sign_pairs(t: f64) -> Vec<Pair> {
        let e = StateSpace::euclidean(1);
        pair_grid(&e, &default_centers(&e, t, 16), 2.0 * t.sqrt(), 12).unwrap()
    }

    #[test]
    fn lipschitz_quotient_of_sign() {
        let e = StateSpace::euclidean(1);
        let f = TestFunction::Sign { axis: 0 };
        for t in [0.25, 1.0, 4.0] {
            let r = lipschitz_quotient(&e, t, &f, &sign_pairs(t)).unwrap();
            // oracle: derivative of 2Φ(x/√(2t)) - 1 at 0
            let exact = 2.0 * normal_pdf(0.0) / (2.0 * t).sqrt();
            assert!((exact - 1.0 / (PI * t).sqrt()).abs() < 1e-14);
            assert!(rel(r.empirical, exact) < 0.01, "t={t}: {}", r.empirical);
            assert!(r.holds());
            assert!((r.theoretical - 1.0 / (2.0 * t).sqrt()).abs() < 1e-15);
            assert!((exact / r.theoretical - (2.0 / PI).sqrt()).abs() < 1e-12);
        }
        let c = lipschitz_quotient(&e, 1.0, &TestFunction::Constant { value: 2.0 }, &sign_pairs(1.0)).unwrap();
        assert_eq!(c.empirical, 0.0);
    }

    #[test]
    fn holder_quotient_of_sign() {
        let e = StateSpace::euclidean(1);
        let f = TestFunction::Sign { axis: 0 };
        let r = holder_quotient(&e, 1.0, 0.5, &f, &sign_pairs(1.0)).unwrap();
        assert!((r.theoretical - 2f64.powf(0.25)).abs() < 1e-12);
        assert!(r.holds() && r.empirical > 0.5);
        let l = lipschitz_quotient(&e, 1.0, &f, &sign_pairs(1.0)).unwrap();
        let h1 = holder_quotient(&e, 1.0, 1.0, &f, &sign_pairs(1.0)).unwrap();
        assert_eq!(l.empirical, h1.empirical);
        assert_eq!(l.theoretical, h1.theoretical);
        let far = vec![(Point::new(vec![-1e8]), Point::new(vec![1e8]))];
        let r = holder_quotient(&e, 1.0, 0.5, &f, &far).unwrap();
        assert!(r.empirical < 1e-3 && r.holds());
    }

    #[test]
    fn sphere_lipschitz_quotient() {
        let s = StateSpace::unit_sphere();
        let f = TestFunction::HalfSpace {
            normal: vec![0.0, 0.0, 1.0],
            offset: 0.0,
        };
        let pairs = pair_grid(&s, &default_centers(&s, 0.5, 8), 0.5, 8).unwrap();
        let r = lipschitz_quotient(&s, 0.5, &f, &pairs).unwrap();
        assert!((r.theoretical - (1.0 / (std::f64::consts::E - 1.0)).sqrt()).abs() < 1e-12);
        assert!(r.holds() && r.empirical > 0.1, "{r:?}");
        // pair separations are geodesic
        for (x, y) in pairs.iter().take(9) {
            let d = s.distance(x, y).unwrap();
            assert!(d <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn c_constant_values() {
        let zero = Potential::zero(StateSpace::euclidean(3));
        assert_eq!(c_constant(&zero, 0.0, 0.5, 1.0).unwrap().bound, 0.0);
        let v = Potential::coulomb(1.0);
        assert!((c_constant(&v, 0.0, 0.0, 1.0).unwrap().bound - 1.128_38).abs() < 1e-5);
        // 2^{-1/4} (2/√π) (1/2)^{1/4} / (1/2) = 4/√(2π)
        let closed = c_constant(&v, 0.0, 0.5, 0.5).unwrap();
        assert!((closed.bound - 4.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((closed.bound - 1.595_77).abs() < 1e-5);
        let q = kato_integral_weighted(&v, 0.5, 0.5, KatoMethod::Quadrature, KatoWeight::CouplingRate { k: 0.0 }).unwrap();
        assert!(rel(q.bound, closed.bound) < 1e-6);
        assert!(c_constant(&v, 0.0, 1.0, 1.0).unwrap().divergent);
        // positive curvature lowers the weight
        let curved = c_constant(&v, 1.0, 0.5, 0.5).unwrap();
        assert!(curved.bound < closed.bound);
    }

    #[test]
    fn a_constant_composition() {
        let zero = Potential::zero(StateSpace::euclidean(3));
        let a0 = a_constant(&zero, 0.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(a0.value, 0.0);
        let h = Potential::hydrogen();
        let c_exp = c_exp_bound(&h, 1.0).unwrap();
        assert_eq!(c_exp.subdivisions, 6);
        let a = a_constant(&h, 0.0, 0.5, 1.0, c_exp.bound_on_c_exp).unwrap();
        let expect = 2f64.powf(1.5) * c_exp.bound_on_c_exp * 4.0 / (2.0 * PI).sqrt();
        assert!(rel(a.value, expect) < 1e-12);
        // monotone in t
        let mut last = 0.0;
        for t in [0.25, 0.5, 1.0, 2.0] {
            let c = c_exp_bound(&h, t).unwrap().bound_on_c_exp;
            let v = a_constant(&h, 0.0, 0.5, t, c).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        let alphas: Vec<f64> = (0..10).map(|k| 0.8 + 0.02 * k as f64).collect();
        let values: Vec<f64> = alphas.iter().map(|&al| a_constant(&h, 0.0, al, 1.0, c_exp.bound_on_c_exp).unwrap().value).collect();
        let slope = blowup_slope(&alphas, &values);
        assert!((slope + 1.0).abs() < 0.1, "{slope}");
        assert!(a_constant(&h, 0.0, 1.0, 1.0, 2.0).unwrap().divergent);
    }

    #[test]
    fn main_theorem_reduces_to_holder_check_for_zero_potential() {
        let e = StateSpace::euclidean(1);
        let f = TestFunction::Sign { axis: 0 };
        let pairs = sign_pairs(1.0);
        for alpha in [0.25, 0.5, 1.0] {
            let th = verify_main_theorem(&Potential::zero(e), &f, alpha, 1.0, &pairs, Route::ExactKernel).unwrap();
            let h = holder_quotient(&e, 1.0, alpha, &f, &pairs).unwrap();
            assert!(th.holds());
            assert_eq!(th.a.value, 0.0);
            assert!((th.max_quotient - h.empirical).abs() < 1e-10);
            assert!((th.holder_cap - h.theoretical).abs() < 1e-15);
        }
        assert!(verify_main_theorem(&Potential::hydrogen(), &f, 0.5, 1.0, &pairs, Route::ExactKernel).is_err());
    }

    #[test]
    fn main_theorem_routes_agree_for_constant_potential() {
        let e = StateSpace::euclidean(1);
        let v = Potential::constant(e, 0.7);
        let f = TestFunction::Ball {
            center: vec![0.0],
            radius: 1.0,
        };
        let pairs = pair_grid(&e, &[Point::new(vec![1.0])], 1.0, 3).unwrap();
        let exact = verify_main_theorem(&v, &f, 0.5, 0.5, &pairs, Route::ExactKernel).unwrap();
        let mc = verify_main_theorem(&v, &f, 0.5, 0.5, &pairs, Route::MonteCarlo(FkConfig::new(20_000, 3))).unwrap();
        assert!(exact.holds() && mc.holds());
        for (a, b) in exact.reports.iter().zip(&mc.reports) {
            assert!((a.empirical - b.empirical).abs() < 3.0 * b.stderr + 1e-3);
        }
    }

    #[test]
    fn eigenfunction_corollary_for_hydrogen() {
        let h = Potential::hydrogen();
        let psi = TestFunction::ExpRadial {
            center: vec![0.0; 3],
            rate: 0.5,
        };
        let e3 = StateSpace::euclidean(3);
        let pairs = pair_grid(&e3, &[Point::origin(3), Point::new(vec![1.0, 0.0, 0.0])], 2.0, 12).unwrap();
        let reports = eigenfunction_holder_check(&h, &psi, -0.25, 0.5, 1.0, &pairs).unwrap();
        assert!(reports.iter().all(BoundReport::holds));
    }

    #[test]
    fn b_constant_reductions() {
        let empty = corollary_b_constant(&Potential::zero(StateSpace::euclidean(3)), &[], 0.0, 0.5, 1.0).unwrap();
        assert_eq!(empty.value, 0.0);
        let mol = MolecularPotential::hydrogen();
        let total = Potential::molecular(mol.clone()).unwrap();
        let b = corollary_b_constant(&total, &molecular_base_terms(&mol), 0.0, 0.5, 1.0).unwrap();
        let h = Potential::hydrogen();
        let a = a_constant(&h, 0.0, 0.5, 1.0, c_exp_bound(&h, 1.0).unwrap().bound_on_c_exp).unwrap();
        assert!(rel(b.value, a.value) < 1e-12);

        let he = MolecularPotential {
            m: 2,
            nuclei: vec![Nucleus {
                position: [0.0; 3],
                charge: 2.0,
            }],
        };
        let total = Potential::molecular(he.clone()).unwrap();
        let terms = molecular_base_terms(&he);
        assert_eq!(terms.len(), 3);
        let b = corollary_b_constant(&total, &terms, 0.0, 0.5, 1.0).unwrap();
        let unit = c_constant(&Potential::coulomb(1.0), 0.0, 0.5, 0.5).unwrap().bound;
        let sum = 2.0 * unit + 2.0 * unit + std::f64::consts::FRAC_1_SQRT_2 * unit;
        assert!(rel(b.term_c.iter().sum::<f64>(), sum) < 1e-12);
        assert!(b.value.is_finite() && !b.divergent);
        let div = corollary_b_constant(&total, &terms, 0.0, 1.0, 1.0).unwrap();
        assert!(div.divergent);
    }

    #[test]
    fn molecular_shape_properties() {
        let f = |alpha: f64| molecular_shape(1, f64::INFINITY, alpha, 0.0, 1.0).unwrap();
        // α → 1: (1/4)^{(1-α)/2} 2/(1-α) dominates
        let alphas = [0.9, 0.95, 0.99, 0.999];
        let vals: Vec<f64> = alphas.iter().map(|&a| f(a)).collect();
        assert!((blowup_slope(&alphas, &vals) + 1.0).abs() < 0.05);
        assert!(rel(f(0.999) * 0.001, 2.0) < 0.01);
        assert!(molecular_shape(1, f64::INFINITY, 1.0, 0.0, 1.0).is_err());
        let with_r = molecular_shape(2, 4.0, 0.5, 0.0, 2.0).unwrap();
        let no_r = molecular_shape(2, f64::INFINITY, 0.5, 0.0, 2.0).unwrap();
        assert!(rel(with_r, no_r * 2f64.powf(-0.75)) < 1e-14);
    }

    #[test]
    fn calibration_dominates_inputs() {
        // synthetic data from known constants is recovered
        let truth = MolecularBoundParams {
            m: 1,
            r: f64::INFINITY,
            alpha: 0.5,
            c_mz: 0.3,
            c: 0.4,
        };
        let data: Vec<(f64, f64)> = [0.5, 1.0].iter().map(|&t| (t, molecular_bound(&truth, t).unwrap())).collect();
        let fit = calibrate_molecular(1, f64::INFINITY, 0.5, &data).unwrap();
        assert!((fit.c - 0.4).abs() < 1e-9 && rel(fit.c_mz, 0.3) < 1e-9);
        let decreasing = [(0.5, 1.0), (1.0, 0.6)];
        let fit = calibrate_molecular(1, f64::INFINITY, 0.5, &decreasing).unwrap();
        assert_eq!(fit.c, 0.0);
        for (t, q) in decreasing {
            assert!(molecular_bound(&fit, t).unwrap() >= q * (1.0 - 1e-12));
        }
    }
}
