//! `khashminskii`: the certified bound on `sup_x E^x exp(∫₀^r |V|)` against a
//! Feynman-Kac estimate at the worst start point.

use kato_core::fk::{fk_evaluate, khashminskii_certify, ActionIntegrator, FkConfig};
use kato_core::functions::TestFunction;
use kato_core::kato::{kato_integral, KatoMethod};
use kato_core::potential::Potential;
use kato_core::report::BoundReport;
use kato_core::Substreams;
use serde::{Deserialize, Serialize};

use super::point;
use crate::artifacts::Artifacts;
use crate::config::{positive, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KhashminskiiConfig {
    pub run: RunOptions,
    /// Must have a fixed sign, so that `exp(∫|V|)` is a Feynman-Kac weight.
    pub potential: Potential,
    pub r: f64,
    /// Start point; `None` uses the certificate's supremum witness.
    pub x: Option<Vec<f64>>,
    pub n_paths: usize,
    pub integrator: ActionIntegrator,
    /// Optional splitting constant `C_V` for the `2 e^{C_V r}` form.
    pub c_v: Option<f64>,
}

impl Default for KhashminskiiConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            potential: Potential::hydrogen(),
            r: std::f64::consts::PI / 16.0,
            x: None,
            n_paths: 100_000,
            integrator: ActionIntegrator::default(),
            c_v: None,
        }
    }
}

impl SuiteConfig for KhashminskiiConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        self.potential.validate().map_err(|e| format!("potential: {e}"))?;
        positive("r", self.r)?;
        if self.n_paths == 0 {
            return Err("n_paths must be positive".into());
        }
        if sign_flip(&self.potential).is_none() {
            return Err("potential: exp(∫|V|) needs V ≥ 0 or V ≤ 0 everywhere".into());
        }
        Ok(())
    }
}

/// `W` with `exp(-∫W) = exp(∫|V|)`, when `V` has a fixed sign.
fn sign_flip(v: &Potential) -> Option<Potential> {
    let flipped = v.scaled(-1.0);
    if v.terms().iter().all(|t| !t.can_be_negative()) {
        Some(flipped)
    } else if flipped.terms().iter().all(|t| !t.can_be_negative()) {
        Some(v.clone())
    } else {
        None
    }
}

pub fn run(cfg: &KhashminskiiConfig, seed: u64) -> Result<Artifacts, CliError> {
    let v = &cfg.potential;
    let kato0 = kato_integral(v, 0.0, cfg.r, KatoMethod::Auto)?;
    let mut cert = khashminskii_certify(v, cfg.r, &kato0)?;
    if let Some(c) = cfg.c_v {
        cert = cert.with_splitting_constant(c);
    }
    let x = match (&cfg.x, &kato0.sup_witness) {
        (Some(c), _) => point(&v.space, c)?,
        (None, Some(w)) => w.clone(),
        (None, None) => v.space.base_point(),
    };
    let w = sign_flip(v).ok_or_else(|| CliError::Config("potential must have a fixed sign".into()))?;
    let fk_cfg = FkConfig {
        n_paths: cfg.n_paths,
        seed: Substreams::new(seed).named("khashminskii").seed(),
        integrator: cfg.integrator,
    };
    let est = fk_evaluate(&w, &TestFunction::Constant { value: 1.0 }, &x, cfg.r, &fk_cfg)?;

    let mut art = Artifacts::reports_table("khashminskii");
    art.report(
        BoundReport::check("khashminskii_c_exp", cert.bound_on_c_exp, est.value, est.stderr, 0.0)
            .param("r", cfg.r)
            .param("kappa", cert.kappa)
            .param("subdivisions", cert.subdivisions as u64)
            .with_witness(x.clone(), x.clone()),
    );
    if let Some(b) = cert.paper_style_bound {
        art.report(
            BoundReport::check("khashminskii_splitting", b, est.value, est.stderr, 0.0)
                .param("r", cfg.r)
                .param("c_v", cert.c_v.unwrap_or(f64::NAN)),
        );
    }
    art.record(&cert);
    art.record(&est);
    Ok(art)
}
