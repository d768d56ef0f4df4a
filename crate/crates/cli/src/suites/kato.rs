//! `kato`: certificates over an α × t sweep, closed-form and Monte Carlo
//! agreement, and classification.

use kato_core::kato::{classify_kato, kato_integral, KatoCertificate, KatoMethod};
use kato_core::potential::Potential;
use kato_core::report::BoundReport;
use kato_core::Substreams;
use serde::{Deserialize, Serialize};

use super::agreement;
use crate::artifacts::Artifacts;
use crate::config::{all_positive, non_empty, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Auto,
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KatoConfig {
    pub run: RunOptions,
    pub potential: Potential,
    pub alphas: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub method: MethodSpec,
    /// Relative tolerance against the closed form.
    pub closed_form_tolerance: f64,
    /// Monte Carlo samples per certificate; 0 skips the Monte Carlo cross-check.
    pub mc_samples: usize,
    /// Strictly decreasing times for classification; empty skips it.
    pub classify_t_grid: Vec<f64>,
}

impl Default for KatoConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            potential: Potential::coulomb(1.0),
            alphas: vec![0.0, 0.25, 0.5, 0.75, 0.9],
            t_grid: vec![1.0],
            method: MethodSpec::Quadrature,
            closed_form_tolerance: 1e-6,
            mc_samples: 0,
            classify_t_grid: vec![0.5, 0.25, 0.125, 0.0625],
        }
    }
}

impl SuiteConfig for KatoConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        self.potential.validate().map_err(|e| format!("potential: {e}"))?;
        non_empty("alphas", &self.alphas)?;
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && **a < 2.0)) {
            return Err(format!("alphas must lie in [0, 2), got {a}"));
        }
        all_positive("t_grid", &self.t_grid)?;
        if self.mc_samples > 0 && self.mc_samples < 1000 {
            return Err(format!("mc_samples must be 0 or at least 1000, got {}", self.mc_samples));
        }
        if !self.classify_t_grid.is_empty() {
            all_positive("classify_t_grid", &self.classify_t_grid)?;
            if self.classify_t_grid.len() < 3 || self.classify_t_grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err("classify_t_grid needs at least 3 strictly decreasing times".into());
            }
        }
        Ok(())
    }
}

pub const KATO_CSV_HEADER: &str = "alpha,t,method,bound,upper_bound,closed_form,monte_carlo,mc_stderr,divergent";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(cfg: &KatoConfig, seed: u64) -> Result<Artifacts, CliError> {
    let v = &cfg.potential;
    let root = Substreams::new(seed).named("kato");
    let mut art = Artifacts::with_table("kato", KATO_CSV_HEADER);
    let method = match cfg.method {
        MethodSpec::Auto => KatoMethod::Auto,
        MethodSpec::Quadrature => KatoMethod::Quadrature,
        MethodSpec::ClosedForm => KatoMethod::ClosedForm,
    };
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            let cert = kato_integral(v, alpha, t, method)?;
            let closed = kato_integral(v, alpha, t, KatoMethod::ClosedForm).ok().filter(KatoCertificate::is_finite);
            let mc = if cfg.mc_samples > 0 && cert.is_finite() && alpha < 1.0 {
                let s = root.child(ai as u64).child(ti as u64).seed();
                Some(kato_integral(
                    v,
                    alpha,
                    t,
                    KatoMethod::MonteCarlo {
                        n_samples: cfg.mc_samples,
                        seed: s,
                    },
                )?)
            } else {
                None
            };
            let params = |r: BoundReport| r.param("alpha", alpha).param("t", t);
            if let Some(c) = &closed {
                if cert.is_finite() && cfg.method != MethodSpec::ClosedForm {
                    art.report(params(agreement(
                        "kato_closed_form",
                        c.bound,
                        cert.bound,
                        0.0,
                        cfg.closed_form_tolerance * c.bound.abs(),
                    )));
                }
                if let Some(m) = &mc {
                    art.report(params(agreement("kato_monte_carlo", c.bound, m.bound, m.stderr.unwrap_or(0.0), 0.0)));
                }
            }
            if let Some(u) = cert.upper_bound {
                art.report(params(BoundReport::check("kato_upper_bound", u, cert.bound, 0.0, 1e-12 * u.abs())));
            }
            art.row(format!(
                "{alpha},{t},{},{},{},{},{},{},{}",
                serde_json::to_value(cert.method).expect("serializable").as_str().unwrap_or(""),
                cert.bound,
                opt(cert.upper_bound),
                opt(closed.as_ref().map(|c| c.bound)),
                opt(mc.as_ref().map(|m| m.bound)),
                opt(mc.as_ref().and_then(|m| m.stderr)),
                cert.divergent
            ));
            art.record(&cert);
            if let Some(m) = &mc {
                art.record(m);
            }
        }
        if !cfg.classify_t_grid.is_empty() {
            art.record(&classify_kato(v, &cfg.classify_t_grid, alpha)?);
        }
    }
    Ok(art)
}
