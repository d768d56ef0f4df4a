//! `fk`: Feynman-Kac estimates of `e^{-tH_V}Ψ(x)` with eigenfunction and
//! exact-kernel oracles.

use kato_core::bounds::c_exp_bound;
use kato_core::fk::{fk_evaluate, truncation_ladder, ActionIntegrator, FkConfig};
use kato_core::functions::TestFunction;
use kato_core::potential::{Potential, PotentialKind};
use kato_core::report::BoundReport;
use kato_core::{StateSpace, Substreams};
use serde::{Deserialize, Serialize};

use super::{agreement, point};
use crate::artifacts::Artifacts;
use crate::config::{all_positive, positive, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FkSuiteConfig {
    pub run: RunOptions,
    pub potential: Potential,
    pub psi: TestFunction,
    /// Start point; `None` is the base point of the space.
    pub x: Option<Vec<f64>>,
    pub t_grid: Vec<f64>,
    pub n_paths: usize,
    pub integrator: ActionIntegrator,
    /// `H_V Ψ = λ Ψ`, checked as `e^{-tH_V}Ψ = e^{-tλ}Ψ`.
    pub eigenvalue: Option<f64>,
    pub relative_tolerance: f64,
    /// `(n, m)` levels of `min(m, max(V, -n))`; empty skips the ladder.
    pub truncation_levels: Vec<(f64, f64)>,
}

impl Default for FkSuiteConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            potential: Potential::zero(StateSpace::euclidean(1)),
            psi: TestFunction::Constant { value: 1.0 },
            x: None,
            t_grid: vec![0.5],
            n_paths: 100_000,
            integrator: ActionIntegrator::default(),
            eigenvalue: None,
            relative_tolerance: 0.02,
            truncation_levels: Vec::new(),
        }
    }
}

impl SuiteConfig for FkSuiteConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        self.potential.validate().map_err(|e| format!("potential: {e}"))?;
        all_positive("t_grid", &self.t_grid)?;
        if self.n_paths == 0 {
            return Err("n_paths must be positive".into());
        }
        positive("integrator.grid_step", self.integrator.grid_step)?;
        positive("relative_tolerance", self.relative_tolerance)?;
        if let Some(x) = &self.x {
            self.potential
                .space
                .validate(&kato_core::Point::new(x.clone()))
                .map_err(|e| format!("x: {e}"))?;
        }
        if !self.truncation_levels.is_empty() && !self.psi.is_nonnegative() {
            return Err("truncation_levels need a non-negative psi".into());
        }
        Ok(())
    }
}

pub const FK_CSV_HEADER: &str = "x,t,value,stderr,n_paths,epsilon,grid_step,seed";

/// Closed-form `e^{-tH_V}Ψ(x)` for zero or constant `V`.
fn exact_kernel(v: &Potential, psi: &TestFunction, t: f64, x: &[f64]) -> Option<Result<f64, CliError>> {
    let c = match &v.kind {
        PotentialKind::Zero => 0.0,
        PotentialKind::Constant { value } => *value,
        _ => return None,
    };
    Some(psi.heat_semigroup(&v.space, t, x).map(|u| (-c * t).exp() * u).map_err(CliError::from))
}

pub fn run(cfg: &FkSuiteConfig, seed: u64) -> Result<Artifacts, CliError> {
    let v = &cfg.potential;
    let x = match &cfg.x {
        Some(c) => point(&v.space, c)?,
        None => v.space.base_point(),
    };
    let root = Substreams::new(seed).named("fk");
    let mut art = Artifacts::with_table("fk", FK_CSV_HEADER);
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        let fk_cfg = FkConfig {
            n_paths: cfg.n_paths,
            seed: root.child(ti as u64).seed(),
            integrator: cfg.integrator,
        };
        let est = fk_evaluate(v, &cfg.psi, &x, t, &fk_cfg)?;
        let with = |r: BoundReport| r.param("t", t).with_witness(x.clone(), x.clone());
        if let Some(lambda) = cfg.eigenvalue {
            let reference = (-t * lambda).exp() * cfg.psi.eval(&x);
            art.report(with(
                agreement("fk_eigen_oracle", reference, est.value, 0.0, cfg.relative_tolerance * reference.abs())
                    .param("lambda", lambda)
                    .param("mc_stderr", est.stderr),
            ));
        } else if let Some(exact) = exact_kernel(v, &cfg.psi, t, &x) {
            art.report(with(agreement("fk_exact_kernel", exact?, est.value, est.stderr, 1e-12)));
        }
        let ceiling = if v.negative_part_terms().is_empty() {
            Some(1.0)
        } else {
            c_exp_bound(v, t).ok().map(|c| c.bound_on_c_exp).filter(|c| c.is_finite())
        };
        if let Some(c) = ceiling {
            art.report(with(BoundReport::check(
                "fk_sup_bound",
                c * cfg.psi.sup_norm(),
                est.value.abs(),
                est.stderr,
                0.0,
            )));
        }
        let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        art.row(format!(
            "\"{}\",{t},{},{},{},{},{},{}",
            coords.join(";"),
            est.value,
            est.stderr,
            est.n_paths,
            est.epsilon.map(|e| e.to_string()).unwrap_or_default(),
            est.grid_step,
            est.seed
        ));
        art.record(&est);
        if !cfg.truncation_levels.is_empty() {
            art.record(&truncation_ladder(v, &cfg.psi, &x, t, &cfg.truncation_levels, &fk_cfg)?);
        }
    }
    Ok(art)
}
