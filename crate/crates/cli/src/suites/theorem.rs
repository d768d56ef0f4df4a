//! `theorem`: the Hölder smoothing estimate for `e^{-tH_V}` over a
//! deterministic pair grid.

use kato_core::bounds::{quotient_sup, verify_main_theorem, Route};
use kato_core::fk::{ActionIntegrator, FkConfig};
use kato_core::functions::TestFunction;
use kato_core::potential::{Potential, PotentialKind};
use kato_core::report::BoundReport;
use kato_core::Substreams;
use serde::{Deserialize, Serialize};

use super::{agreement, PairGridSpec};
use crate::artifacts::Artifacts;
use crate::config::{all_positive, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteSpec {
    MonteCarlo,
    ExactKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremConfig {
    pub run: RunOptions,
    pub potential: Potential,
    pub function: TestFunction,
    pub alpha: f64,
    pub t_grid: Vec<f64>,
    pub route: RouteSpec,
    pub n_paths: usize,
    pub integrator: ActionIntegrator,
    pub pairs: PairGridSpec,
    /// Agreement of the zero-potential reduction with the heat-semigroup quotient.
    pub reduction_tolerance: f64,
}

impl Default for TheoremConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            potential: Potential::hydrogen(),
            function: TestFunction::Gaussian {
                center: vec![0.0; 3],
                width: 1.0,
            },
            alpha: 0.5,
            t_grid: vec![0.5, 1.0],
            route: RouteSpec::MonteCarlo,
            n_paths: 10_000,
            integrator: ActionIntegrator::default(),
            pairs: PairGridSpec {
                centers: vec![vec![0.0; 3], vec![1.0, 0.0, 0.0]],
                center_count: 0,
                scale: 2.0,
                levels: 6,
            },
            reduction_tolerance: 1e-10,
        }
    }
}

impl SuiteConfig for TheoremConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        self.potential.validate().map_err(|e| format!("potential: {e}"))?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        all_positive("t_grid", &self.t_grid)?;
        if self.route == RouteSpec::MonteCarlo && self.n_paths == 0 {
            return Err("n_paths must be positive".into());
        }
        if self.route == RouteSpec::ExactKernel && !matches!(self.potential.kind, PotentialKind::Zero | PotentialKind::Constant { .. }) {
            return Err("route exact_kernel needs a zero or constant potential".into());
        }
        self.pairs.validate()
    }
}

pub fn run(cfg: &TheoremConfig, seed: u64) -> Result<Artifacts, CliError> {
    let v = &cfg.potential;
    let root = Substreams::new(seed).named("theorem");
    let mut art = Artifacts::reports_table("theorem");
    for (ti, &t) in cfg.t_grid.iter().enumerate() {
        let pairs = cfg.pairs.build(&v.space, t)?;
        let route = match cfg.route {
            RouteSpec::ExactKernel => Route::ExactKernel,
            RouteSpec::MonteCarlo => Route::MonteCarlo(FkConfig {
                n_paths: cfg.n_paths,
                seed: root.child(ti as u64).seed(),
                integrator: cfg.integrator,
            }),
        };
        let check = verify_main_theorem(v, &cfg.function, cfg.alpha, t, &pairs, route)?;
        if matches!(v.kind, PotentialKind::Zero) {
            let (q, _) = quotient_sup(&v.space, t, cfg.alpha, &cfg.function, &pairs)?;
            art.report(
                agreement("theorem_zero_potential_reduction", q, check.max_quotient, 0.0, cfg.reduction_tolerance)
                    .param("t", t)
                    .param("alpha", cfg.alpha),
            );
            art.report(BoundReport::check("theorem_zero_potential_a", 0.0, check.a.value, 0.0, 0.0).param("t", t));
        }
        art.record(&serde_json::json!({
            "t": t,
            "alpha": cfg.alpha,
            "pairs": pairs.len(),
            "holder_cap": check.holder_cap,
            "max_quotient": check.max_quotient,
            "a": check.a,
        }));
        art.extend(check.reports);
    }
    Ok(art)
}
