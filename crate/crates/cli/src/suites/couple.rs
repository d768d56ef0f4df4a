//! `couple`: coupling maximality table, marginal KS tests and the
//! equivalence ladder.

use kato_core::coupling::{check_equivalence_ladder, check_maximality, run_couplings, Strategy, MAXIMALITY_CSV_HEADER};
use kato_core::functions::TestFunction;
use kato_core::numerics::normal_cdf;
use kato_core::report::BoundReport;
use kato_core::stats::ks_test;
use kato_core::{Point, StateSpace, Substreams};
use serde::{Deserialize, Serialize};

use super::agreement;
use crate::artifacts::Artifacts;
use crate::config::{all_positive, positive, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupleConfig {
    pub run: RunOptions,
    pub dim: usize,
    pub strategy: Strategy,
    /// Start points are `±separation/2` along the first axis.
    pub separations: Vec<f64>,
    /// Survival times; the horizon is the largest.
    pub t_grid: Vec<f64>,
    pub n_runs: usize,
    pub grid_step: f64,
    pub allowance: f64,
    /// Significance level of the marginal KS tests; 0 skips them.
    pub ks_significance: f64,
    pub ladder_alphas: Vec<f64>,
    pub ladder_family: Vec<TestFunction>,
}

impl Default for CoupleConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            dim: 1,
            strategy: Strategy::Reflection,
            separations: vec![2.0],
            t_grid: vec![0.25, 0.5, 1.0],
            n_runs: 100_000,
            grid_step: 0.25,
            allowance: 1e-3,
            ks_significance: 1e-3,
            ladder_alphas: vec![0.25, 0.5, 0.75],
            ladder_family: vec![
                TestFunction::HalfSpace {
                    normal: vec![1.0],
                    offset: 0.0,
                },
                TestFunction::Tanh {
                    normal: vec![1.0],
                    scale: 0.5,
                },
            ],
        }
    }
}

impl SuiteConfig for CoupleConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        if self.dim == 0 {
            return Err("dim must be positive".into());
        }
        all_positive("separations", &self.separations)?;
        all_positive("t_grid", &self.t_grid)?;
        positive("grid_step", self.grid_step)?;
        if self.n_runs < 10_000 {
            return Err(format!("n_runs must be at least 10000, got {}", self.n_runs));
        }
        if !(self.allowance >= 0.0) {
            return Err(format!("allowance must be non-negative, got {}", self.allowance));
        }
        if !(0.0..1.0).contains(&self.ks_significance) {
            return Err(format!("ks_significance must lie in [0, 1), got {}", self.ks_significance));
        }
        if let Some(a) = self.ladder_alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(format!("ladder_alphas must lie in (0, 1], got {a}"));
        }
        for f in &self.ladder_family {
            let n = match f {
                TestFunction::HalfSpace { normal, .. } | TestFunction::Tanh { normal, .. } => normal.len(),
                TestFunction::Ball { center, .. }
                | TestFunction::ExpRadial { center, .. }
                | TestFunction::Gaussian { center, .. } => center.len(),
                TestFunction::Sign { axis } if *axis >= self.dim => return Err(format!("ladder_family: axis {axis} >= dim")),
                _ => self.dim,
            };
            if n != self.dim {
                return Err(format!("ladder_family: function of dimension {n} on a {}-dimensional space", self.dim));
            }
        }
        Ok(())
    }
}

pub fn run(cfg: &CoupleConfig, seed: u64) -> Result<Artifacts, CliError> {
    let space = StateSpace::euclidean(cfg.dim);
    let horizon = cfg.t_grid.iter().cloned().fold(0.0, f64::max);
    let root = Substreams::new(seed).named("couple");
    let mut art = Artifacts::with_table("couple", MAXIMALITY_CSV_HEADER);
    for (k, &sep) in cfg.separations.iter().enumerate() {
        let mut xv = vec![0.0; cfg.dim];
        let mut yv = vec![0.0; cfg.dim];
        xv[0] = 0.5 * sep;
        yv[0] = -0.5 * sep;
        let (x, y) = (Point::new(xv), Point::new(yv));
        let stats = run_couplings(cfg.strategy, &space, &x, &y, horizon, cfg.grid_step, cfg.n_runs, &root.child(k as u64))?;
        let check = check_maximality(&stats, &cfg.t_grid, cfg.allowance)?;
        for row in &check.rows {
            art.row(row.csv());
            art.record(row);
            if cfg.strategy == Strategy::Reflection {
                art.report(
                    agreement("coupling_maximality", row.tv_sup_b, row.p_tau_gt_t, row.stderr, cfg.allowance)
                        .param("separation", sep)
                        .param("t", row.t),
                );
            }
        }
        art.extend(check.reports);

        if cfg.ks_significance > 0.0 {
            let sd = (2.0 * horizon).sqrt();
            for (leg, ends, start) in [("x", &stats.end_x, &x), ("y", &stats.end_y, &y)] {
                for c in 0..cfg.dim {
                    let v: Vec<f64> = ends.iter().map(|e| e[c]).collect();
                    let ks = ks_test(&v, |u| normal_cdf((u - start[c]) / sd));
                    art.report(
                        BoundReport::check("coupling_marginal_ks", ks.p_value, cfg.ks_significance, 0.0, 0.0)
                            .param("leg", leg)
                            .param("coordinate", c as u64)
                            .param("separation", sep)
                            .param("t", horizon)
                            .param("statistic", ks.statistic),
                    );
                }
            }
        }
        if !cfg.ladder_family.is_empty() {
            art.extend(check_equivalence_ladder(&stats, horizon, &cfg.ladder_alphas, &cfg.ladder_family)?);
        }
    }
    Ok(art)
}
