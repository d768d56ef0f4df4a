//! `moments`: Monte Carlo distance moments against exact values.

use kato_core::{StateSpace, Substreams};
use serde::{Deserialize, Serialize};

use super::agreement;
use crate::artifacts::Artifacts;
use crate::config::{all_positive, non_empty, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsConfig {
    pub run: RunOptions,
    pub spaces: Vec<StateSpace>,
    pub t_grid: Vec<f64>,
    pub orders: Vec<u32>,
    pub n_samples: usize,
    /// Deterministic allowance on top of three standard errors, relative to the exact moment.
    pub relative_allowance: f64,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            spaces: vec![StateSpace::euclidean(1), StateSpace::euclidean(3), StateSpace::unit_sphere()],
            t_grid: vec![0.1, 0.5, 1.0],
            orders: vec![2, 4],
            n_samples: 100_000,
            relative_allowance: 1e-3,
        }
    }
}

impl SuiteConfig for MomentsConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        non_empty("spaces", &self.spaces)?;
        all_positive("t_grid", &self.t_grid)?;
        non_empty("orders", &self.orders)?;
        if let Some(o) = self.orders.iter().find(|&&o| o != 2 && o != 4) {
            return Err(format!("orders: only 2 and 4 are supported, got {o}"));
        }
        if self.n_samples < 10_000 {
            return Err(format!("n_samples must be at least 10000, got {}", self.n_samples));
        }
        Ok(())
    }
}

pub fn run(cfg: &MomentsConfig, seed: u64) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::reports_table("moments");
    let root = Substreams::new(seed).named("moments");
    for (si, space) in cfg.spaces.iter().enumerate() {
        let label = serde_json::to_string(&space.kind).expect("space is serializable");
        let x = space.base_point();
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            for &order in &cfg.orders {
                let streams = root.child(si as u64).child(ti as u64).child(order as u64);
                let est = space.moment_check(t, &x, order, cfg.n_samples, streams)?;
                let exact = space.exact_distance_moment(t, order)?;
                art.report(
                    agreement("distance_moment", exact, est.mean, est.stderr, cfg.relative_allowance * exact)
                        .param("space", label.as_str())
                        .param("t", t)
                        .param("order", order),
                );
                art.record(&est);
            }
        }
    }
    Ok(art)
}
