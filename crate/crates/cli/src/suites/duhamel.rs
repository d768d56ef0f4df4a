//! `duhamel`: perturbation-identity residuals over panel halvings.

use kato_core::duhamel::{duhamel_residual, smooth_bump, DuhamelGrid};
use kato_core::potential::{Potential, PotentialKind};
use kato_core::report::BoundReport;
use kato_core::StateSpace;
use serde::{Deserialize, Serialize};

use crate::artifacts::Artifacts;
use crate::config::{positive, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuhamelConfig {
    pub run: RunOptions,
    /// Bounded potential on `euclidean(1)`.
    pub potential: Potential,
    /// Width of the smooth bump `Ψ`.
    pub psi_width: f64,
    pub t: f64,
    pub grid: DuhamelGrid,
    /// Panel counts, each the double of the previous.
    pub panels: Vec<usize>,
    pub min_ratio: f64,
    /// Residuals below this count as converged.
    pub floor: f64,
}

impl Default for DuhamelConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            potential: Potential {
                space: StateSpace::euclidean(1),
                kind: PotentialKind::Bump {
                    center: vec![0.0],
                    width: 1.5,
                    height: 3.0,
                },
            },
            psi_width: 1.0,
            t: 0.5,
            grid: DuhamelGrid::default(),
            panels: vec![4, 8, 16, 32],
            min_ratio: 3.5,
            floor: 1e-10,
        }
    }
}

impl SuiteConfig for DuhamelConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        self.potential.validate().map_err(|e| format!("potential: {e}"))?;
        positive("psi_width", self.psi_width)?;
        positive("t", self.t)?;
        positive("min_ratio", self.min_ratio)?;
        if self.panels.len() < 2 {
            return Err("panels needs at least two entries".into());
        }
        if self.panels[0] == 0 || self.panels.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(format!("panels must be positive and successively doubled, got {:?}", self.panels));
        }
        Ok(())
    }
}

pub fn run(cfg: &DuhamelConfig, _seed: u64) -> Result<Artifacts, CliError> {
    let psi = |x: f64| smooth_bump(x, cfg.psi_width);
    let mut art = Artifacts::with_table("duhamel", "n_panels,residual,ratio");
    let mut prev: Option<f64> = None;
    for &p in &cfg.panels {
        let grid = DuhamelGrid { n_panels: p, ..cfg.grid };
        let r = duhamel_residual(&cfg.potential, &psi, cfg.t, &grid)?;
        let ratio = prev.map(|q| q / r);
        art.row(format!("{p},{r},{}", ratio.map(|q| q.to_string()).unwrap_or_default()));
        art.record(&serde_json::json!({"n_panels": p, "residual": r, "t": cfg.t}));
        if let Some(q) = prev {
            art.report(
                BoundReport::check("duhamel_convergence", q / cfg.min_ratio, r, 0.0, cfg.floor)
                    .param("n_panels", p as u64)
                    .param("previous_residual", q)
                    .param("min_ratio", cfg.min_ratio),
            );
        }
        prev = Some(r);
    }
    Ok(art)
}
