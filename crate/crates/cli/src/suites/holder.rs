//! `holder`: measured Lipschitz and Hölder quotients of `e^{-tH}f` against
//! `F_K(t)` and `2^{1-α}F_K(t)^α`.

use kato_core::bounds::{holder_quotient, lipschitz_quotient};
use kato_core::functions::TestFunction;
use kato_core::{SpaceKind, StateSpace};
use serde::{Deserialize, Serialize};

use super::{agreement, PairGridSpec};
use crate::artifacts::Artifacts;
use crate::config::{all_positive, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderConfig {
    pub run: RunOptions,
    pub space: StateSpace,
    pub function: TestFunction,
    pub t_grid: Vec<f64>,
    pub alphas: Vec<f64>,
    pub pairs: PairGridSpec,
    /// Relative tolerance of the sharp constant `1/√(πt)` for `sign` on the line.
    pub sharpness_tolerance: f64,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            space: StateSpace::euclidean(1),
            function: TestFunction::Sign { axis: 0 },
            t_grid: vec![0.25, 1.0, 4.0],
            alphas: vec![0.25, 0.5, 0.75, 1.0],
            pairs: PairGridSpec::default(),
            sharpness_tolerance: 0.01,
        }
    }
}

impl SuiteConfig for HolderConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        all_positive("t_grid", &self.t_grid)?;
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(format!("alphas must lie in (0, 1], got {a}"));
        }
        if let (TestFunction::Sign { axis }, n) = (&self.function, self.space.ambient_dimension()) {
            if *axis >= n {
                return Err(format!("function: axis {axis} out of range for dimension {n}"));
            }
        }
        self.pairs.validate()
    }
}

pub fn run(cfg: &HolderConfig, _seed: u64) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::reports_table("holder");
    let sharp = cfg.space.kind == (SpaceKind::Euclidean { dim: 1 }) && matches!(cfg.function, TestFunction::Sign { axis: 0 });
    for &t in &cfg.t_grid {
        let pairs = cfg.pairs.build(&cfg.space, t)?;
        let lip = lipschitz_quotient(&cfg.space, t, &cfg.function, &pairs)?;
        if sharp {
            let exact = 1.0 / (std::f64::consts::PI * t).sqrt();
            art.report(
                agreement("lipschitz_sharp_constant", exact, lip.empirical, 0.0, cfg.sharpness_tolerance * exact).param("t", t),
            );
        }
        art.report(lip);
        for &alpha in &cfg.alphas {
            art.report(holder_quotient(&cfg.space, t, alpha, &cfg.function, &pairs)?);
        }
    }
    Ok(art)
}
