//! `molecule`: the molecular pipeline. Base terms, the B constant over an α
//! grid, the α → 1 blow-up fit and calibration of the closed-form estimate.

use std::path::PathBuf;

use kato_core::bounds::{blowup_slope, calibrate_molecular, corollary_b_constant, molecular_base_terms, molecular_bound};
use kato_core::potential::{MolecularPotential, Nucleus, Potential};
use kato_core::report::BoundReport;
use serde::{Deserialize, Serialize};

use super::agreement;
use crate::artifacts::Artifacts;
use crate::config::{all_positive, non_empty, positive, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    /// Measured quotients `(t, q)`, at least two.
    pub measurements: Vec<(f64, f64)>,
    /// Lebesgue exponent of the input space.
    pub r: f64,
    pub alpha: f64,
    pub predict_t: Vec<f64>,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            measurements: Vec::new(),
            r: 2.0,
            alpha: 0.5,
            predict_t: vec![2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoleculeConfig {
    pub run: RunOptions,
    /// Inline molecule; ignored when `molecule_file` is set.
    pub molecule: MolecularPotential,
    pub molecule_file: Option<PathBuf>,
    pub k: f64,
    pub t: f64,
    pub alphas: Vec<f64>,
    /// α grid of the blow-up fit, approaching 1.
    pub sweep_alphas: Vec<f64>,
    pub slope_target: f64,
    pub slope_tolerance: f64,
    pub calibration: Calibration,
}

impl Default for MoleculeConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            molecule: MolecularPotential {
                m: 2,
                nuclei: vec![
                    Nucleus {
                        position: [0.7, 0.0, 0.0],
                        charge: 1.0,
                    },
                    Nucleus {
                        position: [-0.7, 0.0, 0.0],
                        charge: 1.0,
                    },
                ],
            },
            molecule_file: None,
            k: 0.0,
            t: 1.0,
            alphas: vec![0.25, 0.5, 0.75, 0.9, 1.0],
            sweep_alphas: (0..10).map(|i| 0.8 + 0.02 * i as f64).collect(),
            slope_target: -1.0,
            slope_tolerance: 0.1,
            calibration: Calibration::default(),
        }
    }
}

impl MoleculeConfig {
    pub fn resolve_molecule(&self) -> Result<MolecularPotential, String> {
        match &self.molecule_file {
            Some(p) => MolecularPotential::from_file(p).map_err(|e| format!("molecule_file {}: {e}", p.display())),
            None => {
                self.molecule.validate().map_err(|e| format!("molecule: {e}"))?;
                Ok(self.molecule.clone())
            }
        }
    }
}

impl SuiteConfig for MoleculeConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        self.resolve_molecule()?;
        positive("t", self.t)?;
        if !self.k.is_finite() {
            return Err("k must be finite".into());
        }
        non_empty("alphas", &self.alphas)?;
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(format!("alphas must lie in (0, 1], got {a}"));
        }
        if self.sweep_alphas.len() < 3 || self.sweep_alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err("sweep_alphas needs at least 3 values in (0, 1)".into());
        }
        positive("slope_tolerance", self.slope_tolerance)?;
        let c = &self.calibration;
        if !c.measurements.is_empty() {
            if c.measurements.len() < 2 {
                return Err("calibration.measurements needs at least two (t, q) pairs".into());
            }
            if c.measurements.iter().any(|&(t, q)| !(t > 0.0) || !(q > 0.0)) {
                return Err("calibration.measurements must have positive t and q".into());
            }
            if !(c.alpha > 0.0 && c.alpha < 1.0) {
                return Err(format!("calibration.alpha must lie in (0, 1), got {}", c.alpha));
            }
            if !(c.r >= 1.0) {
                return Err(format!("calibration.r must be at least 1, got {}", c.r));
            }
            all_positive("calibration.predict_t", &c.predict_t)?;
        }
        Ok(())
    }
}

pub fn run(cfg: &MoleculeConfig, _seed: u64) -> Result<Artifacts, CliError> {
    let mol = cfg.resolve_molecule().map_err(CliError::Config)?;
    let total = Potential::molecular(mol.clone())?;
    let terms = molecular_base_terms(&mol);
    let mut art = Artifacts::with_table("molecule", "alpha,term_c_sum,c_exp,b,divergent");
    let b_at = |alpha: f64, art: &mut Artifacts| -> Result<(f64, f64), CliError> {
        let b = corollary_b_constant(&total, &terms, cfg.k, alpha, cfg.t)?;
        let sum: f64 = b.term_c.iter().sum();
        art.row(format!("{alpha},{sum},{},{},{}", b.c_exp, b.value, b.divergent));
        art.record(&serde_json::json!({"alpha": alpha, "t": cfg.t, "k": cfg.k, "b": b}));
        Ok((sum, b.value))
    };
    for &alpha in &cfg.alphas {
        b_at(alpha, &mut art)?;
    }
    let mut sums = Vec::new();
    let mut bs = Vec::new();
    for &alpha in &cfg.sweep_alphas {
        let (s, b) = b_at(alpha, &mut art)?;
        sums.push(s);
        bs.push(b);
    }
    for (name, values) in [("molecule_c_blowup_slope", &sums), ("molecule_b_blowup_slope", &bs)] {
        let slope = blowup_slope(&cfg.sweep_alphas, values);
        art.report(
            agreement(name, cfg.slope_target, slope, 0.0, cfg.slope_tolerance)
                .param("t", cfg.t)
                .param("alpha_min", cfg.sweep_alphas.iter().cloned().fold(f64::INFINITY, f64::min))
                .param("alpha_max", cfg.sweep_alphas.iter().cloned().fold(0.0, f64::max)),
        );
    }

    let c = &cfg.calibration;
    if !c.measurements.is_empty() {
        let params = calibrate_molecular(mol.m, c.r, c.alpha, &c.measurements)?;
        for &(t, q) in &c.measurements {
            let bound = molecular_bound(&params, t)?;
            art.report(BoundReport::check("molecular_calibration", bound, q, 0.0, 1e-12 * bound).param("t", t));
        }
        let predictions = c
            .predict_t
            .iter()
            .map(|&t| Ok(serde_json::json!({"t": t, "bound": molecular_bound(&params, t)?})))
            .collect::<Result<Vec<_>, CliError>>()?;
        art.record(&serde_json::json!({"calibration": params, "predictions": predictions}));
    }
    Ok(art)
}
