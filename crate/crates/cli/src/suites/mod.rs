pub mod couple;
pub mod duhamel;
pub mod fk;
pub mod holder;
pub mod kato;
pub mod kernel;
pub mod khashminskii;
pub mod molecule;
pub mod moments;
pub mod theorem;

use kato_core::bounds::{default_centers, pair_grid, Pair};
use kato_core::report::BoundReport;
use kato_core::{Point, StateSpace};
use serde::{Deserialize, Serialize};

use crate::CliError;

impl From<kato_core::Error> for CliError {
    fn from(e: kato_core::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

/// Two-sided check `|measured - reference| ≤ 3 stderr + tolerance`.
pub fn agreement(name: &str, reference: f64, measured: f64, stderr: f64, tolerance: f64) -> BoundReport {
    BoundReport::check(name, 0.0, (measured - reference).abs(), stderr, tolerance)
        .param("reference", reference)
        .param("measured", measured)
}

pub fn point(space: &StateSpace, coords: &[f64]) -> Result<Point, CliError> {
    let p = Point::new(coords.to_vec());
    space.validate(&p)?;
    Ok(p)
}

/// Deterministic pair set: explicit centers, or the default line/meridian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairGridSpec {
    /// Explicit centers; empty selects `default_centers`.
    pub centers: Vec<Vec<f64>>,
    pub center_count: usize,
    /// Largest separation in units of `√t`.
    pub scale: f64,
    pub levels: u32,
}

impl Default for PairGridSpec {
    fn default() -> Self {
        Self {
            centers: Vec::new(),
            center_count: 16,
            scale: 2.0,
            levels: 12,
        }
    }
}

impl PairGridSpec {
    pub fn validate(&self) -> Result<(), String> {
        crate::config::positive("pairs.scale", self.scale)?;
        if self.centers.is_empty() && self.center_count == 0 {
            return Err("pairs: need centers or center_count > 0".into());
        }
        Ok(())
    }

    pub fn build(&self, space: &StateSpace, t: f64) -> Result<Vec<Pair>, CliError> {
        let centers = if self.centers.is_empty() {
            default_centers(space, t, self.center_count)
        } else {
            self.centers.iter().map(|c| point(space, c)).collect::<Result<_, _>>()?
        };
        Ok(pair_grid(space, &centers, self.scale * t.sqrt(), self.levels)?)
    }
}
