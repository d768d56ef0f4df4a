//! `kernel-checks`: conservativeness, symmetry, Chapman-Kolmogorov and the
//! sphere polar law.

use kato_core::report::BoundReport;
use kato_core::space::chapman_kolmogorov_residual_1d;
use kato_core::rng::par_map;
use kato_core::stats::ks_test;
use kato_core::{Point, StateSpace, Substreams};
use serde::{Deserialize, Serialize};

use crate::artifacts::Artifacts;
use crate::config::{all_positive, non_empty, positive, RunOptions, SuiteConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChapmanKolmogorov {
    pub s: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelChecksConfig {
    pub run: RunOptions,
    pub spaces: Vec<StateSpace>,
    pub t_grid: Vec<f64>,
    pub mass_tolerance: f64,
    pub symmetry_tolerance: f64,
    pub chapman_kolmogorov: ChapmanKolmogorov,
    /// Samples for the sphere polar-law KS test; 0 skips it.
    pub ks_samples: usize,
    pub ks_t_grid: Vec<f64>,
    pub ks_significance: f64,
}

impl Default for KernelChecksConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            spaces: vec![StateSpace::euclidean(1), StateSpace::euclidean(3), StateSpace::unit_sphere()],
            t_grid: vec![0.05, 0.25, 0.5, 1.0, 4.0],
            mass_tolerance: 1e-8,
            symmetry_tolerance: 1e-12,
            chapman_kolmogorov: ChapmanKolmogorov {
                s: 0.3,
                t: 0.7,
                x: 0.2,
                y: -0.5,
                tolerance: 1e-8,
            },
            ks_samples: 20_000,
            ks_t_grid: vec![0.1, 0.5, 1.0],
            ks_significance: 1e-3,
        }
    }
}

impl Default for ChapmanKolmogorov {
    fn default() -> Self {
        KernelChecksConfig::default().chapman_kolmogorov
    }
}

impl SuiteConfig for KernelChecksConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
    fn validate(&self) -> Result<(), String> {
        non_empty("spaces", &self.spaces)?;
        all_positive("t_grid", &self.t_grid)?;
        positive("mass_tolerance", self.mass_tolerance)?;
        if self.ks_samples > 0 {
            all_positive("ks_t_grid", &self.ks_t_grid)?;
        }
        positive("chapman_kolmogorov.s", self.chapman_kolmogorov.s)?;
        positive("chapman_kolmogorov.t", self.chapman_kolmogorov.t)?;
        if !(self.ks_significance > 0.0 && self.ks_significance < 1.0) {
            return Err(format!("ks_significance must lie in (0, 1), got {}", self.ks_significance));
        }
        Ok(())
    }
}

fn space_label(s: &StateSpace) -> String {
    serde_json::to_string(&s.kind).expect("space is serializable")
}

/// Point off every symmetry axis of `space`.
fn probe(space: &StateSpace, scale: f64) -> Point {
    let n = space.ambient_dimension();
    let mut v: Vec<f64> = (0..n).map(|i| scale * (0.3 + 0.2 * i as f64)).collect();
    if !space.is_euclidean() {
        let r = space.base_point().norm();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a *= r / norm);
    }
    Point::new(v)
}

pub fn run(cfg: &KernelChecksConfig, seed: u64) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::reports_table("kernel-checks");
    let streams = Substreams::new(seed).named("kernel-checks");
    for space in &cfg.spaces {
        let label = space_label(space);
        let x = probe(space, 1.0);
        let y = probe(space, -0.5);
        for &t in &cfg.t_grid {
            let mass = space.total_mass(t, &x)?;
            art.report(
                BoundReport::check("heat_kernel_mass", cfg.mass_tolerance, (mass - 1.0).abs(), 0.0, 0.0)
                    .param("space", label.as_str())
                    .param("t", t)
                    .param("mass", mass),
            );
            let pxy = space.heat_kernel(t, &x, &y)?;
            let pyx = space.heat_kernel(t, &y, &x)?;
            art.report(
                BoundReport::check(
                    "heat_kernel_symmetry",
                    cfg.symmetry_tolerance * pxy.abs().max(1e-300),
                    (pxy - pyx).abs(),
                    0.0,
                    0.0,
                )
                .param("space", label.as_str())
                .param("t", t)
                .with_witness(x.clone(), y.clone()),
            );
        }
        if !space.is_euclidean() && cfg.ks_samples > 0 {
            let pole = space.base_point();
            let r = pole.norm();
            for (k, &t) in cfg.ks_t_grid.iter().enumerate() {
                let sub = streams.named(&label).child(k as u64);
                let mus: Vec<f64> = par_map(cfg.ks_samples, |i| {
                    let mut rng = sub.stream(i as u64);
                    let z = space.sample_transition(t, &pole, &mut rng);
                    (z[2] / r).clamp(-1.0, 1.0)
                });
                let ks = ks_test(&mus, |mu| space.sphere_polar_cdf(t, mu).unwrap_or(f64::NAN));
                art.report(
                    BoundReport::check("sphere_polar_law_ks", ks.p_value, cfg.ks_significance, 0.0, 0.0)
                        .param("space", label.as_str())
                        .param("t", t)
                        .param("statistic", ks.statistic)
                        .param("n", ks.n as u64),
                );
            }
        }
    }
    let ck = &cfg.chapman_kolmogorov;
    let res = chapman_kolmogorov_residual_1d(ck.t, ck.s, ck.x, ck.y)?;
    art.report(
        BoundReport::check("chapman_kolmogorov", ck.tolerance, res, 0.0, 0.0)
            .param("s", ck.s)
            .param("t", ck.t)
            .param("x", ck.x)
            .param("y", ck.y),
    );
    Ok(art)
}
