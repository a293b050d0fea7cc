//! Experiment drivers for influence allocation games.
//!
//! A figure is a scenario document whose `experiment` block names a sweep. The
//! driver runs every sweep point over seeded Monte Carlo trials and writes one
//! CSV per curve (`sweep value, mean, stderr`) plus a JSON manifest holding the
//! full configuration and seeds. Re-running a manifest reproduces its CSVs byte
//! for byte.

pub mod assets;
pub mod experiment;
pub mod reproduce;
pub mod tables;

pub use experiment::{Column, ExperimentDoc, ExperimentSpec, Sweep};
pub use reproduce::{reproduce, write_outputs, Curve, CurveEntry, Manifest, Point, Reproduction};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "INFLUENCE_LAB_WORKERS";

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> anyhow::Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => anyhow::bail!("{WORKERS_ENV}={v:?} is not a positive integer"),
            Ok(w) => Ok(Some(w)),
        },
        Err(_) => Ok(None),
    }
}
