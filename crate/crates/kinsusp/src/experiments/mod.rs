//! The experiment registry. Each experiment produces named tables and
//! evaluates its pass/fail checks from those tables alone, so a stored run
//! can be re-checked without recomputing anything.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Config;
use crate::error::Result;
use crate::table::Table;

mod enhanced;
mod hypo_check;
mod kernel_decay;
mod mixing;
mod nonlinear;
mod resolvent;
mod selftest;
mod threshold;

/// Named output tables, written as `series/<name>.csv`.
pub type Series = BTreeMap<String, Table>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Acceptance criterion this check belongs to.
    pub criterion: u8,
    pub name: String,
    pub value: f64,
    /// Human-readable bound, e.g. `<= 1e-12`.
    pub limit: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(criterion: u8, name: &str, value: f64, bound: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            limit: format!("<= {bound:e}"),
            pass: value <= bound,
        }
    }

    pub fn at_least(criterion: u8, name: &str, value: f64, bound: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            limit: format!(">= {bound:e}"),
            pass: value >= bound,
        }
    }

    pub fn below(criterion: u8, name: &str, value: f64, bound: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            limit: format!("< {bound:e}"),
            pass: value < bound,
        }
    }

    pub fn above(criterion: u8, name: &str, value: f64, bound: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            limit: format!("> {bound:e}"),
            pass: value > bound,
        }
    }

    pub fn within(criterion: u8, name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            limit: format!("{target} +- {tol}"),
            pass: (value - target).abs() <= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub summary: Value,
    pub checks: Vec<Check>,
}

impl Evaluation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Whether the run stopped on a growing solution.
    pub fn growth_detected(&self) -> bool {
        self.summary
            .get("growth_detected")
            .and_then(Value::as_bool)
            .unwrap_or(false)
    }
}

pub trait Experiment: Sync {
    fn name(&self) -> &'static str;

    /// Tolerance names and defaults accepted in `[experiment.tolerances]`.
    fn tolerances(&self) -> &'static [(&'static str, f64)];

    fn produce(&self, cfg: &Config, seed: u64) -> Result<Series>;

    fn evaluate(&self, cfg: &Config, seed: u64, series: &Series) -> Result<Evaluation>;
}

pub const NAMES: [&str; 8] = [
    "threshold",
    "enhanced-dissipation",
    "mixing",
    "hypo-check",
    "volterra-resolvent",
    "kernel-decay",
    "nonlinear-stability",
    "transforms-selftest",
];

pub fn lookup(name: &str) -> Option<&'static dyn Experiment> {
    let e: &'static dyn Experiment = match name {
        "threshold" => &threshold::Threshold,
        "enhanced-dissipation" => &enhanced::EnhancedDissipation,
        "mixing" => &mixing::Mixing,
        "hypo-check" => &hypo_check::HypoCheck,
        "volterra-resolvent" => &resolvent::VolterraResolvent,
        "kernel-decay" => &kernel_decay::KernelDecay,
        "nonlinear-stability" => &nonlinear::NonlinearStability,
        "transforms-selftest" => &selftest::TransformsSelftest,
        _ => return None,
    };
    Some(e)
}

/// Independent generator for stream `stream` of a run seed.
pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub(crate) fn table<'a>(series: &'a Series, name: &str) -> Result<&'a Table> {
    series
        .get(name)
        .ok_or_else(|| crate::error::CliError::Stored(format!("missing series `{name}`")))
}

/// Axis `k = 2π n` of a lattice index.
pub(crate) fn wave(n: [i32; 3]) -> [f64; 3] {
    kinsusp_core::state::wavevector(n)
}

pub(crate) fn norm(k: [f64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

/// Spectral profile `1/(1+l)²` of the random initial data.
pub(crate) fn smooth_profile(l: usize) -> f64 {
    1.0 / ((1 + l) as f64).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for n in NAMES {
            assert_eq!(lookup(n).unwrap().name(), n);
        }
        assert!(lookup("nope").is_none());
    }

    #[test]
    fn streams_are_independent() {
        use rand::Rng;
        let a: u64 = rng(1, 0).random();
        let b: u64 = rng(1, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, rng(1, 0).random::<u64>());
    }
}
