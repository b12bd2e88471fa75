//! Experiment configuration: a TOML file with `[params]`, `[run]`,
//! `[schedule]` and `[experiment]` sections. Every key is optional; each
//! experiment fills in its own defaults. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub gamma: Option<f64>,
    pub iota: Option<f64>,
    pub nu: Option<f64>,
    pub kmax: Option<usize>,
    #[serde(rename = "L")]
    pub lmax: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub record_every: Option<usize>,
    /// Time-stepping order, 1 or 2.
    pub scheme: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(rename = "B")]
    pub b: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub nu_list: Option<Vec<f64>>,
    /// Fit window; its unit is documented per experiment.
    pub window: Option<[f64; 2]>,
    /// Named pass/fail tolerances, checked against each experiment's list.
    pub tolerances: Option<BTreeMap<String, f64>>,
    /// Number of seeded samples or trajectories.
    pub seeds: Option<usize>,
    /// Lattice index `n` of the probed wave vector `k = 2π n`.
    pub mode: Option<[i32; 3]>,
    /// Multiples of `Γ_c` (for example the puller scan points).
    pub multiples: Option<Vec<f64>>,
    /// Bisection bracket in multiples of `Γ_c`.
    pub bracket: Option<[f64; 2]>,
    /// Strength `γ|ι|/|k|` in multiples of `Γ_c`.
    pub strength: Option<f64>,
    /// Prefactor of the initial amplitude `a ν^{3/2}`.
    pub amplitude: Option<f64>,
    pub interpolation_samples: Option<usize>,
    pub commutator_samples: Option<usize>,
    /// Sobolev index of the flow norm.
    pub sobolev: Option<f64>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Range checks that do not depend on the experiment.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(g) = self.params.gamma {
            if !(-1.0..=1.0).contains(&g) {
                return bad(format!("params.gamma = {g} outside [-1, 1]"));
            }
        }
        if let Some(nu) = self.params.nu {
            if !(nu >= 0.0) {
                return bad(format!("params.nu = {nu} must be nonnegative"));
            }
        }
        if let Some(dt) = self.run.dt {
            if !(dt > 0.0) {
                return bad(format!("run.dt = {dt} must be positive"));
            }
        }
        if let Some(s) = self.run.scheme {
            if s != 1 && s != 2 {
                return bad(format!("run.scheme = {s} must be 1 or 2"));
            }
        }
        if self.run.record_every == Some(0) {
            return bad("run.record_every must be at least 1".into());
        }
        if let Some(b) = self.schedule.b {
            if !(b > 0.0) {
                return bad(format!("schedule.B = {b} must be positive"));
            }
        }
        if let Some(list) = &self.experiment.nu_list {
            if list.is_empty() || list.iter().any(|v| !(*v > 0.0)) {
                return bad("experiment.nu_list needs positive entries".into());
            }
        }
        if let Some([a, b]) = self.experiment.window {
            if !(a < b) {
                return bad(format!("experiment.window = [{a}, {b}] is empty"));
            }
        }
        Ok(())
    }

    /// Tolerance `name`, rejecting names the experiment does not know.
    pub fn tolerance(&self, known: &[(&str, f64)], name: &str) -> f64 {
        let default = known
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .expect("tolerance listed by the experiment");
        self.experiment
            .tolerances
            .as_ref()
            .and_then(|t| t.get(name).copied())
            .unwrap_or(default)
    }

    pub fn check_tolerance_names(&self, known: &[(&str, f64)]) -> Result<()> {
        if let Some(t) = &self.experiment.tolerances {
            for name in t.keys() {
                if !known.iter().any(|(n, _)| n == name) {
                    let names: Vec<&str> = known.iter().map(|(n, _)| *n).collect();
                    return Err(CliError::Config(format!(
                        "unknown tolerance `{name}` (expected one of {names:?})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Resolved tolerance table for the manifest.
    pub fn tolerances(&self, known: &[(&str, f64)]) -> BTreeMap<String, f64> {
        known
            .iter()
            .map(|(n, _)| (n.to_string(), self.tolerance(known, n)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn gamma_out_of_range_is_rejected() {
        let e = Config::parse("[params]\ngamma = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("gamma"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let e = Config::parse("[params]\nnu = 0.1\n\n[run]\ndtt = 0.1\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("dtt"), "{msg}");
        assert!(msg.contains("line 5"), "{msg}");
        assert!(Config::parse("[extra]\na = 1\n").is_err());
    }

    #[test]
    fn sections_parse() {
        let cfg = Config::parse(
            "[params]\nL = 12\nkmax = 2\n[schedule]\nB = 0.02\n[experiment]\nnu_list = [1e-2, 3e-3]\ntolerances = { slope = 0.2 }\n",
        )
        .unwrap();
        assert_eq!(cfg.params.lmax, Some(12));
        assert_eq!(cfg.schedule.b, Some(0.02));
        let known = [("slope", 0.1)];
        assert_eq!(cfg.tolerance(&known, "slope"), 0.2);
        assert!(cfg.check_tolerance_names(&known).is_ok());
        assert!(cfg.check_tolerance_names(&[("other", 1.0)]).is_err());
    }
}
