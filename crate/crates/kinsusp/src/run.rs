//! Running experiments and persisting their artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::experiments::{self, Evaluation, Experiment, Series};
use crate::table::Table;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: Config,
    pub code_version: String,
    pub tolerances: std::collections::BTreeMap<String, f64>,
    pub series: Vec<String>,
    /// Wall-clock seconds of `produce`; kept out of the summary.
    pub wall_clock_s: f64,
    pub threads: usize,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub evaluation: Evaluation,
    pub wall_clock_s: f64,
}

/// First 16 hex digits of the SHA-256 of `{experiment, seed, config}` in JSON.
pub fn config_hash(experiment: &str, seed: u64, cfg: &Config) -> Result<String> {
    let canon = serde_json::to_vec(&json!({ "experiment": experiment, "seed": seed, "config": cfg }))?;
    Ok(hex::encode(Sha256::digest(&canon))[..16].to_string())
}

fn resolve(name: &str) -> Result<&'static dyn Experiment> {
    experiments::lookup(name).ok_or_else(|| CliError::UnknownExperiment(name.into()))
}

/// Runs `name` and writes `out/<name>/<hash>/`.
pub fn run_experiment(name: &str, cfg: &Config, seed: u64, out: &Path) -> Result<RunReport> {
    let exp = resolve(name)?;
    cfg.check_tolerance_names(exp.tolerances())?;
    let hash = config_hash(name, seed, cfg)?;
    let start = Instant::now();
    let series = exp.produce(cfg, seed)?;
    let wall_clock_s = start.elapsed().as_secs_f64();
    let evaluation = exp.evaluate(cfg, seed, &series)?;

    let dir = out.join(name).join(&hash);
    let sdir = dir.join("series");
    std::fs::create_dir_all(&sdir)?;
    for (n, t) in &series {
        t.write_csv(&sdir.join(format!("{n}.csv")))?;
    }
    let manifest = Manifest {
        experiment: name.into(),
        seed,
        config_hash: hash.clone(),
        config: cfg.clone(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        tolerances: cfg.tolerances(exp.tolerances()),
        series: series.keys().cloned().collect(),
        wall_clock_s,
        threads: kinsusp_core::exec::current_threads(),
    };
    write_json(&dir.join("manifest.json"), &serde_json::to_value(&manifest)?)?;
    write_json(&dir.join("summary.json"), &summary_json(name, seed, &hash, &evaluation))?;
    Ok(RunReport {
        dir,
        evaluation,
        wall_clock_s,
    })
}

/// Re-evaluates a stored run from its manifest and series.
pub fn check_dir(dir: &Path) -> Result<Evaluation> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| CliError::Stored(format!("{}: {e}", dir.join("manifest.json").display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let exp = resolve(&manifest.experiment)?;
    let mut series = Series::new();
    for n in &manifest.series {
        series.insert(n.clone(), Table::read_csv(&dir.join("series").join(format!("{n}.csv")))?);
    }
    exp.evaluate(&manifest.config, manifest.seed, &series)
}

fn summary_json(name: &str, seed: u64, hash: &str, ev: &Evaluation) -> Value {
    json!({
        "experiment": name,
        "seed": seed,
        "config_hash": hash,
        "pass": ev.passed(),
        "checks": ev.checks,
        "results": ev.summary,
    })
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_every_input() {
        let a = Config::default();
        let b = Config::parse("[params]\nnu = 0.1\n").unwrap();
        let h = config_hash("mixing", 1, &a).unwrap();
        assert_eq!(h.len(), 16);
        assert_eq!(h, config_hash("mixing", 1, &a).unwrap());
        assert_ne!(h, config_hash("mixing", 2, &a).unwrap());
        assert_ne!(h, config_hash("threshold", 1, &a).unwrap());
        assert_ne!(h, config_hash("mixing", 1, &b).unwrap());
    }

    #[test]
    fn unknown_experiment_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = run_experiment("nope", &Config::default(), 1, dir.path()).unwrap_err();
        assert!(matches!(e, CliError::UnknownExperiment(_)));
    }
}
