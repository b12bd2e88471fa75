//! Hypocoercivity audit: the scalar energy inequality along seeded
//! single-mode trajectories, the interpolation inequality on random
//! triples and the commutator identity on random band-limited fields.

use std::collections::BTreeMap;

use kinsusp_core::exec::{self, ExecPolicy};
use kinsusp_core::hypo::{lemma22_check, Hypo, HypoSchedule};
use kinsusp_core::integrator::{solve_single_mode_with, RunConfig, Scheme};
use kinsusp_core::sphere::{commutator_residual, interpolation_gap, SphField, SphTransform};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use super::{norm, rng, smooth_profile, table, wave, Check, Evaluation, Experiment, Series};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::table::Table;

pub struct HypoCheck;

const TRAJECTORY_STREAM: u64 = 0;
const INTERPOLATION_STREAM: u64 = 1000;
const COMMUTATOR_STREAM: u64 = 1001;

fn unit_vector(r: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(r));
        let n = norm(v);
        if n > 1e-3 {
            return v.map(|c| c / n);
        }
    }
}

fn trajectories(cfg: &Config, seed: u64) -> Result<(Table, Table)> {
    let k = wave(cfg.experiment.mode.unwrap_or([0, 0, 1]));
    let kn = norm(k);
    let nu = cfg.params.nu.unwrap_or(1e-3);
    if kn == 0.0 || !(nu > 0.0) {
        return Err(CliError::Config("hypo-check needs a nonzero mode and nu > 0".into()));
    }
    let lmax = cfg.params.lmax.unwrap_or(64);
    let hypo = Hypo::new(k, nu, lmax, HypoSchedule::new(cfg.schedule.b.unwrap_or(0.01)))?;
    let mut rc = RunConfig::new(cfg.run.dt.unwrap_or(0.005), cfg.run.t_end.unwrap_or(3.0 / (nu * kn).sqrt()));
    rc.record_every = cfg.run.record_every.unwrap_or(4);
    rc.scheme = Scheme::from_order(cfg.run.scheme.unwrap_or(2))?;
    let count = cfg.experiment.seeds.unwrap_or(20);
    let runs = exec::map_range(ExecPolicy::current(), count, |i| -> Result<(Table, Table)> {
        let g0 = SphField::random(8, &mut rng(seed, TRAJECTORY_STREAM + i as u64), smooth_profile).resized(lmax);
        let (mut times, mut fields) = (Vec::new(), Vec::new());
        solve_single_mode_with(k, &g0, None, nu, &rc, |t, g| {
            times.push(t);
            fields.push(g.clone());
            Ok(())
        })?;
        let report = lemma22_check(&hypo, &times, &fields, None)?;
        let mut rows = Table::new(&["run", "t", "h", "energy", "d_reduced", "d_full", "residual"]);
        for r in &report.rows {
            rows.push(vec![i as f64, r.t, r.h, r.energy, r.d_reduced, r.d_full, r.residual]);
        }
        let mut energy = Table::new(&["run", "t", "energy"]);
        for (t, g) in times.iter().zip(&fields) {
            let p = hypo.spectral(g)?;
            energy.push(vec![i as f64, *t, hypo.energy_form_spectral(&p, &p, *t).re]);
        }
        Ok((rows, energy))
    });
    let mut lemma = Table::new(&["run", "t", "h", "energy", "d_reduced", "d_full", "residual"]);
    let mut energy = Table::new(&["run", "t", "energy"]);
    for r in runs {
        let (a, b) = r?;
        lemma.rows.extend(a.rows);
        energy.rows.extend(b.rows);
    }
    Ok((lemma, energy))
}

fn interpolation(cfg: &Config, seed: u64) -> Result<Table> {
    let mut r = rng(seed, INTERPOLATION_STREAM);
    let mut out = Table::new(&["sample", "L", "sigma", "e0", "e1", "e2", "lhs", "gap"]);
    for i in 0..cfg.experiment.interpolation_samples.unwrap_or(200) {
        let lmax = r.random_range(1..=24usize);
        let decay = r.random_range(0.0..3.0);
        let mut g = SphField::random(lmax, &mut r, |l| (1.0 + l as f64).powf(-decay));
        let n = g.norm();
        g = g * (1.0 / n);
        // `1 − U[0, 1)` lies in `(0, 1]`.
        let sigma = 1.0 - r.random::<f64>();
        let e = unit_vector(&mut r);
        let gap = interpolation_gap(&g, sigma, e)?;
        out.push(vec![i as f64, lmax as f64, sigma, e[0], e[1], e[2], sigma.sqrt() * g.norm_sqr(), gap]);
    }
    Ok(out)
}

fn commutator(cfg: &Config, seed: u64) -> Result<Table> {
    let mut r = rng(seed, COMMUTATOR_STREAM);
    let mut transforms: BTreeMap<usize, SphTransform> = BTreeMap::new();
    let mut out = Table::new(&["sample", "L", "e0", "e1", "e2", "lhs_norm", "rhs_norm", "relative_residual"]);
    for i in 0..cfg.experiment.commutator_samples.unwrap_or(50) {
        let lmax = r.random_range(2..=16usize);
        let y = SphField::random(lmax, &mut r, |l| 1.0 / (1.0 + l as f64));
        let e = unit_vector(&mut r);
        let t = transforms
            .entry(lmax)
            .or_insert_with(|| SphTransform::for_band_limit(lmax + 2));
        let rep = commutator_residual(&y, e, t)?;
        out.push(vec![i as f64, lmax as f64, e[0], e[1], e[2], rep.lhs_norm, rep.rhs_norm, rep.relative_residual]);
    }
    Ok(out)
}

impl Experiment for HypoCheck {
    fn name(&self) -> &'static str {
        "hypo-check"
    }

    fn tolerances(&self) -> &'static [(&'static str, f64)] {
        &[("energy_slack", 1e-6), ("interpolation_slack", 1e-10), ("commutator", 1e-8)]
    }

    fn produce(&self, cfg: &Config, seed: u64) -> Result<Series> {
        let (lemma, energy) = trajectories(cfg, seed)?;
        let mut series = Series::new();
        series.insert("lemma".into(), lemma);
        series.insert("energy".into(), energy);
        series.insert("interpolation".into(), interpolation(cfg, seed)?);
        series.insert("commutator".into(), commutator(cfg, seed)?);
        Ok(series)
    }

    fn evaluate(&self, cfg: &Config, _seed: u64, series: &Series) -> Result<Evaluation> {
        let tol = |n| cfg.tolerance(self.tolerances(), n);
        let lemma = table(series, "lemma")?;
        let energy = table(series, "energy")?;
        let (mut worst_residual, mut worst_increase) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut per_run = Vec::new();
        for run in energy.distinct("run")? {
            let e = energy.filter_eq("run", run)?.column("energy")?;
            let e0 = e[0];
            let inc = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max) / e0;
            let res = lemma
                .filter_eq("run", run)?
                .column("residual")?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
                / e0;
            worst_residual = worst_residual.max(res);
            worst_increase = worst_increase.max(inc);
            per_run.push(json!({ "run": run, "max_residual_over_e0": res, "max_energy_increase_over_e0": inc }));
        }
        let min_gap = table(series, "interpolation")?
            .column("gap")?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let max_comm = table(series, "commutator")?
            .column("relative_residual")?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let checks = vec![
            Check::at_most(6, "max_residual_over_e0", worst_residual, tol("energy_slack")),
            Check::at_most(6, "max_energy_increase_over_e0", worst_increase, tol("energy_slack")),
            Check::at_least(7, "min_interpolation_gap", min_gap, -tol("interpolation_slack")),
            Check::at_most(8, "max_commutator_residual", max_comm, tol("commutator")),
        ];
        Ok(Evaluation {
            summary: json!({
                "trajectories": per_run,
                "max_residual_over_e0": worst_residual,
                "max_energy_increase_over_e0": worst_increase,
                "min_interpolation_gap": min_gap,
                "max_commutator_residual": max_comm,
            }),
            checks,
        })
    }
}
