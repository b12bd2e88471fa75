//! Enhanced dissipation: single-mode runs without flow at several `ν`, an
//! exponential fit of `‖g(t)‖` per run and a log-log fit of rate against `ν`.

use kinsusp_core::exec::{self, ExecPolicy};
use kinsusp_core::fit::{fit_decay, linear_fit, DecayModel};
use kinsusp_core::integrator::{solve_single_mode_with, RunConfig, Scheme};
use kinsusp_core::sphere::SphField;
use serde_json::json;

use super::{norm, rng, smooth_profile, table, wave, Check, Evaluation, Experiment, Series};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::table::Table;

pub struct EnhancedDissipation;

const DEFAULT_NU: [f64; 4] = [1e-2, 3e-3, 1e-3, 3e-4];

fn nu_list(cfg: &Config) -> Vec<f64> {
    cfg.experiment.nu_list.clone().unwrap_or_else(|| DEFAULT_NU.to_vec())
}

/// Fit window in `h = t (ν|k|)^{1/2}`.
fn window(cfg: &Config) -> [f64; 2] {
    cfg.experiment.window.unwrap_or([4.0, 10.0])
}

fn band_limit(cfg: &Config, nu: f64) -> usize {
    cfg.params.lmax.unwrap_or(if nu >= 3e-3 { 64 } else { 96 })
}

impl Experiment for EnhancedDissipation {
    fn name(&self) -> &'static str {
        "enhanced-dissipation"
    }

    fn tolerances(&self) -> &'static [(&'static str, f64)] {
        &[("slope", 0.1)]
    }

    fn produce(&self, cfg: &Config, seed: u64) -> Result<Series> {
        let k = wave(cfg.experiment.mode.unwrap_or([0, 0, 1]));
        let kn = norm(k);
        if kn == 0.0 {
            return Err(CliError::Config("experiment.mode must be nonzero".into()));
        }
        let h_end = window(cfg)[1];
        let g0 = SphField::random(6, &mut rng(seed, 0), smooth_profile);
        let runs = exec::map_slice(ExecPolicy::current(), &nu_list(cfg), |&nu| -> Result<Table> {
            let lmax = band_limit(cfg, nu);
            let mut rc = RunConfig::new(cfg.run.dt.unwrap_or(0.05 / kn), cfg.run.t_end.unwrap_or(h_end / (nu * kn).sqrt()));
            rc.record_every = cfg.run.record_every.unwrap_or(20);
            rc.scheme = Scheme::from_order(cfg.run.scheme.unwrap_or(2))?;
            let mut t = Table::new(&["nu", "L", "t", "norm"]);
            solve_single_mode_with(k, &g0.resized(lmax), None, nu, &rc, |tt, g| {
                t.push(vec![nu, lmax as f64, tt, g.norm()]);
                Ok(())
            })?;
            Ok(t)
        });
        let mut decay = Table::new(&["nu", "L", "t", "norm"]);
        for t in runs {
            decay.rows.extend(t?.rows);
        }
        let mut series = Series::new();
        series.insert("decay".into(), decay);
        Ok(series)
    }

    fn evaluate(&self, cfg: &Config, _seed: u64, series: &Series) -> Result<Evaluation> {
        let kn = norm(wave(cfg.experiment.mode.unwrap_or([0, 0, 1])));
        let [h0, h1] = window(cfg);
        let decay = table(series, "decay")?;
        let mut rates = Vec::new();
        for nu in decay.distinct("nu")? {
            let run = decay.filter_eq("nu", nu)?;
            let s = (nu * kn).sqrt();
            let (t, y): (Vec<f64>, Vec<f64>) = run
                .column("t")?
                .into_iter()
                .zip(run.column("norm")?)
                .filter(|(t, _)| (h0..=h1 + 1e-9).contains(&(t * s)))
                .unzip();
            let f = fit_decay(&t, &y, DecayModel::Exponential)?;
            rates.push((nu, f.value, f.stderr));
        }
        let lx: Vec<f64> = rates.iter().map(|r| r.0.ln()).collect();
        let ly: Vec<f64> = rates.iter().map(|r| r.1.ln()).collect();
        let (intercept, slope, _, slope_err) = linear_fit(&lx, &ly)?;
        let checks = vec![Check::within(4, "rate_vs_nu_slope", slope, 0.5, cfg.tolerance(self.tolerances(), "slope"))];
        Ok(Evaluation {
            summary: json!({
                "slope": slope,
                "slope_stderr": slope_err,
                "prefactor": intercept.exp(),
                "rates": rates.iter().map(|(nu, r, e)| json!({ "nu": nu, "rate": r, "stderr": e, "rate_over_sqrt_nu": r / nu.sqrt() })).collect::<Vec<_>>(),
            }),
            checks,
        })
    }
}
