//! Mixing decay of `|V_k[g(t)]|` for a diffusive single mode without flow,
//! with `Z ≡ 1` and, for comparison, a random smooth real `Z`.

use kinsusp_core::fit::{fit_decay, DecayModel};
use kinsusp_core::hypo::{Hypo, HypoSchedule};
use kinsusp_core::integrator::{solve_single_mode_with, RunConfig, Scheme};
use kinsusp_core::sphere::SphField;
use kinsusp_core::C64;
use serde_json::json;

use super::{norm, rng, smooth_profile, table, wave, Check, Evaluation, Experiment, Series};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::table::Table;

pub struct Mixing;

fn nu(cfg: &Config) -> f64 {
    cfg.params.nu.unwrap_or(1e-4)
}

/// Fit window in `t`; the default is `[1, 0.5 ν^{-1/2}]`.
fn window(cfg: &Config) -> [f64; 2] {
    cfg.experiment.window.unwrap_or([1.0, 0.5 / nu(cfg).sqrt()])
}

fn vnorm(v: [C64; 3]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

impl Experiment for Mixing {
    fn name(&self) -> &'static str {
        "mixing"
    }

    fn tolerances(&self) -> &'static [(&'static str, f64)] {
        &[("exponent", 0.25)]
    }

    fn produce(&self, cfg: &Config, seed: u64) -> Result<Series> {
        let k = wave(cfg.experiment.mode.unwrap_or([0, 0, 1]));
        let kn = norm(k);
        let nu = nu(cfg);
        if kn == 0.0 || !(nu > 0.0) {
            return Err(CliError::Config("mixing needs a nonzero mode and nu > 0".into()));
        }
        let lmax = cfg.params.lmax.unwrap_or(160);
        let hypo = Hypo::new(k, nu, lmax, HypoSchedule::new(cfg.schedule.b.unwrap_or(0.01)))?;
        let g0 = SphField::random(6, &mut rng(seed, 0), smooth_profile).resized(lmax);
        let mut z = SphField::random(4, &mut rng(seed.wrapping_add(1), 0), smooth_profile);
        z.make_real();
        let one = SphField::unit(0, 0, 0) * (4.0 * std::f64::consts::PI).sqrt();

        let [t0, t1] = window(cfg);
        let mut rc = RunConfig::new(cfg.run.dt.unwrap_or(0.05 / kn), cfg.run.t_end.unwrap_or(t1));
        rc.record_every = cfg.run.record_every.unwrap_or(10);
        rc.scheme = Scheme::from_order(cfg.run.scheme.unwrap_or(2))?;
        let mut out = Table::new(&["t", "v_one", "v_random", "norm"]);
        solve_single_mode_with(k, &g0, None, nu, &rc, |t, g| {
            if t >= t0 - 1e-9 {
                out.push(vec![t, vnorm(hypo.mixing_v(g, &one)?), vnorm(hypo.mixing_v(g, &z)?), g.norm()]);
            }
            Ok(())
        })?;
        let mut series = Series::new();
        series.insert("mixing".into(), out);
        Ok(series)
    }

    fn evaluate(&self, cfg: &Config, _seed: u64, series: &Series) -> Result<Evaluation> {
        let [t0, t1] = window(cfg);
        let m = table(series, "mixing")?;
        let t = m.column("t")?;
        let fit = |col: &str| -> Result<_> {
            let (x, y): (Vec<f64>, Vec<f64>) = t
                .iter()
                .copied()
                .zip(m.column(col)?)
                .filter(|(t, _)| *t >= t0 - 1e-9 && *t <= t1 + 1e-9)
                .unzip();
            Ok(fit_decay(&x, &y, DecayModel::Power)?)
        };
        let one = fit("v_one")?;
        let random = fit("v_random")?;
        let checks = vec![Check::within(5, "mixing_exponent", one.value, -1.5, cfg.tolerance(self.tolerances(), "exponent"))];
        Ok(Evaluation {
            summary: json!({
                "window": [t0, t1],
                "exponent_z_one": one.value,
                "exponent_z_one_stderr": one.stderr,
                "log_residual_z_one": one.residual,
                "exponent_z_random": random.value,
                "exponent_z_random_stderr": random.stderr,
            }),
            checks,
        })
    }
}
