//! Desk-scale nonlinear stability run of the coupled system from a small
//! random perturbation. A run that trips the integrator growth guard or
//! leaves the allowed envelope stops early and reports growth.

use kinsusp_core::integrator::{RunConfig, Scheme, Stepper};
use kinsusp_core::operators::Engine;
use kinsusp_core::state::{flow_norm, random_state, KineticState, Lattice, Params};
use kinsusp_core::volterra::critical_constants;
use kinsusp_core::Error;
use serde_json::json;

use super::{smooth_profile, table, Check, Evaluation, Experiment, Series};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::table::Table;

pub struct NonlinearStability;

struct Setup {
    params: Params,
    dt: f64,
    t_end: f64,
    record_every: usize,
    scheme: u32,
    amplitude: f64,
    sobolev: f64,
}

fn setup(cfg: &Config) -> Result<Setup> {
    let (_, gc) = critical_constants();
    let gamma = cfg.params.gamma.unwrap_or(1.0);
    let nu = cfg.params.nu.unwrap_or(1e-2);
    if !(nu > 0.0) {
        return Err(CliError::Config("nonlinear-stability needs nu > 0".into()));
    }
    let iota = match cfg.params.iota {
        Some(i) => i,
        None if gamma != 0.0 => -cfg.experiment.strength.unwrap_or(0.8) * gc * 2.0 * std::f64::consts::PI / gamma.abs(),
        None => return Err(CliError::Config("gamma = 0 needs an explicit params.iota".into())),
    };
    let params = Params {
        gamma,
        iota,
        nu,
        kmax: cfg.params.kmax.unwrap_or(2),
        lmax: cfg.params.lmax.unwrap_or(12),
    };
    params.validate()?;
    Ok(Setup {
        params,
        dt: cfg.run.dt.unwrap_or(0.01),
        t_end: cfg.run.t_end.unwrap_or(20.0 / nu.sqrt()),
        record_every: cfg.run.record_every.unwrap_or(50),
        scheme: cfg.run.scheme.unwrap_or(2),
        amplitude: cfg.experiment.amplitude.unwrap_or(0.1) * nu.powf(1.5),
        sobolev: cfg.experiment.sobolev.unwrap_or(1.0),
    })
}

/// `sup ‖ψ‖ / ‖ψ_in‖` allowed before the run counts as growing.
fn envelope(nu: f64) -> f64 {
    10.0 / nu.sqrt()
}

const COLUMNS: [&str; 7] = ["t", "psi_l2", "u_hs", "u_l2", "mass_abs", "reality_defect", "divergence_defect"];

impl Experiment for NonlinearStability {
    fn name(&self) -> &'static str {
        "nonlinear-stability"
    }

    fn tolerances(&self) -> &'static [(&'static str, f64)] {
        &[("flow_decay", 1e-3)]
    }

    fn produce(&self, cfg: &Config, seed: u64) -> Result<Series> {
        let s = setup(cfg)?;
        let engine = Engine::new(&s.params)?;
        let mut rc = RunConfig::new(s.dt, s.t_end);
        rc.scheme = Scheme::from_order(s.scheme)?;
        let stepper = Stepper::new(&engine, &rc)?;
        let mut state = random_state(Lattice::new(s.params.kmax), s.params.lmax, seed, |_, l| smooth_profile(l));
        let n0 = state.l2_norm();
        state.scale(s.amplitude / n0);
        let psi_in = state.l2_norm();
        let bound = envelope(s.params.nu) * psi_in;

        let mut out = Table::new(&COLUMNS);
        let record = |st: &KineticState, out: &mut Table| -> Result<()> {
            let flow = stepper.flow(st)?;
            out.push(vec![
                st.t,
                st.l2_norm(),
                flow_norm(&flow, s.sobolev),
                flow_norm(&flow, 0.0),
                st.mass().norm(),
                st.reality_defect(),
                flow.divergence_defect(),
            ]);
            Ok(())
        };
        record(&state, &mut out)?;
        let steps = rc.steps();
        let n = steps.len();
        let mut growth = false;
        for (i, dt) in steps.into_iter().enumerate() {
            match stepper.step(&state, dt) {
                Ok(next) => state = next,
                Err(Error::Unstable { .. }) => {
                    growth = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
            let over = !(state.l2_norm() <= bound);
            if over || (i + 1) % s.record_every == 0 || i + 1 == n {
                record(&state, &mut out)?;
            }
            if over {
                growth = true;
                break;
            }
        }
        let mut status = Table::new(&["psi_in", "bound", "growth_detected", "t_stop"]);
        status.push(vec![psi_in, bound, if growth { 1.0 } else { 0.0 }, state.t]);
        let mut series = Series::new();
        series.insert("trajectory".into(), out);
        series.insert("status".into(), status);
        Ok(series)
    }

    fn evaluate(&self, cfg: &Config, _seed: u64, series: &Series) -> Result<Evaluation> {
        let s = setup(cfg)?;
        let status = table(series, "status")?;
        let psi_in = status.column("psi_in")?[0];
        let growth = status.column("growth_detected")?[0] != 0.0;
        let tr = table(series, "trajectory")?;
        let t = tr.column("t")?;
        let psi = tr.column("psi_l2")?;
        let u = tr.column("u_hs")?;
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sup_ratio = max(&psi) / psi_in;
        let u_peak = max(&u);
        let u_final = *u.last().unwrap_or(&f64::NAN);
        let t_stop = *t.last().unwrap_or(&0.0);
        let completed = !growth && t_stop >= s.t_end - 1e-9;
        let mass_drift = tr
            .column("mass_abs")?
            .iter()
            .map(|m| (m - tr.rows[0][4]).abs())
            .fold(0.0, f64::max);
        let checks = vec![
            Check::at_most(11, "sup_psi_over_psi_in", sup_ratio, envelope(s.params.nu)),
            Check::at_most(11, "final_over_peak_flow_norm", u_final / u_peak, cfg.tolerance(self.tolerances(), "flow_decay")),
            Check::at_least(11, "reached_t_end", if completed { 1.0 } else { 0.0 }, 1.0),
        ];
        Ok(Evaluation {
            summary: json!({
                "growth_detected": growth,
                "iota": s.params.iota,
                "psi_in": psi_in,
                "sup_psi_over_psi_in": sup_ratio,
                "envelope": envelope(s.params.nu),
                "flow_peak": u_peak,
                "flow_final": u_final,
                "t_stop": t_stop,
                "max_mass_drift": mass_drift,
                "max_reality_defect": max(&tr.column("reality_defect")?),
                "max_divergence_defect": max(&tr.column("divergence_defect")?),
            }),
            checks,
        })
    }
}
