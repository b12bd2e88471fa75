//! Kernel envelopes: the `ν = 0` kernel against `C ln(2+t′)/(1+t′)²` with `C`
//! fitted on the first half of the window and tested on the second, and the
//! exponential tail of the diffusive kernel.

use kinsusp_core::fit::{fit_decay, DecayModel};
use kinsusp_core::volterra::{kernel_diffusive, kernel_free, windowed_rms, DiffusiveOptions, TimeGrid};
use kinsusp_core::C64;
use serde_json::json;

use super::{norm, table, wave, Check, Evaluation, Experiment, Series};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::table::Table;

pub struct KernelDecay;

const DT_RESCALED: f64 = 0.02;
const FREE_END: f64 = 100.0;
const FREE_FIT_END: f64 = 50.0;
const DIFFUSIVE_END: f64 = 300.0;
/// RMS envelope width of the oscillating diffusive kernel, rescaled units.
const ENVELOPE: f64 = 5.0;

fn envelope_ratio(t: f64, k: f64) -> f64 {
    k * (1.0 + t).powi(2) / (2.0 + t).ln()
}

/// Tail window of the diffusive fit in rescaled time.
fn tail(cfg: &Config) -> [f64; 2] {
    cfg.experiment.window.unwrap_or([150.0, DIFFUSIVE_END])
}

impl Experiment for KernelDecay {
    fn name(&self) -> &'static str {
        "kernel-decay"
    }

    fn tolerances(&self) -> &'static [(&'static str, f64)] {
        &[]
    }

    fn produce(&self, cfg: &Config, _seed: u64) -> Result<Series> {
        let k = wave(cfg.experiment.mode.unwrap_or([0, 0, 1]));
        let kn = norm(k);
        if kn == 0.0 {
            return Err(CliError::Config("experiment.mode must be nonzero".into()));
        }
        let gamma = cfg.params.gamma.unwrap_or(1.0);
        let iota = cfg.params.iota.unwrap_or(-1.0);
        let nu = cfg.params.nu.unwrap_or(0.05);
        let lmax = cfg.params.lmax.unwrap_or(48);
        let mut series = Series::new();

        let free = kernel_free(k, gamma, iota, TimeGrid::rescaled(kn, DT_RESCALED, FREE_END)?)?;
        let mut t = Table::new(&["t_rescaled", "norm"]);
        for (j, n) in free.norms().into_iter().enumerate() {
            t.push(vec![j as f64 * DT_RESCALED, n]);
        }
        series.insert("free".into(), t);

        let grid = TimeGrid::rescaled(kn, DT_RESCALED, cfg.run.t_end.map_or(DIFFUSIVE_END, |e| e * kn))?;
        let kd = kernel_diffusive(k, gamma, iota, nu, grid, DiffusiveOptions { lmax, substeps: 1 })?;
        let mut t = Table::new(&["t", "norm", "k00_re", "k00_im", "k11_re", "k11_im", "k01_re", "k01_im"]);
        for (j, m) in kd.samples.iter().enumerate() {
            let e = [m[0][0], m[1][1], m[0][1]];
            t.push(vec![
                j as f64 * grid.dt,
                kinsusp_core::volterra::mat3::frobenius(m),
                e[0].re,
                e[0].im,
                e[1].re,
                e[1].im,
                e[2].re,
                e[2].im,
            ]);
        }
        series.insert("diffusive".into(), t);
        Ok(series)
    }

    fn evaluate(&self, cfg: &Config, _seed: u64, series: &Series) -> Result<Evaluation> {
        let kn = norm(wave(cfg.experiment.mode.unwrap_or([0, 0, 1])));
        let nu = cfg.params.nu.unwrap_or(0.05);

        let free = table(series, "free")?;
        let (ft, fnorm) = (free.column("t_rescaled")?, free.column("norm")?);
        let ratio = |keep: &dyn Fn(f64) -> bool| {
            ft.iter()
                .zip(&fnorm)
                .filter(|(t, _)| keep(**t))
                .map(|(t, k)| envelope_ratio(*t, *k))
                .fold(0.0, f64::max)
        };
        let c_fit = ratio(&|t| t <= FREE_FIT_END + 1e-9);
        let c_holdout = ratio(&|t| t > FREE_FIT_END + 1e-9);

        let d = table(series, "diffusive")?;
        let dt_col = d.column("t")?;
        let dt = dt_col[1] - dt_col[0];
        let col = |n: &str| d.column(n);
        let (a, b, c, e, f, g) = (col("k00_re")?, col("k00_im")?, col("k11_re")?, col("k11_im")?, col("k01_re")?, col("k01_im")?);
        let u: Vec<[C64; 3]> = (0..d.len())
            .map(|j| [C64::new(a[j], b[j]), C64::new(c[j], e[j]), C64::new(f[j], g[j])])
            .collect();
        let width = (ENVELOPE / DT_RESCALED).round() as usize;
        let [w0, w1] = tail(cfg);
        let (t, y): (Vec<f64>, Vec<f64>) = windowed_rms(dt, &u, width)
            .into_iter()
            .filter(|(t, _)| (w0 - 1e-9..=w1 + 1e-9).contains(&(t * kn)))
            .unzip();
        let fit = fit_decay(&t, &y, DecayModel::Exponential)?;
        let eta = fit.value / nu.sqrt();
        let checks = vec![
            Check::at_most(9, "free_holdout_envelope_ratio", c_holdout, c_fit),
            Check::above(9, "diffusive_eta", eta, 0.0),
        ];
        Ok(Evaluation {
            summary: json!({
                "free_fitted_c": c_fit,
                "free_holdout_sup_ratio": c_holdout,
                "diffusive_rate": fit.value,
                "diffusive_eta": eta,
                "diffusive_eta_stderr": fit.stderr / nu.sqrt(),
                "diffusive_log_residual": fit.residual,
            }),
            checks,
        })
    }
}
