//! Spectral threshold: the constants `b_c`, `Γ_c`, the pusher crossing found
//! by bisection on the sign of the fitted growth rate, and a puller scan.

use kinsusp_core::volterra::{critical_constants, gamma_c_of, s_of_b, DiffusiveOptions, GrowthProbe, ScanOptions};
use serde_json::json;

use super::{norm, table, wave, Check, Evaluation, Experiment, Series};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::table::Table;

pub struct Threshold;

const B_C_PAPER: f64 = 0.623;

struct Setup {
    k: [f64; 3],
    gamma: f64,
    nu: f64,
    bracket: [f64; 2],
    multiples: Vec<f64>,
    lmax: usize,
}

fn setup(cfg: &Config) -> Result<Setup> {
    let gamma = cfg.params.gamma.unwrap_or(1.0);
    if gamma <= 0.0 {
        return Err(CliError::Config("threshold needs gamma > 0".into()));
    }
    let bracket = cfg.experiment.bracket.unwrap_or([0.8, 1.2]);
    if !(0.0 < bracket[0] && bracket[0] < bracket[1]) {
        return Err(CliError::Config(format!("experiment.bracket = {bracket:?} must be increasing and positive")));
    }
    Ok(Setup {
        k: wave(cfg.experiment.mode.unwrap_or([0, 0, 1])),
        gamma,
        nu: cfg.params.nu.unwrap_or(0.0),
        bracket,
        multiples: cfg.experiment.multiples.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 5.0, 10.0]),
        lmax: cfg.params.lmax.unwrap_or(48),
    })
}

/// `ι` with strength `γ|ι|/|k| = r Γ_c`, negative (pusher) for `r < 0`.
fn iota_of(r: f64, s: &Setup, gc: f64) -> f64 {
    r * gc * norm(s.k) / s.gamma
}

impl Experiment for Threshold {
    fn name(&self) -> &'static str {
        "threshold"
    }

    fn tolerances(&self) -> &'static [(&'static str, f64)] {
        &[("b_c", 1e-3), ("crossing", 0.05)]
    }

    fn produce(&self, cfg: &Config, _seed: u64) -> Result<Series> {
        let s = setup(cfg)?;
        let (b_c, gc) = critical_constants();
        let mut series = Series::new();
        let mut constants = Table::new(&["b_c", "gamma_c", "gamma_c_formula", "s_at_b_c"]);
        constants.push(vec![b_c, gc, gamma_c_of(B_C_PAPER), s_of_b(b_c)?]);
        series.insert("constants".into(), constants);

        let opts = ScanOptions {
            diffusive: (s.nu > 0.0).then_some(DiffusiveOptions { lmax: s.lmax, substeps: 1 }),
            ..ScanOptions::default()
        };
        let probe = GrowthProbe::new(s.k, s.gamma, s.nu, opts)?;
        let mut trail = Table::new(&["iota", "ratio", "rate", "stderr"]);
        let mut record = |r: f64| -> Result<f64> {
            let p = probe.rate(iota_of(-r, &s, gc))?;
            trail.push(vec![p.iota, r, p.rate, p.stderr]);
            Ok(p.rate)
        };
        let [mut lo, mut hi] = s.bracket;
        let rlo = record(lo)?;
        let rhi = record(hi)?;
        if rlo.signum() != rhi.signum() {
            while hi - lo > opts.crossing_tol * hi {
                let mid = 0.5 * (lo + hi);
                if record(mid)?.signum() == rlo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        series.insert("bisection".into(), trail);

        let mut scan = Table::new(&["iota", "ratio", "rate", "stderr"]);
        for r in std::iter::once(-2.0).chain(s.multiples.iter().copied()) {
            let p = probe.rate(iota_of(r, &s, gc))?;
            scan.push(vec![p.iota, r, p.rate, p.stderr]);
        }
        series.insert("scan".into(), scan);
        Ok(series)
    }

    fn evaluate(&self, cfg: &Config, _seed: u64, series: &Series) -> Result<Evaluation> {
        let tol = |n| cfg.tolerance(self.tolerances(), n);
        let c = table(series, "constants")?;
        let (b_c, gc) = (c.column("b_c")?[0], c.column("gamma_c")?[0]);
        let closed = gamma_c_of(b_c);

        // The bracket closest to the sign change: the strongest decaying and
        // the weakest growing pusher in the trail.
        let trail = table(series, "bisection")?;
        let (ratio, rate) = (trail.column("ratio")?, trail.column("rate")?);
        let below = ratio.iter().zip(&rate).filter(|(_, l)| **l < 0.0).map(|(r, _)| *r).fold(f64::NAN, f64::max);
        let above = ratio.iter().zip(&rate).filter(|(_, l)| **l >= 0.0).map(|(r, _)| *r).fold(f64::NAN, f64::min);
        let crossing = if below < above { 0.5 * (below + above) } else { f64::NAN };

        let scan = table(series, "scan")?;
        let (sr, sl) = (scan.column("ratio")?, scan.column("rate")?);
        let puller_max = sr.iter().zip(&sl).filter(|(r, _)| **r > 0.0).map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
        let pusher_2 = sr.iter().zip(&sl).find(|(r, _)| **r == -2.0).map(|(_, l)| *l).unwrap_or(f64::NAN);

        let checks = vec![
            Check::within(1, "b_c", b_c, B_C_PAPER, tol("b_c")),
            Check::at_most(1, "gamma_c_closed_form_rel", ((gc - closed) / closed).abs(), 1e-12),
            Check::within(2, "crossing_over_gamma_c", crossing, 1.0, tol("crossing")),
            Check::above(2, "pusher_rate_at_2_gamma_c", pusher_2, 0.0),
            Check::below(3, "max_puller_rate", puller_max, 0.0),
        ];
        let points: Vec<_> = sr
            .iter()
            .zip(&sl)
            .map(|(r, l)| json!({ "strength_over_gamma_c": r.abs(), "pusher": *r < 0.0, "rate": l }))
            .collect();
        Ok(Evaluation {
            summary: json!({
                "b_c": b_c,
                "gamma_c": gc,
                "crossing_strength_over_gamma_c": crossing,
                "bisection_points": trail.len(),
                "scan": points,
            }),
            checks,
        })
    }
}
