//! Structural self-test: transform round trips, invariants of a small coupled
//! run, the exact `k = 0` heat mode and second-order self-convergence.

use kinsusp_core::integrator::{RunConfig, Stepper};
use kinsusp_core::operators::{Engine, PhysGrid};
use kinsusp_core::sphere::{SphField, SphTransform};
use kinsusp_core::state::{random_state, KineticState, Lattice, Params};
use kinsusp_core::C64;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use super::{rng, smooth_profile, table, Check, Evaluation, Experiment, Series};
use crate::config::Config;
use crate::error::Result;
use crate::table::Table;

pub struct TransformsSelftest;

const BAND_LIMITS: [usize; 3] = [8, 16, 32];
const LATTICES: [usize; 2] = [1, 2];
/// Time steps of the convergence study, the last one the reference.
const CONVERGENCE_DT: [f64; 3] = [0.02, 0.01, 0.0025];

fn params(cfg: &Config) -> Params {
    Params {
        gamma: cfg.params.gamma.unwrap_or(1.0),
        iota: cfg.params.iota.unwrap_or(-1.0),
        nu: cfg.params.nu.unwrap_or(1e-2),
        kmax: cfg.params.kmax.unwrap_or(1),
        lmax: cfg.params.lmax.unwrap_or(8),
    }
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn round_trips(seed: u64) -> Result<Table> {
    let mut out = Table::new(&["kind", "size", "max_error"]);
    let mut r = rng(seed, 10);
    for l in BAND_LIMITS {
        let t = SphTransform::for_band_limit(l);
        let f = SphField::random(l, &mut r, |_| 1.0);
        let back = t.analyze(&t.synthesize(&f)?, l)?;
        out.push(vec![0.0, l as f64, max_diff(f.coeffs(), back.coeffs())]);
    }
    for km in LATTICES {
        let lat = Lattice::new(km);
        let g = PhysGrid::for_kmax(km);
        let mut c: Vec<C64> = (0..lat.len())
            .map(|_| C64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)))
            .collect();
        c[0].im = 0.0;
        let vals = g.to_physical(&lat, |n| match lat.locate(n) {
            Some((s, true)) => c[s].conj(),
            Some((s, false)) => c[s],
            None => C64::new(0.0, 0.0),
        });
        let back = g.to_lattice(&lat, vals);
        out.push(vec![1.0, km as f64, max_diff(&c, &back)]);
    }
    Ok(out)
}

fn initial(p: &Params, seed: u64) -> KineticState {
    let mut s = random_state(Lattice::new(p.kmax), p.lmax, seed, |_, l| smooth_profile(l));
    let n = s.l2_norm();
    s.scale(0.1 / n);
    // A nonzero total mass, so its conservation is not trivially zero.
    s.modes_mut()[0].set(0, 0, C64::new(0.05, 0.0));
    s
}

fn invariants(p: &Params, seed: u64, dt: f64, t_end: f64) -> Result<Table> {
    let engine = Engine::new(p)?;
    let rc = RunConfig::new(dt, t_end);
    let stepper = Stepper::new(&engine, &rc)?;
    let mut s = initial(p, seed);
    let mut out = Table::new(&["t", "mass_re", "mass_im", "reality_defect", "divergence_defect", "psi_l2"]);
    let mut record = |s: &KineticState| -> Result<()> {
        let flow = stepper.flow(s)?;
        let m = s.mass();
        out.push(vec![s.t, m.re, m.im, s.reality_defect(), flow.divergence_defect(), s.l2_norm()]);
        Ok(())
    };
    record(&s)?;
    for dt in rc.steps() {
        s = stepper.step(&s, dt)?;
        record(&s)?;
    }
    Ok(out)
}

fn heat_mode(p: &Params, seed: u64, dt: f64, t_end: f64) -> Result<Table> {
    let engine = Engine::new(p)?;
    let rc = RunConfig {
        record_every: 10,
        ..RunConfig::new(dt, t_end)
    };
    let stepper = Stepper::new(&engine, &rc)?;
    let mut s = KineticState::zeros(Lattice::new(p.kmax), p.lmax);
    let mut f = SphField::random(p.lmax, &mut rng(seed, 11), |_| 1.0);
    f.make_real();
    s.modes_mut()[0] = f;
    let mut out = Table::new(&["t", "index", "re", "im"]);
    let push = |s: &KineticState, out: &mut Table| {
        for (i, c) in s.modes()[0].coeffs().iter().enumerate() {
            out.push(vec![s.t, i as f64, c.re, c.im]);
        }
    };
    push(&s, &mut out);
    let steps = rc.steps();
    let n = steps.len();
    for (i, dt) in steps.into_iter().enumerate() {
        s = stepper.step(&s, dt)?;
        if (i + 1) % rc.record_every == 0 || i + 1 == n {
            push(&s, &mut out);
        }
    }
    Ok(out)
}

fn convergence(p: &Params, seed: u64, t_end: f64) -> Result<Table> {
    let engine = Engine::new(p)?;
    let mut out = Table::new(&["dt", "slot", "index", "re", "im"]);
    for dt in CONVERGENCE_DT {
        let rc = RunConfig::new(dt, t_end);
        let stepper = Stepper::new(&engine, &rc)?;
        let mut s = initial(p, seed);
        for h in rc.steps() {
            s = stepper.step(&s, h)?;
        }
        for (slot, f) in s.modes().iter().enumerate() {
            for (i, c) in f.coeffs().iter().enumerate() {
                out.push(vec![dt, slot as f64, i as f64, c.re, c.im]);
            }
        }
    }
    Ok(out)
}

impl Experiment for TransformsSelftest {
    fn name(&self) -> &'static str {
        "transforms-selftest"
    }

    fn tolerances(&self) -> &'static [(&'static str, f64)] {
        &[
            ("round_trip", 1e-12),
            ("mass", 1e-12),
            ("heat", 1e-8),
            ("structure", 1e-12),
            ("order_ratio", 0.6),
        ]
    }

    fn produce(&self, cfg: &Config, seed: u64) -> Result<Series> {
        let p = params(cfg);
        p.validate()?;
        let dt = cfg.run.dt.unwrap_or(0.01);
        let t_end = cfg.run.t_end.unwrap_or(1.0);
        let mut series = Series::new();
        series.insert("round_trip".into(), round_trips(seed)?);
        series.insert("invariants".into(), invariants(&p, seed, dt, t_end)?);
        series.insert("heat_mode".into(), heat_mode(&p, seed, dt, t_end)?);
        series.insert("convergence".into(), convergence(&p, seed, 0.5 * t_end)?);
        Ok(series)
    }

    fn evaluate(&self, cfg: &Config, _seed: u64, series: &Series) -> Result<Evaluation> {
        let tol = |n| cfg.tolerance(self.tolerances(), n);
        let p = params(cfg);
        let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);

        let rt = table(series, "round_trip")?;
        let sphere_rt = max(rt.filter_eq("kind", 0.0)?.column("max_error")?);
        let lattice_rt = max(rt.filter_eq("kind", 1.0)?.column("max_error")?);

        let inv = table(series, "invariants")?;
        let (mre, mim) = (inv.column("mass_re")?, inv.column("mass_im")?);
        let mass0 = C64::new(mre[0], mim[0]);
        let mass_drift = max(mre.iter().zip(&mim).map(|(a, b)| (C64::new(*a, *b) - mass0).norm()).collect());
        let reality = max(inv.column("reality_defect")?);
        let divergence = max(inv.column("divergence_defect")?);

        let heat = table(series, "heat_mode")?;
        let start = heat.filter_eq("t", 0.0)?;
        let c0: Vec<C64> = start.rows.iter().map(|r| C64::new(r[2], r[3])).collect();
        let heat_err = max(
            heat.rows
                .iter()
                .map(|r| {
                    let l = (r[1] as f64).sqrt().floor();
                    let exact = c0[r[1] as usize] * (-p.nu * l * (l + 1.0) * r[0]).exp();
                    (C64::new(r[2], r[3]) - exact).norm()
                })
                .collect(),
        );

        let conv = table(series, "convergence")?;
        let states: Vec<Table> = CONVERGENCE_DT.iter().map(|dt| conv.filter_eq("dt", *dt)).collect::<Result<_>>()?;
        let dist = |a: &Table, b: &Table| -> f64 {
            a.rows
                .iter()
                .zip(&b.rows)
                .map(|(x, y)| {
                    let w = if x[1] == 0.0 { 1.0 } else { 2.0 };
                    w * (C64::new(x[3], x[4]) - C64::new(y[3], y[4])).norm_sqr()
                })
                .sum::<f64>()
                .sqrt()
        };
        let e1 = dist(&states[0], &states[2]);
        let e2 = dist(&states[1], &states[2]);
        let ratio = e1 / e2;

        let checks = vec![
            Check::at_most(12, "sphere_round_trip", sphere_rt, tol("round_trip")),
            Check::at_most(12, "lattice_round_trip", lattice_rt, tol("round_trip")),
            Check::at_most(12, "mass_drift", mass_drift, tol("mass")),
            Check::at_most(12, "heat_mode_error", heat_err, tol("heat")),
            Check::at_most(12, "max_reality_defect", reality, tol("structure")),
            Check::at_most(12, "max_divergence_defect", divergence, tol("structure")),
            Check::within(12, "self_convergence_ratio", ratio, 4.0, tol("order_ratio")),
        ];
        Ok(Evaluation {
            summary: json!({
                "max_round_trip_error": sphere_rt.max(lattice_rt),
                "sphere_round_trip_error": sphere_rt,
                "lattice_round_trip_error": lattice_rt,
                "mass_drift": mass_drift,
                "heat_mode_error": heat_err,
                "max_reality_defect": reality,
                "max_divergence_defect": divergence,
                "self_convergence_errors": [e1, e2],
                "self_convergence_ratio": ratio,
            }),
            checks,
        })
    }
}
