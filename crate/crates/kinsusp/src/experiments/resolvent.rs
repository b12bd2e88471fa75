//! Volterra machinery: the Neumann resolvent of a high-`|k|` kernel, its
//! identity residual recomputed from the stored tensors, agreement with the
//! direct product-integration solve, and the `O(dt²)` scalar test.

use kinsusp_core::volterra::{
    cauchy_convolve, frame, kernel_free, mat3, resolvent_neumann, volterra_solve, Resolvent, TimeGrid, VolterraKernel,
};
use kinsusp_core::operators::Tensor3;
use kinsusp_core::C64;
use serde_json::json;

use super::{norm, table, wave, Check, Evaluation, Experiment, Series};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::table::Table;

pub struct VolterraResolvent;

const DT_RESCALED: f64 = 0.05;
const T_END_RESCALED: f64 = 100.0;
/// Step sizes of the scalar test; each halves the previous one.
const SCALAR_DT: [f64; 3] = [0.1, 0.05, 0.025];
const SCALAR_T_END: f64 = 5.0;

fn tensor_columns() -> Vec<String> {
    let mut c = vec!["t".to_string()];
    for i in 0..3 {
        for j in 0..3 {
            c.push(format!("re{i}{j}"));
            c.push(format!("im{i}{j}"));
        }
    }
    c
}

fn tensor_table(dt: f64, samples: &[Tensor3]) -> Table {
    let mut t = Table {
        columns: tensor_columns(),
        rows: Vec::new(),
    };
    for (n, m) in samples.iter().enumerate() {
        let mut row = vec![n as f64 * dt];
        for r in m {
            for c in r {
                row.push(c.re);
                row.push(c.im);
            }
        }
        t.push(row);
    }
    t
}

fn tensors_of(t: &Table) -> Result<(f64, Vec<Tensor3>)> {
    if t.columns != tensor_columns() || t.len() < 2 {
        return Err(CliError::Stored("malformed tensor table".into()));
    }
    let dt = t.rows[1][0] - t.rows[0][0];
    let samples = t
        .rows
        .iter()
        .map(|r| std::array::from_fn(|i| std::array::from_fn(|j| C64::new(r[1 + 2 * (3 * i + j)], r[2 + 2 * (3 * i + j)]))))
        .collect();
    Ok((dt, samples))
}

fn vec_diff(a: &[[C64; 3]], b: &[[C64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| mat3::norm3(&std::array::from_fn(|i| x[i] - y[i])))
        .fold(0.0, f64::max)
}

/// Forcing `f(t) = (1 + sin t) e₁` with `e₁ ⊥ k`.
fn forcing(k: [f64; 3], dt: f64, n: usize) -> Result<Vec<[C64; 3]>> {
    let e1 = frame(k)?[0].map(|x| C64::new(x, 0.0));
    Ok((0..n).map(|j| e1.map(|c| c * (1.0 + (j as f64 * dt).sin()))).collect())
}

/// `u + ½∫e^{−(t−τ)}u dτ = 1` has the solution `2/3 + e^{−3t/2}/3`.
fn scalar_exact(t: f64) -> f64 {
    2.0 / 3.0 + (-1.5 * t).exp() / 3.0
}

impl Experiment for VolterraResolvent {
    fn name(&self) -> &'static str {
        "volterra-resolvent"
    }

    fn tolerances(&self) -> &'static [(&'static str, f64)] {
        &[("identity", 1e-8), ("agreement", 1e-8), ("order_ratio", 0.1)]
    }

    fn produce(&self, cfg: &Config, _seed: u64) -> Result<Series> {
        let k = wave(cfg.experiment.mode.unwrap_or([0, 0, 3]));
        let kn = norm(k);
        if kn == 0.0 {
            return Err(CliError::Config("experiment.mode must be nonzero".into()));
        }
        let grid = TimeGrid::rescaled(kn, DT_RESCALED, T_END_RESCALED)?;
        let ker = kernel_free(k, cfg.params.gamma.unwrap_or(1.0), cfg.params.iota.unwrap_or(-3.0), grid)?;
        let r = resolvent_neumann(&ker, 200, 1e-13)?;
        let f = forcing(k, grid.dt, ker.len())?;
        let direct = volterra_solve(&ker, &f)?;

        let mut series = Series::new();
        series.insert("kernel".into(), tensor_table(grid.dt, &ker.samples));
        series.insert("resolvent_half_weighted".into(), tensor_table(grid.dt, &r.half_weighted));
        let mut d = Table::new(&["t", "u0_re", "u0_im", "u1_re", "u1_im", "u2_re", "u2_im"]);
        for (n, u) in direct.iter().enumerate() {
            d.push(vec![n as f64 * grid.dt, u[0].re, u[0].im, u[1].re, u[1].im, u[2].re, u[2].im]);
        }
        series.insert("direct_solution".into(), d);

        let mut s = Table::new(&["dt", "t", "u"]);
        for dt in SCALAR_DT {
            let n = (SCALAR_T_END / dt).round() as usize + 1;
            let ker = VolterraKernel::scalar(dt, n, |t| 0.5 * (-t).exp());
            let one = vec![[C64::new(1.0, 0.0); 3]; n];
            for (j, u) in volterra_solve(&ker, &one)?.iter().enumerate() {
                s.push(vec![dt, j as f64 * dt, u[0].re]);
            }
        }
        series.insert("scalar".into(), s);
        Ok(series)
    }

    fn evaluate(&self, cfg: &Config, _seed: u64, series: &Series) -> Result<Evaluation> {
        let tol = |n| cfg.tolerance(self.tolerances(), n);
        let k = wave(cfg.experiment.mode.unwrap_or([0, 0, 3]));
        let (dt, kernel) = tensors_of(table(series, "kernel")?)?;
        let (_, rbar) = tensors_of(table(series, "resolvent_half_weighted")?)?;
        let mut kbar = kernel.clone();
        kbar[0] = mat3::scale(&kbar[0], C64::new(0.5, 0.0));

        let sup = |s: &[Tensor3]| s.iter().map(mat3::frobenius).fold(0.0, f64::max);
        let kr = cauchy_convolve(&kbar, &rbar, dt);
        let defect: Vec<Tensor3> = rbar
            .iter()
            .zip(&kr)
            .zip(&kbar)
            .map(|((r, c), k)| mat3::sub(&mat3::add(r, c), k))
            .collect();
        let identity = sup(&defect) / sup(&kbar);
        let l1 = dt * kbar.iter().map(mat3::frobenius).sum::<f64>();

        let res = Resolvent {
            dt,
            half_weighted: rbar,
            kernel_half_weighted: kbar,
            kernel: kernel.clone(),
            terms: 0,
            residual: identity,
            l1_norm: l1,
        };
        let f = forcing(k, dt, kernel.len())?;
        let neumann = res.solve(&f);
        let d = table(series, "direct_solution")?;
        let cols: Vec<Vec<f64>> = ["u0_re", "u0_im", "u1_re", "u1_im", "u2_re", "u2_im"]
            .iter()
            .map(|c| d.column(c))
            .collect::<Result<_>>()?;
        let direct: Vec<[C64; 3]> = (0..d.len())
            .map(|n| std::array::from_fn(|a| C64::new(cols[2 * a][n], cols[2 * a + 1][n])))
            .collect();
        let scale = direct.iter().map(mat3::norm3).fold(0.0, f64::max);
        let agreement = vec_diff(&direct, &neumann) / scale;

        let s = table(series, "scalar")?;
        let mut errors = Vec::new();
        for h in s.distinct("dt")? {
            let run = s.filter_eq("dt", h)?;
            let err = run
                .column("t")?
                .iter()
                .zip(run.column("u")?)
                .map(|(t, u)| (u - scalar_exact(*t)).abs())
                .fold(0.0, f64::max);
            errors.push((h, err));
        }
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[0].1 / w[1].1).collect();
        let mut checks = vec![
            Check::below(10, "resolvent_identity_residual", identity, tol("identity")),
            Check::at_most(10, "neumann_vs_direct", agreement, tol("agreement")),
        ];
        for (i, r) in ratios.iter().enumerate() {
            checks.push(Check::within(10, &format!("scalar_refinement_ratio_{i}"), *r, 4.0, tol("order_ratio")));
        }
        Ok(Evaluation {
            summary: json!({
                "kernel_l1_norm": l1,
                "identity_residual": identity,
                "neumann_vs_direct": agreement,
                "scalar_errors": errors.iter().map(|(h, e)| json!({ "dt": h, "max_error": e })).collect::<Vec<_>>(),
                "scalar_ratios": ratios,
            }),
            checks,
        })
    }
}
