//! Hypocoercive functionals for one Fourier mode of
//! `(∂t + i p·k − νΔp) Y = |k| F`.
//!
//! All functionals are evaluated by quadrature on a padded sphere grid.
//! Tangent vectors are carried as ambient `ℝ³` components.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecPolicy};
use crate::sphere::{gradient_cartesian, tangent_to_cartesian, cartesian_to_tangent, SphField, SphTransform, TangentField};
use crate::{C64, I};

/// `h = (ν|k|)^{1/2} t`.
pub fn rescaled_time(t: f64, kn: f64, nu: f64) -> f64 {
    (nu * kn).sqrt() * t
}

/// Weights `a = A min(h,1)`, `b = B min(h²,1)`, `c = C min(h³,1)` with
/// `A = B^{2/3}`, `C = 100B²/A`, and the vector-field coefficients `α`, `β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypoSchedule {
    pub a_const: f64,
    pub b_const: f64,
    pub c_const: f64,
}

impl Default for HypoSchedule {
    fn default() -> Self {
        Self::new(0.01)
    }
}

impl HypoSchedule {
    pub fn new(b: f64) -> Self {
        let a = b.powf(2.0 / 3.0);
        Self {
            a_const: a,
            b_const: b,
            c_const: 100.0 * b * b / a,
        }
    }

    pub fn a(&self, h: f64) -> f64 {
        self.a_const * h.min(1.0)
    }

    pub fn b(&self, h: f64) -> f64 {
        self.b_const * (h * h).min(1.0)
    }

    pub fn c(&self, h: f64) -> f64 {
        self.c_const * h.powi(3).min(1.0)
    }

    pub fn da(&self, h: f64) -> f64 {
        if h < 1.0 { self.a_const } else { 0.0 }
    }

    pub fn db(&self, h: f64) -> f64 {
        if h < 1.0 { 2.0 * self.b_const * h } else { 0.0 }
    }

    pub fn dc(&self, h: f64) -> f64 {
        if h < 1.0 { 3.0 * self.c_const * h * h } else { 0.0 }
    }

    /// `α(h) = (1 + e^{−2h} e^{2ih})/2`.
    pub fn alpha(&self, h: f64) -> C64 {
        0.5 * (1.0 + decay_phase(h))
    }

    /// `β(h) = ((1+i)/4)(1 − e^{−2h} e^{2ih})`.
    pub fn beta(&self, h: f64) -> C64 {
        C64::new(0.25, 0.25) * (1.0 - decay_phase(h))
    }
}

fn decay_phase(h: f64) -> C64 {
    C64::from_polar((-2.0 * h).exp(), 2.0 * h)
}

/// `χ(x) = 0` for `x ≤ −1/2`, `1` for `x ≥ 0`, quintic smoothstep between.
pub fn chi_profile(x: f64) -> f64 {
    smoothstep((x + 0.5) / 0.5)
}

pub fn chi_profile_deriv(x: f64) -> f64 {
    smoothstep_deriv((x + 0.5) / 0.5) / 0.5
}

/// Companion profile: `1` on `x ≥ −1/2`, `0` on `x ≤ −3/4`.
pub fn chi_tilde_profile(x: f64) -> f64 {
    smoothstep((x + 0.75) / 0.25)
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

fn smoothstep_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// Cutoffs `χ_k(p) = χ(p·k̂)`, `χ̃_k(p) = χ̃(p·k̂)`; the mirror family uses `−k̂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffFamily {
    pub axis: [f64; 3],
}

impl CutoffFamily {
    pub fn new(k: [f64; 3]) -> Result<Self> {
        Ok(Self { axis: unit(k)? })
    }

    pub fn mirror(&self) -> Self {
        Self { axis: self.axis.map(|c| -c) }
    }

    pub fn chi(&self, p: [f64; 3]) -> f64 {
        chi_profile(dot(p, self.axis))
    }

    pub fn chi_tilde(&self, p: [f64; 3]) -> f64 {
        chi_tilde_profile(dot(p, self.axis))
    }

    /// Ambient components of `∇χ_k = χ′(p·k̂) (k̂ − (p·k̂) p)`.
    pub fn grad_chi(&self, p: [f64; 3]) -> [f64; 3] {
        let x = dot(p, self.axis);
        let d = chi_profile_deriv(x);
        std::array::from_fn(|a| d * (self.axis[a] - x * p[a]))
    }

    /// Smallest `C` with `χ + |∇χ| ≤ C χ̃` on the grid, or `None` if `χ̃`
    /// vanishes somewhere `χ` or `∇χ` does not.
    pub fn domination_constant(&self, points: &[[f64; 3]]) -> Option<f64> {
        let mut c: f64 = 0.0;
        for p in points {
            let g = self.grad_chi(*p);
            let lhs = self.chi(*p) + dot(g, g).sqrt();
            let tilde = self.chi_tilde(*p);
            if tilde == 0.0 {
                if lhs != 0.0 {
                    return None;
                }
            } else {
                c = c.max(lhs / tilde);
            }
        }
        Some(c)
    }

    /// Smallest `C` with `|p·k̂ − 1| ≤ C |∇(p·k̂)|²` on `supp χ̃`.
    pub fn localization_constant(&self, points: &[[f64; 3]]) -> f64 {
        points
            .iter()
            .filter(|p| self.chi_tilde(**p) > 0.0)
            .map(|p| {
                let x = dot(*p, self.axis);
                (1.0 - x) / (1.0 - x * x)
            })
            .fold(0.0, f64::max)
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit(k: [f64; 3]) -> Result<[f64; 3]> {
    let n = dot(k, k).sqrt();
    if !(n > 0.0) {
        return Err(Error::Domain("k must be nonzero".into()));
    }
    Ok(k.map(|c| c / n))
}

/// Grid values of `Y`, `∇Y`, `∇(p·k̂) Y` and the two squared second-order
/// densities `|∇²Y|²`, `|∇(∇(p·k̂) Y)|²`.
#[derive(Clone, Debug)]
pub struct Pieces {
    pub y: Vec<C64>,
    pub grad: [Vec<C64>; 3],
    pub wy: [Vec<C64>; 3],
    pub hess_sqr: Vec<f64>,
    pub grad_wy_sqr: Vec<f64>,
}

/// Coefficient-space data for the uncut (`χ ≡ 1`) functionals, all exact:
/// `∇(p·k̂)·∇Y = ½(Δ(xY) − xΔY + 2xY)` with `x = p·k̂`, and
/// `‖∇²Y‖² = ‖ΔY‖² − ‖∇Y‖²` on the unit sphere.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub y: SphField,
    pub xy: SphField,
    /// `∇(p·k̂)·∇Y`.
    pub axis_derivative: SphField,
    pub grad_sqr: f64,
    pub hess_sqr: f64,
    pub wy_sqr: f64,
    pub grad_wy_sqr: f64,
}

/// Evaluation context for one wave vector and viscosity.
#[derive(Debug)]
pub struct Hypo {
    k: [f64; 3],
    kn: f64,
    axis: [f64; 3],
    nu: f64,
    lmax: usize,
    schedule: HypoSchedule,
    t: SphTransform,
    points: Vec<[f64; 3]>,
    x: Vec<f64>,
    w: [Vec<f64>; 3],
}

/// Extra quadrature degree for the non-polynomial cutoff weights.
const CUTOFF_PAD: usize = 32;

impl Hypo {
    pub fn new(k: [f64; 3], nu: f64, lmax: usize, schedule: HypoSchedule) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Domain(format!("nu = {nu} must be positive")));
        }
        let axis = unit(k)?;
        let t = SphTransform::padded(lmax + 2, 2 * lmax + 6 + CUTOFF_PAD);
        let points = t.grid().points();
        let x: Vec<f64> = points.iter().map(|p| dot(*p, axis)).collect();
        let w = std::array::from_fn(|a| points.iter().zip(&x).map(|(p, x)| axis[a] - x * p[a]).collect());
        Ok(Self {
            k,
            kn: dot(k, k).sqrt(),
            axis,
            nu,
            lmax,
            schedule,
            t,
            points,
            x,
            w,
        })
    }

    pub fn k(&self) -> [f64; 3] {
        self.k
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn schedule(&self) -> &HypoSchedule {
        &self.schedule
    }

    pub fn transform(&self) -> &SphTransform {
        &self.t
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn h(&self, t: f64) -> f64 {
        rescaled_time(t, self.kn, self.nu)
    }

    /// `ν/|k|`.
    pub fn nu_rescaled(&self) -> f64 {
        self.nu / self.kn
    }

    fn check(&self, y: &SphField) -> Result<()> {
        if y.lmax() > self.lmax {
            return Err(Error::BandLimit {
                got: y.lmax(),
                max: self.lmax,
            });
        }
        Ok(())
    }

    pub fn pieces(&self, y: &SphField) -> Result<Pieces> {
        self.check(y)?;
        let t = &self.t;
        let grid = t.grid();
        let yv = t.synthesize(y)?;
        let grad = tangent_to_cartesian(&t.gradient(y)?, grid);
        let grad_sqr: Vec<f64> = (0..yv.len()).map(|n| (0..3).map(|a| grad[a][n].norm_sqr()).sum()).collect();

        // Σ_a |∇(∂_a Y)|² = |∇²Y|² + |∇Y|² for ambient components ∂_a Y.
        let ga = gradient_cartesian(y, t)?;
        let mut hess_sqr = vec![0.0; yv.len()];
        for g in &ga {
            for (h, v) in hess_sqr.iter_mut().zip(t.gradient(g)?.abs_sqr()) {
                *h += v;
            }
        }
        for (h, g) in hess_sqr.iter_mut().zip(&grad_sqr) {
            *h = (*h - g).max(0.0);
        }

        // W_a = (k̂_a − (p·k̂) p_a) Y, with Σ_a |∇W_a|² = |∇W|² + |W|².
        let xy = y.mul_cos_axis(self.axis);
        let mut grad_wy_sqr = vec![0.0; yv.len()];
        let mut wy_sqr = vec![0.0; yv.len()];
        for a in 0..3 {
            let mut e = [0.0; 3];
            e[a] = 1.0;
            let mut wa = SphField::zeros(y.lmax() + 2);
            wa.axpy(C64::new(self.axis[a], 0.0), &y.resized(y.lmax() + 2));
            xy.mul_axis_into(e, &mut wa, C64::new(-1.0, 0.0));
            for (h, v) in grad_wy_sqr.iter_mut().zip(t.gradient(&wa)?.abs_sqr()) {
                *h += v;
            }
        }
        let wy: [Vec<C64>; 3] = std::array::from_fn(|a| yv.iter().zip(&self.w[a]).map(|(y, w)| y * w).collect());
        for a in 0..3 {
            for (s, v) in wy_sqr.iter_mut().zip(&wy[a]) {
                *s += v.norm_sqr();
            }
        }
        for (h, s) in grad_wy_sqr.iter_mut().zip(&wy_sqr) {
            *h = (*h - s).max(0.0);
        }
        Ok(Pieces {
            y: yv,
            grad,
            wy,
            hess_sqr,
            grad_wy_sqr,
        })
    }

    pub fn spectral(&self, y: &SphField) -> Result<Spectral> {
        self.check(y)?;
        let xy = y.mul_cos_axis(self.axis);
        let lap = y.laplacian();
        let mut s = xy.laplacian();
        s -= &lap.mul_cos_axis(self.axis);
        s.axpy(C64::new(2.0, 0.0), &xy);
        s *= 0.5;
        let grad_sqr = y.gradient_norm_sqr();
        let wy_sqr = y.norm_sqr() - xy.norm_sqr();
        let mut grad_wy_sqr = -wy_sqr;
        for a in 0..3 {
            let mut e = [0.0; 3];
            e[a] = 1.0;
            let mut wa = y.resized(y.lmax() + 2) * self.axis[a];
            xy.mul_axis_into(e, &mut wa, C64::new(-1.0, 0.0));
            grad_wy_sqr += wa.gradient_norm_sqr();
        }
        Ok(Spectral {
            y: y.clone(),
            xy,
            axis_derivative: s,
            grad_sqr,
            hess_sqr: (lap.norm_sqr() - grad_sqr).max(0.0),
            wy_sqr,
            grad_wy_sqr: grad_wy_sqr.max(0.0),
        })
    }

    /// `E_k(Y, Ỹ)` for `χ ≡ 1` from coefficients.
    pub fn energy_form_spectral(&self, y: &Spectral, z: &Spectral, t: f64) -> C64 {
        let h = self.h(t);
        let s = self.schedule;
        let nr = self.nu_rescaled();
        let yz = y.y.inner(&z.y);
        let grad: C64 = {
            let n = y.y.lmax().min(z.y.lmax());
            (0..=n)
                .map(|l| {
                    let r = l * l..l * l + 2 * l + 1;
                    let d: C64 = y.y.coeffs()[r.clone()].iter().zip(&z.y.coeffs()[r]).map(|(a, b)| a * b.conj()).sum();
                    d * (l * (l + 1)) as f64
                })
                .sum()
        };
        let cross = I * z.axis_derivative.inner(&y.y).conj() - I * y.axis_derivative.inner(&z.y);
        let wyz = yz - y.xy.inner(&z.xy);
        yz + nr.sqrt() * s.a(h) * grad + s.b(h) * cross + s.c(h) / nr.sqrt() * wyz
    }

    pub fn dissipation_spectral(&self, y: &Spectral, t: f64, mode: Dissipation) -> f64 {
        let h = self.h(t);
        let s = self.schedule;
        let nr = self.nu_rescaled();
        let mut d = nr * y.grad_sqr + s.b(h) * y.wy_sqr;
        if mode == Dissipation::Full {
            d += nr.powf(1.5) * s.a(h) * y.hess_sqr + nr.sqrt() * s.c(h) * y.grad_wy_sqr;
        }
        d
    }

    /// Quadrature weights times `χ²` (or the plain weights for `χ ≡ 1`).
    fn weights(&self, chi: Option<&CutoffFamily>) -> Vec<f64> {
        let w = self.t.grid().weights();
        match chi {
            None => w,
            Some(c) => w.iter().zip(&self.points).map(|(w, p)| w * c.chi(*p).powi(2)).collect(),
        }
    }

    fn inner_scalar(wt: &[f64], a: &[C64], b: &[C64]) -> C64 {
        a.iter().zip(b).zip(wt).map(|((a, b), w)| a * b.conj() * *w).sum()
    }

    fn inner_vec(wt: &[f64], a: &[Vec<C64>; 3], b: &[Vec<C64>; 3]) -> C64 {
        (0..3).map(|c| Self::inner_scalar(wt, &a[c], &b[c])).sum()
    }

    fn weighted_sum(wt: &[f64], v: &[f64]) -> f64 {
        v.iter().zip(wt).map(|(v, w)| v * w).sum()
    }

    /// Sesquilinear `E_{χ,k}(Y, Ỹ)` at time `t`.
    pub fn energy_form(&self, y: &Pieces, z: &Pieces, t: f64, chi: Option<&CutoffFamily>) -> C64 {
        let wt = self.weights(chi);
        let h = self.h(t);
        let s = self.schedule;
        let nr = self.nu_rescaled();
        let iwy: [Vec<C64>; 3] = std::array::from_fn(|a| y.wy[a].iter().map(|v| I * v).collect());
        let iwz: [Vec<C64>; 3] = std::array::from_fn(|a| z.wy[a].iter().map(|v| I * v).collect());
        Self::inner_scalar(&wt, &y.y, &z.y)
            + nr.sqrt() * s.a(h) * Self::inner_vec(&wt, &y.grad, &z.grad)
            + s.b(h) * (Self::inner_vec(&wt, &iwy, &z.grad) + Self::inner_vec(&wt, &y.grad, &iwz))
            + s.c(h) / nr.sqrt() * Self::inner_vec(&wt, &y.wy, &z.wy)
    }

    /// `E_{χ,k}(Y) = E_{χ,k}(Y, Y)`.
    pub fn energy_e(&self, y: &SphField, t: f64, chi: Option<&CutoffFamily>) -> Result<f64> {
        if chi.is_none() {
            let p = self.spectral(y)?;
            return Ok(self.energy_form_spectral(&p, &p, t).re);
        }
        let p = self.pieces(y)?;
        Ok(self.energy_form(&p, &p, t, chi).re)
    }

    /// The three terms `‖Yχ‖²`, `(ν/|k|)^{1/2} a ‖∇Yχ‖²`,
    /// `(ν/|k|)^{−1/2} c ‖∇(p·k̂)Yχ‖²` bounding `E` from both sides.
    pub fn energy_diagonal(&self, y: &Pieces, t: f64, chi: Option<&CutoffFamily>) -> f64 {
        let wt = self.weights(chi);
        let h = self.h(t);
        let nr = self.nu_rescaled();
        Self::inner_scalar(&wt, &y.y, &y.y).re
            + nr.sqrt() * self.schedule.a(h) * Self::inner_vec(&wt, &y.grad, &y.grad).re
            + self.schedule.c(h) / nr.sqrt() * Self::inner_vec(&wt, &y.wy, &y.wy).re
    }

    pub fn dissipation_pieces(&self, y: &Pieces, t: f64, chi: Option<&CutoffFamily>, mode: Dissipation) -> f64 {
        let wt = self.weights(chi);
        let h = self.h(t);
        let s = self.schedule;
        let nr = self.nu_rescaled();
        let mut d = nr * Self::inner_vec(&wt, &y.grad, &y.grad).re + s.b(h) * Self::inner_vec(&wt, &y.wy, &y.wy).re;
        if mode == Dissipation::Full {
            d += nr.powf(1.5) * s.a(h) * Self::weighted_sum(&wt, &y.hess_sqr)
                + nr.sqrt() * s.c(h) * Self::weighted_sum(&wt, &y.grad_wy_sqr);
        }
        d
    }

    /// `D_{χ,k}(Y)`; the reduced form drops the two second-order terms.
    pub fn dissipation_d(&self, y: &SphField, t: f64, chi: Option<&CutoffFamily>, mode: Dissipation) -> Result<f64> {
        if chi.is_none() {
            return Ok(self.dissipation_spectral(&self.spectral(y)?, t, mode));
        }
        let p = self.pieces(y)?;
        Ok(self.dissipation_pieces(&p, t, chi, mode))
    }

    /// `J_k g = α ∇g + i(|k|/ν)^{1/2} β ∇(p·k̂) g` on the grid.
    pub fn vector_field_j(&self, g: &SphField, t: f64) -> Result<TangentField> {
        self.vector_field(g, t, 1.0)
    }

    /// Mirror field: `J_k` built with `−k̂`.
    pub fn vector_field_h(&self, g: &SphField, t: f64) -> Result<TangentField> {
        self.vector_field(g, t, -1.0)
    }

    fn vector_field(&self, g: &SphField, t: f64, sign: f64) -> Result<TangentField> {
        let p = self.pieces(g)?;
        Ok(cartesian_to_tangent(&self.j_cartesian(&p, t, sign), self.t.grid()))
    }

    fn j_cartesian(&self, p: &Pieces, t: f64, sign: f64) -> [Vec<C64>; 3] {
        let h = self.h(t);
        let alpha = self.schedule.alpha(h);
        let coef = I * (1.0 / self.nu_rescaled()).sqrt() * self.schedule.beta(h) * sign;
        std::array::from_fn(|a| p.grad[a].iter().zip(&p.wy[a]).map(|(g, w)| alpha * g + coef * w).collect())
    }

    /// `‖J_k g χ‖²`.
    pub fn j_norm_sqr(&self, g: &SphField, t: f64, chi: Option<&CutoffFamily>) -> Result<f64> {
        let p = self.pieces(g)?;
        let j = self.j_cartesian(&p, t, 1.0);
        Ok(Self::inner_vec(&self.weights(chi), &j, &j).re)
    }

    /// `‖J_k g‖² = |α|²‖∇g‖² + (|k|/ν)|β|²‖∇(p·k̂)g‖² + 2 Re(α conj(iβ') ⟨∇g, ∇(p·k̂) g⟩)`
    /// with `β' = (|k|/ν)^{1/2} β`.
    pub fn j_norm_sqr_spectral(&self, g: &Spectral, t: f64) -> f64 {
        let h = self.h(t);
        let alpha = self.schedule.alpha(h);
        let coef = I * (1.0 / self.nu_rescaled()).sqrt() * self.schedule.beta(h);
        let cross = g.axis_derivative.inner(&g.y);
        alpha.norm_sqr() * g.grad_sqr + coef.norm_sqr() * g.wy_sqr + 2.0 * (alpha * coef.conj() * cross).re
    }

    /// `V_k[g] = ∫ g Z ∇(p·k̂) dp`.
    pub fn mixing_v(&self, g: &SphField, z: &SphField) -> Result<[C64; 3]> {
        self.check(g)?;
        let gv = self.t.synthesize(g)?;
        let zv = self.t.synthesize(&z.resized(z.lmax().min(self.t.lmax())))?;
        let prod: Vec<C64> = gv.iter().zip(&zv).map(|(a, b)| a * b).collect();
        Ok(std::array::from_fn(|a| {
            let v: Vec<C64> = prod.iter().zip(&self.w[a]).map(|(p, w)| p * w).collect();
            self.t.integrate(&v)
        }))
    }

    /// Grid values of `∇(p·k̂)`.
    pub fn axis_gradient(&self) -> &[Vec<f64>; 3] {
        &self.w
    }

    pub fn axis_cosine(&self) -> &[f64] {
        &self.x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dissipation {
    Full,
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub t: f64,
    pub h: f64,
    pub energy: f64,
    pub d_reduced: f64,
    pub d_full: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
    pub max_residual: f64,
    pub initial_energy: f64,
    /// `max_i (E_{i+1} − E_i)`, positive if the energy ever increases.
    pub max_energy_increase: f64,
}

impl LemmaReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,h,E,D_reduced,D_full,residual")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.t, r.h, r.energy, r.d_reduced, r.d_full, r.residual
            )?;
        }
        Ok(())
    }
}

/// Residual of the scalar energy inequality along a recorded trajectory,
///
/// `r = ½ dE/dt + |k| a (ν/|k|)^{1/2} ‖g‖² + (5/8)|k| D_reduced − |k| Re E(g, F)`,
///
/// with `dE/dt` from centered differences at interior samples (`χ ≡ 1`).
/// `forcing` holds `F` at the sample times, or `None` for `F = 0`.
pub fn lemma22_check(hypo: &Hypo, times: &[f64], fields: &[SphField], forcing: Option<&[SphField]>) -> Result<LemmaReport> {
    if times.len() != fields.len() {
        return Err(Error::Shape {
            expected: times.len(),
            got: fields.len(),
        });
    }
    if let Some(f) = forcing {
        if f.len() != times.len() {
            return Err(Error::Shape {
                expected: times.len(),
                got: f.len(),
            });
        }
    }
    let kn = hypo.kn;
    let pieces = exec::map_slice(ExecPolicy::current(), fields, |g| hypo.spectral(g))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let energy: Vec<f64> = pieces.iter().zip(times).map(|(p, t)| hypo.energy_form_spectral(p, p, *t).re).collect();
    let mut rows = Vec::new();
    for i in 1..times.len().saturating_sub(1) {
        let t = times[i];
        let h = hypo.h(t);
        let p = &pieces[i];
        let de = (energy[i + 1] - energy[i - 1]) / (times[i + 1] - times[i - 1]);
        let d_reduced = hypo.dissipation_spectral(p, t, Dissipation::Reduced);
        let d_full = hypo.dissipation_spectral(p, t, Dissipation::Full);
        let norm_sqr: f64 = fields[i].norm_sqr();
        let forcing_term = match forcing {
            Some(f) => hypo.energy_form_spectral(p, &hypo.spectral(&f[i])?, t).re,
            None => 0.0,
        };
        let residual = 0.5 * de
            + kn * hypo.schedule.a(h) * hypo.nu_rescaled().sqrt() * norm_sqr
            + 0.625 * kn * d_reduced
            - kn * forcing_term;
        rows.push(LemmaRow {
            t,
            h,
            energy: energy[i],
            d_reduced,
            d_full,
            residual,
        });
    }
    let max_residual = rows.iter().map(|r| r.residual).fold(f64::NEG_INFINITY, f64::max);
    let max_energy_increase = energy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(LemmaReport {
        rows,
        max_residual,
        initial_energy: energy.first().copied().unwrap_or(0.0),
        max_energy_increase,
    })
}

/// One row of the functional time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRow {
    pub t: f64,
    pub h: f64,
    pub energy: f64,
    pub d_reduced: f64,
    pub d_full: f64,
    pub j_norm_sqr: f64,
    pub v_abs: [f64; 3],
}

impl Hypo {
    pub fn functional_row(&self, g: &SphField, t: f64, z: &SphField) -> Result<FunctionalRow> {
        let sp = self.spectral(g)?;
        let v = self.mixing_v(g, z)?;
        Ok(FunctionalRow {
            t,
            h: self.h(t),
            energy: self.energy_form_spectral(&sp, &sp, t).re,
            d_reduced: self.dissipation_spectral(&sp, t, Dissipation::Reduced),
            d_full: self.dissipation_spectral(&sp, t, Dissipation::Full),
            j_norm_sqr: self.j_norm_sqr_spectral(&sp, t),
            v_abs: v.map(|c| c.norm()),
        })
    }
}

pub fn write_functionals_csv<W: Write>(mut w: W, rows: &[FunctionalRow]) -> std::io::Result<()> {
    writeln!(w, "t,h,E,D_reduced,D_full,J_norm_sqr,V_x,V_y,V_z")?;
    for r in rows {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.t, r.h, r.energy, r.d_reduced, r.d_full, r.j_norm_sqr, r.v_abs[0], r.v_abs[1], r.v_abs[2]
        )?;
    }
    Ok(())
}
