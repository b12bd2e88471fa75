//! Mode-by-mode linear stability: velocity kernels, Volterra solves,
//! Neumann resolvents and threshold scans.
//!
//! For a wave vector `k`, linearizing about the isotropic state and
//! eliminating `ψ̂_k` gives `u(t) + ∫₀ᵗ K(t−τ) u(τ) dτ = f(t)` with
//!
//! `K(t) u₀ = (i/|k|²) ∫ (p·k) P_{k⊥} p  S(t)ψ₀ dp`,
//! `ψ₀ = −(3γι/4π) p⊗p : Ê(u₀)`, `Ê(u₀) = (ik⊗u₀ + u₀⊗ik)/2`,
//!
//! where `S(t)` solves `∂t + i p·k − νΔp`. For `ν = 0` this is the scalar
//! `K(t) = (3γι/4) ∫₋₁¹ x²(1−x²) e^{−i|k|t x} dx` on `k⊥`, with `K(0) = γι/5`.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecPolicy};
use crate::fit::{fit_decay, DecayModel};
use crate::integrator::{solve_single_mode_with, RunConfig};
use crate::operators::{second_moment_fields, Tensor3};
use crate::sphere::{gauss_legendre, SphField};
use crate::{C64, FOUR_PI, I};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Small dense helpers for `3×3` complex matrices.
pub mod mat3 {
    use super::{Tensor3, C64, ZERO};

    pub fn zero() -> Tensor3 {
        [[ZERO; 3]; 3]
    }

    pub fn identity() -> Tensor3 {
        let mut m = zero();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn scale(a: &Tensor3, s: C64) -> Tensor3 {
        std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] * s))
    }

    pub fn add(a: &Tensor3, b: &Tensor3) -> Tensor3 {
        std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
    }

    pub fn sub(a: &Tensor3, b: &Tensor3) -> Tensor3 {
        std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] - b[i][j]))
    }

    pub fn mul(a: &Tensor3, b: &Tensor3) -> Tensor3 {
        std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|l| a[i][l] * b[l][j]).sum()))
    }

    pub fn apply(a: &Tensor3, v: &[C64; 3]) -> [C64; 3] {
        std::array::from_fn(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
    }

    pub fn frobenius(a: &Tensor3) -> f64 {
        a.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn det(a: &Tensor3) -> C64 {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Inverse by cofactors; `None` when the matrix is numerically singular.
    pub fn inverse(a: &Tensor3) -> Option<Tensor3> {
        let d = det(a);
        let scale = frobenius(a).powi(3).max(f64::MIN_POSITIVE);
        if d.norm() <= 1e-13 * scale {
            return None;
        }
        let c = |i: usize, j: usize| {
            let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
            let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
            a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]
        };
        Some(std::array::from_fn(|i| std::array::from_fn(|j| c(j, i) / d)))
    }

    pub fn norm3(v: &[C64; 3]) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `s(b) = 2b³ − (4/3)b + (b⁴ − b²) ln((1−b)/(1+b))` on `(0, 1)`.
pub fn s_of_b(b: f64) -> Result<f64> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Domain(format!("b = {b} not in (0, 1)")));
    }
    let log = (-b).ln_1p() - b.ln_1p();
    Ok(2.0 * b.powi(3) - 4.0 / 3.0 * b + b * b * (b * b - 1.0) * log)
}

/// Root `b_c` of `s` on `[0.1, 0.99]` by bisection and `Γ_c = 4/(3π b_c²(1−b_c²))`.
pub fn critical_constants() -> (f64, f64) {
    let (mut lo, mut hi) = (0.1, 0.99);
    let f = |b: f64| s_of_b(b).expect("bracket inside (0, 1)");
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = 0.5 * (lo + hi);
    (b, gamma_c_of(b))
}

pub fn gamma_c_of(b: f64) -> f64 {
    4.0 / (3.0 * PI * b * b * (1.0 - b * b))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub k: [f64; 3],
    pub nu: f64,
    pub gamma: f64,
    pub iota: f64,
}

/// Samples `K(j dt)`, `j = 0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolterraKernel {
    pub dt: f64,
    pub samples: Vec<Tensor3>,
    pub meta: Option<KernelMeta>,
}

impl VolterraKernel {
    pub fn new(dt: f64, samples: Vec<Tensor3>) -> Self {
        Self { dt, samples, meta: None }
    }

    /// Scalar kernel `κ(t) I`.
    pub fn scalar(dt: f64, n: usize, kappa: impl Fn(f64) -> f64) -> Self {
        let samples = (0..n)
            .map(|j| mat3::scale(&mat3::identity(), C64::new(kappa(j as f64 * dt), 0.0)))
            .collect();
        Self::new(dt, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| j as f64 * self.dt).collect()
    }

    /// Frobenius norm at each sample.
    pub fn norms(&self) -> Vec<f64> {
        self.samples.iter().map(mat3::frobenius).collect()
    }

    /// Trapezoid `∫ |K| dt` with the Frobenius norm (an upper bound for the
    /// operator norm).
    pub fn l1_norm(&self) -> f64 {
        let n = self.norms();
        if n.len() < 2 {
            return 0.0;
        }
        self.dt * (n.iter().sum::<f64>() - 0.5 * (n[0] + n[n.len() - 1]))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.samples {
            *m = mat3::scale(m, C64::new(s, 0.0));
        }
        if let Some(meta) = &mut out.meta {
            meta.iota *= s;
        }
        out
    }

    /// `max_j |P K_j P − K_j|` relative to `max_j |K_j|`, for `P = P_{k⊥}`.
    pub fn kernel_space_defect(&self) -> f64 {
        let Some(meta) = self.meta else { return 0.0 };
        let p = projector(meta.k);
        let scale = self.norms().into_iter().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        self.samples
            .iter()
            .map(|m| mat3::frobenius(&mat3::sub(&mat3::mul(&p, &mat3::mul(m, &p)), m)))
            .fold(0.0, f64::max)
            / scale
    }

    /// CSV rows `t, Re K_00, Im K_00, …, Re K_22, Im K_22`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_tensor_csv(w, self.dt, &self.samples)
    }
}

pub fn write_tensor_csv<W: Write>(mut w: W, dt: f64, samples: &[Tensor3]) -> std::io::Result<()> {
    write!(w, "t")?;
    for i in 0..3 {
        for j in 0..3 {
            write!(w, ",re_{i}{j},im_{i}{j}")?;
        }
    }
    writeln!(w)?;
    for (n, m) in samples.iter().enumerate() {
        write!(w, "{:.17e}", n as f64 * dt)?;
        for c in m.iter().flatten() {
            write!(w, ",{:.17e},{:.17e}", c.re, c.im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `P_{k⊥} = I − k̂⊗k̂`.
pub fn projector(k: [f64; 3]) -> Tensor3 {
    let n = norm(k);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let d = if i == j { 1.0 } else { 0.0 };
            C64::new(d - k[i] * k[j] / (n * n), 0.0)
        })
    })
}

/// Orthonormal `(e₁, e₂, k̂)`.
pub fn frame(k: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let n = norm(k);
    if !(n > 0.0) {
        return Err(Error::Domain("k must be nonzero".into()));
    }
    let kh = [k[0] / n, k[1] / n, k[2] / n];
    let seed = if kh[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = seed[0] * kh[0] + seed[1] * kh[1] + seed[2] * kh[2];
    let a = [seed[0] - d * kh[0], seed[1] - d * kh[1], seed[2] - d * kh[2]];
    let an = norm(a);
    let e1 = [a[0] / an, a[1] / an, a[2] / an];
    let e2 = [
        kh[1] * e1[2] - kh[2] * e1[1],
        kh[2] * e1[0] - kh[0] * e1[2],
        kh[0] * e1[1] - kh[1] * e1[0],
    ];
    Ok([e1, e2, kh])
}

/// Sample times `0, dt, …, (n−1) dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0) || n == 0 {
            return Err(Error::Domain(format!("time grid dt = {dt}, n = {n}")));
        }
        Ok(Self { dt, n })
    }

    /// Window `t' ∈ [0, t'_end]` with step `dt'` in units of `1/|k|`.
    pub fn rescaled(kn: f64, dt_rescaled: f64, t_end_rescaled: f64) -> Result<Self> {
        let n = (t_end_rescaled / dt_rescaled).round() as usize + 1;
        Self::new(dt_rescaled / kn, n)
    }
}

/// Kernel columns from `readout(t, u₀)` for `u₀` over an orthonormal basis of `k⊥`.
fn assemble(k: [f64; 3], columns: [Vec<[C64; 3]>; 2]) -> Result<Vec<Tensor3>> {
    let [e1, e2, _] = frame(k)?;
    let n = columns[0].len();
    Ok((0..n)
        .map(|t| {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| columns[0][t][i] * e1[j] + columns[1][t][i] * e2[j])
            })
        })
        .collect())
}

/// Transport-only kernel (`ν = 0`) by quadrature on a grid aligned with `k̂`,
/// refined until two successive resolutions agree to `1e−8` relative.
pub fn kernel_free(k: [f64; 3], gamma: f64, iota: f64, grid: TimeGrid) -> Result<VolterraKernel> {
    let mut n_theta = 64;
    let mut prev = kernel_free_at(k, gamma, iota, grid, n_theta)?;
    loop {
        n_theta *= 2;
        let next = kernel_free_at(k, gamma, iota, grid, n_theta)?;
        let scale = next.iter().map(mat3::frobenius).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let diff = next
            .iter()
            .zip(&prev)
            .map(|(a, b)| mat3::frobenius(&mat3::sub(a, b)))
            .fold(0.0, f64::max);
        prev = next;
        if diff <= 1e-8 * scale {
            break;
        }
        if n_theta > 1 << 16 {
            return Err(Error::Domain("kernel quadrature did not converge".into()));
        }
    }
    Ok(VolterraKernel {
        dt: grid.dt,
        samples: prev,
        meta: Some(KernelMeta { k, nu: 0.0, gamma, iota }),
    })
}

fn kernel_free_at(k: [f64; 3], gamma: f64, iota: f64, grid: TimeGrid, n_theta: usize) -> Result<Vec<Tensor3>> {
    let kn = norm(k);
    let fr = frame(k)?;
    let (x, w) = gauss_legendre(n_theta);
    // The integrand has φ-degree at most 3, so 8 nodes integrate it exactly.
    let n_phi = 8;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    for (xi, wi) in x.iter().zip(&w) {
        let s = (1.0 - xi * xi).max(0.0).sqrt();
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let loc = [s * phi.cos(), s * phi.sin(), *xi];
            let p: [f64; 3] = std::array::from_fn(|a| loc[0] * fr[0][a] + loc[1] * fr[1][a] + loc[2] * fr[2][a]);
            nodes.push((p, *xi, wi * 2.0 * PI / n_phi as f64));
        }
    }
    let proj = projector(k);
    let amp = -I * (3.0 * gamma * iota / FOUR_PI);
    // Static part of the integrand per node, for u₀ = e₁ and u₀ = e₂:
    // (i/|k|²)(p·k) P p ψ₀ with ψ₀ = amp (p·k)(p·u₀).
    let statics: Vec<(f64, f64, [[C64; 3]; 2])> = nodes
        .iter()
        .map(|(p, xk, wq)| {
            let pp: [C64; 3] = mat3::apply(&proj, &[C64::new(p[0], 0.0), C64::new(p[1], 0.0), C64::new(p[2], 0.0)]);
            let col = |u: [f64; 3]| -> [C64; 3] {
                let psi0 = amp * (kn * xk) * (p[0] * u[0] + p[1] * u[1] + p[2] * u[2]);
                std::array::from_fn(|a| I / (kn * kn) * (kn * xk) * pp[a] * psi0)
            };
            (*xk, *wq, [col(fr[0]), col(fr[1])])
        })
        .collect();
    let cols = exec::map_range(ExecPolicy::current(), grid.n, |n| {
        let t = n as f64 * grid.dt;
        let mut c = [[ZERO; 3]; 2];
        for (xk, wq, st) in &statics {
            let ph = -kn * t * xk;
            let e = C64::new(ph.cos(), ph.sin()) * *wq;
            for b in 0..2 {
                for a in 0..3 {
                    c[b][a] += st[b][a] * e;
                }
            }
        }
        c
    });
    let c0 = cols.iter().map(|c| c[0]).collect();
    let c1 = cols.iter().map(|c| c[1]).collect();
    assemble(k, [c0, c1])
}

/// Closed form of the transport-only kernel: `(3γι/4) ∫₋₁¹ x²(1−x²) cos(a x) dx`
/// with `a = |k| t`.
pub fn kernel_free_scalar(kn: f64, gamma: f64, iota: f64, t: f64) -> f64 {
    let a = kn * t;
    let integral = if a.abs() < 1e-2 {
        // series: 4/15 − (4/105) a²/... via ∫x^{2n}(1−x²) = 2/(2n+1) − 2/(2n+3)
        let mut acc = 0.0;
        let mut term = 1.0;
        for n in 0..8 {
            let m = 2 * n + 2;
            let moment = 2.0 / (m as f64 + 1.0) - 2.0 / (m as f64 + 3.0);
            acc += term * moment;
            term *= -a * a / (((2 * n + 1) * (2 * n + 2)) as f64);
        }
        acc
    } else {
        let (s, c) = a.sin_cos();
        // ∫ x² cos = 2 sin/a + 4 cos/a² − 4 sin/a³;  ∫ x⁴ cos = 2 sin/a + 8 cos/a² − 24 sin/a³ − 48 cos/a⁴ + 48 sin/a⁵
        let i2 = 2.0 * s / a + 4.0 * c / a.powi(2) - 4.0 * s / a.powi(3);
        let i4 = 2.0 * s / a + 8.0 * c / a.powi(2) - 24.0 * s / a.powi(3) - 48.0 * c / a.powi(4) + 48.0 * s / a.powi(5);
        i2 - i4
    };
    0.75 * gamma * iota * integral
}

/// Options for [`kernel_diffusive`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusiveOptions {
    pub lmax: usize,
    /// Integration steps per kernel sample.
    pub substeps: usize,
}

/// Kernel with rotational diffusion: each column is a single-mode run from the
/// kernel's initial data, read out at every sample time.
pub fn kernel_diffusive(
    k: [f64; 3],
    gamma: f64,
    iota: f64,
    nu: f64,
    grid: TimeGrid,
    opts: DiffusiveOptions,
) -> Result<VolterraKernel> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("nu = {nu} must be positive")));
    }
    let fr = frame(k)?;
    let kn = norm(k);
    let pp = second_moment_fields();
    let proj = projector(k);
    let readout = |g: &SphField| -> [C64; 3] {
        let mut v = [ZERO; 3];
        for (i, vi) in v.iter_mut().enumerate() {
            for (j, kj) in k.iter().enumerate() {
                let mut m = ZERO;
                for l in [0usize, 2] {
                    for mm in -(l as i64)..=l as i64 {
                        m += g.get(l, mm) * pp[i][j].get(l, mm).conj();
                    }
                }
                *vi += m * *kj;
            }
        }
        let pv = mat3::apply(&proj, &v);
        std::array::from_fn(|a| pv[a] * I / (kn * kn))
    };
    let cfg = RunConfig {
        record_every: opts.substeps.max(1),
        ..RunConfig::new(grid.dt / opts.substeps.max(1) as f64, grid.dt * (grid.n - 1) as f64)
    };
    let columns = exec::map_range(ExecPolicy::current(), 2, |c| -> Result<Vec<[C64; 3]>> {
        let g0 = kernel_initial_data(k, fr[c], gamma, iota, opts.lmax);
        let mut col = Vec::with_capacity(grid.n);
        solve_single_mode_with(k, &g0, None, nu, &cfg, |_, g| {
            col.push(readout(g));
            Ok(())
        })?;
        Ok(col)
    });
    let mut it = columns.into_iter();
    let c0 = it.next().expect("two columns")?;
    let c1 = it.next().expect("two columns")?;
    Ok(VolterraKernel {
        dt: grid.dt,
        samples: assemble(k, [c0, c1])?,
        meta: Some(KernelMeta { k, nu, gamma, iota }),
    })
}

/// `ψ₀ = −(3γι/4π) p⊗p : Ê(u₀) = −i (3γι/4π)(p·k)(p·u₀)`.
pub fn kernel_initial_data(k: [f64; 3], u0: [f64; 3], gamma: f64, iota: f64, lmax: usize) -> SphField {
    let one = SphField::unit(0, 0, 0) * FOUR_PI.sqrt();
    let pu = one.mul_cos_axis(u0);
    let mut out = SphField::zeros(lmax.max(2));
    pu.mul_axis_into(k, &mut out, -I * (3.0 * gamma * iota / FOUR_PI));
    out.resized(lmax)
}

/// Trapezoid product integration of `u + K⋆u = f`:
/// `(I + dt/2 K₀) u_n = f_n − dt(½ K_n u₀ + Σ_{j=1}^{n−1} K_{n−j} u_j)`.
pub fn volterra_solve(kernel: &VolterraKernel, f: &[[C64; 3]]) -> Result<Vec<[C64; 3]>> {
    let n = f.len();
    if n > kernel.len() {
        return Err(Error::Shape {
            expected: kernel.len(),
            got: n,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let dt = kernel.dt;
    let k = &kernel.samples;
    let step = mat3::add(&mat3::identity(), &mat3::scale(&k[0], C64::new(0.5 * dt, 0.0)));
    let inv = mat3::inverse(&step).ok_or(Error::SingularStep)?;
    let mut u: Vec<[C64; 3]> = Vec::with_capacity(n);
    u.push(f[0]);
    for m in 1..n {
        let mut acc = mat3::apply(&k[m], &u[0]).map(|c| c * 0.5);
        for j in 1..m {
            let v = mat3::apply(&k[m - j], &u[j]);
            for a in 0..3 {
                acc[a] += v[a];
            }
        }
        let rhs: [C64; 3] = std::array::from_fn(|a| f[m][a] - acc[a] * dt);
        u.push(mat3::apply(&inv, &rhs));
    }
    Ok(u)
}

/// `(a ∗ b)_n = dt Σ_{j≤n} a_j b_{n−j}` for matrix sequences, via FFT.
pub fn cauchy_convolve(a: &[Tensor3], b: &[Tensor3], dt: f64) -> Vec<Tensor3> {
    let n = a.len().min(b.len());
    if n == 0 {
        return Vec::new();
    }
    let m = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let spectra = |s: &[Tensor3]| -> Vec<Vec<C64>> {
        (0..9)
            .map(|e| {
                let mut v = vec![ZERO; m];
                for (t, x) in s.iter().take(n).enumerate() {
                    v[t] = x[e / 3][e % 3];
                }
                fwd.process(&mut v);
                v
            })
            .collect()
    };
    let sa = spectra(a);
    let sb = spectra(b);
    let mut out = vec![mat3::zero(); n];
    for i in 0..3 {
        for j in 0..3 {
            let mut v: Vec<C64> = (0..m)
                .map(|f| (0..3).map(|l| sa[3 * i + l][f] * sb[3 * l + j][f]).sum())
                .collect();
            inv.process(&mut v);
            for (t, o) in out.iter_mut().enumerate() {
                o[i][j] = v[t] * (dt / m as f64);
            }
        }
    }
    out
}

/// Sequence–vector convolution `(a ∗ f)_n = dt Σ_{j≤n} a_{n−j} f_j` (direct sum).
pub fn cauchy_apply(a: &[Tensor3], f: &[[C64; 3]], dt: f64) -> Vec<[C64; 3]> {
    let n = a.len().min(f.len());
    (0..n)
        .map(|t| {
            let mut acc = [ZERO; 3];
            for j in 0..=t {
                let v = mat3::apply(&a[t - j], &f[j]);
                for x in 0..3 {
                    acc[x] += v[x];
                }
            }
            acc.map(|c| c * dt)
        })
        .collect()
}

/// Discrete resolvent in the half-weighted convolution algebra.
///
/// The trapezoid rule is `K⋆u ≈ K̄∗u − (dt/2) K u₀` with `K̄₀ = K₀/2` and
/// `K̄_j = K_j` otherwise, so the solution of the trapezoid scheme is exactly
/// `u = f̃ − R̄∗f̃` with `f̃ = f + (dt/2) K f₀` and `R̄ + K̄∗R̄ = K̄`.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolvent {
    pub dt: f64,
    /// `R̄_j`; the continuous-time resolvent samples are `R_j = R̄_j` for
    /// `j ≥ 1` and `R_0 = 2 R̄_0`.
    pub half_weighted: Vec<Tensor3>,
    /// `K̄` used to build the series.
    pub kernel_half_weighted: Vec<Tensor3>,
    pub kernel: Vec<Tensor3>,
    pub terms: usize,
    /// `max_n |R̄ + K̄∗R̄ − K̄|_n / max_n |K̄|_n`.
    pub residual: f64,
    pub l1_norm: f64,
}

impl Resolvent {
    pub fn samples(&self) -> Vec<Tensor3> {
        let mut r = self.half_weighted.clone();
        if let Some(r0) = r.first_mut() {
            *r0 = mat3::scale(r0, C64::new(2.0, 0.0));
        }
        r
    }

    /// `u = f̃ − R̄∗f̃`, the trapezoid solution of `u + K⋆u = f`.
    pub fn solve(&self, f: &[[C64; 3]]) -> Vec<[C64; 3]> {
        let n = f.len().min(self.kernel.len());
        let f0 = f[0];
        let ft: Vec<[C64; 3]> = (0..n)
            .map(|t| {
                let v = mat3::apply(&self.kernel[t], &f0);
                std::array::from_fn(|a| f[t][a] + v[a] * (0.5 * self.dt))
            })
            .collect();
        let rf = cauchy_apply(&self.half_weighted, &ft, self.dt);
        ft.iter()
            .zip(&rf)
            .map(|(a, b)| std::array::from_fn(|x| a[x] - b[x]))
            .collect()
    }
}

/// Partial sums of `R̄ = Σ_j (−1)^j (K̄∗)^j K̄` until the last term is below
/// `tol` relative to the first. Fails if the discrete `L¹` norm of `K̄` is at
/// least 1 or the series has not converged after `j_max` terms.
pub fn resolvent_neumann(kernel: &VolterraKernel, j_max: usize, tol: f64) -> Result<Resolvent> {
    let dt = kernel.dt;
    let mut kb = kernel.samples.clone();
    if let Some(k0) = kb.first_mut() {
        *k0 = mat3::scale(k0, C64::new(0.5, 0.0));
    }
    let l1 = dt * kb.iter().map(mat3::frobenius).sum::<f64>();
    if l1 >= 1.0 {
        return Err(Error::NeumannDiverged { l1_norm: l1 });
    }
    let sup = |s: &[Tensor3]| s.iter().map(mat3::frobenius).fold(0.0, f64::max);
    let scale = sup(&kb).max(f64::MIN_POSITIVE);
    let mut sum = kb.clone();
    let mut term = kb.clone();
    let mut terms = 1;
    let mut converged = sup(&term) <= tol * scale;
    while !converged && terms <= j_max {
        term = cauchy_convolve(&kb, &term, dt);
        for m in &mut term {
            *m = mat3::scale(m, C64::new(-1.0, 0.0));
        }
        for (s, t) in sum.iter_mut().zip(&term) {
            *s = mat3::add(s, t);
        }
        terms += 1;
        converged = sup(&term) <= tol * scale;
    }
    if !converged {
        return Err(Error::NeumannDiverged { l1_norm: l1 });
    }
    let kr = cauchy_convolve(&kb, &sum, dt);
    let residual = sum
        .iter()
        .zip(&kr)
        .zip(&kb)
        .map(|((r, c), k)| mat3::frobenius(&mat3::sub(&mat3::add(r, c), k)))
        .fold(0.0, f64::max)
        / scale;
    Ok(Resolvent {
        dt,
        half_weighted: sum,
        kernel_half_weighted: kb,
        kernel: kernel.samples.clone(),
        terms,
        residual,
        l1_norm: l1,
    })
}

/// RMS of `|u|` over consecutive windows of `width` samples: `(t_mid, rms)`.
pub fn windowed_rms(dt: f64, u: &[[C64; 3]], width: usize) -> Vec<(f64, f64)> {
    let w = width.max(1);
    u.chunks_exact(w)
        .enumerate()
        .map(|(c, ch)| {
            let ms = ch.iter().map(|v| mat3::norm3(v).powi(2)).sum::<f64>() / w as f64;
            ((c * w) as f64 * dt + 0.5 * (w - 1) as f64 * dt, ms.sqrt())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    /// Sample step in units of `1/|k|`.
    pub dt_rescaled: f64,
    /// Window end in units of `1/|k|`.
    pub t_end_rescaled: f64,
    /// Fit window start in units of `1/|k|`.
    pub fit_from_rescaled: f64,
    /// RMS envelope window in units of `1/|k|`.
    pub envelope_rescaled: f64,
    /// Relative tolerance on `ι*` for the crossing bisection.
    pub crossing_tol: f64,
    pub diffusive: Option<DiffusiveOptions>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            dt_rescaled: 0.02,
            t_end_rescaled: 200.0,
            fit_from_rescaled: 100.0,
            envelope_rescaled: 5.0,
            crossing_tol: 1e-4,
            diffusive: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub iota: f64,
    /// `γ|ι|/|k|`.
    pub strength: f64,
    /// Fitted exponential growth rate of `|u|` (negative: decay), in `1/t`.
    pub rate: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    /// Values of `ι` at which the fitted rate changes sign.
    pub crossings: Vec<f64>,
}

/// Per-`ι` growth rates for one wave vector, from the impulse response
/// `f(t) = K(t) e₁`.
#[derive(Debug)]
pub struct GrowthProbe {
    k: [f64; 3],
    gamma: f64,
    opts: ScanOptions,
    /// Kernel for `ι = 1`; the kernel is linear in `ι`.
    unit: VolterraKernel,
}

impl GrowthProbe {
    pub fn new(k: [f64; 3], gamma: f64, nu: f64, opts: ScanOptions) -> Result<Self> {
        let kn = norm(k);
        let grid = TimeGrid::rescaled(kn, opts.dt_rescaled, opts.t_end_rescaled)?;
        let unit = if nu == 0.0 {
            kernel_free(k, gamma, 1.0, grid)?
        } else {
            let d = opts.diffusive.ok_or_else(|| Error::Domain("diffusive scan needs band-limit options".into()))?;
            kernel_diffusive(k, gamma, 1.0, nu, grid, d)?
        };
        Ok(Self { k, gamma, opts, unit })
    }

    pub fn kernel(&self, iota: f64) -> VolterraKernel {
        self.unit.scaled(iota)
    }

    /// Velocity response `u` to the impulse forcing for a given `ι`.
    pub fn response(&self, iota: f64) -> Result<Vec<[C64; 3]>> {
        let kernel = self.kernel(iota);
        let e1 = frame(self.k)?[0].map(|x| C64::new(x, 0.0));
        let f: Vec<[C64; 3]> = kernel.samples.iter().map(|m| mat3::apply(m, &e1)).collect();
        volterra_solve(&kernel, &f)
    }

    pub fn rate(&self, iota: f64) -> Result<ScanPoint> {
        let kn = norm(self.k);
        let u = self.response(iota)?;
        let dt = self.unit.dt;
        let width = (self.opts.envelope_rescaled / self.opts.dt_rescaled).round() as usize;
        let env = windowed_rms(dt, &u, width);
        let from = self.opts.fit_from_rescaled / kn;
        let (t, y): (Vec<f64>, Vec<f64>) = env.into_iter().filter(|(t, _)| *t >= from).unzip();
        let fit = fit_decay(&t, &y, DecayModel::Exponential)?;
        Ok(ScanPoint {
            iota,
            strength: self.gamma * iota.abs() / kn,
            rate: -fit.value,
            stderr: fit.stderr,
        })
    }

    /// Bisection on the sign of the fitted rate between `lo` and `hi`.
    pub fn crossing(&self, mut lo: f64, mut hi: f64) -> Result<f64> {
        let mut rlo = self.rate(lo)?.rate;
        let rhi = self.rate(hi)?.rate;
        if rlo.signum() == rhi.signum() {
            return Err(Error::Fit(format!("no sign change of the rate on [{lo}, {hi}]")));
        }
        while (hi - lo).abs() > self.opts.crossing_tol * hi.abs().max(lo.abs()) {
            let mid = 0.5 * (lo + hi);
            let r = self.rate(mid)?.rate;
            if r.signum() == rlo.signum() {
                lo = mid;
                rlo = r;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Fitted rates over `iotas` and the sign-change locations refined by bisection.
pub fn growth_scan(k: [f64; 3], gamma: f64, iotas: &[f64], nu: f64, opts: ScanOptions) -> Result<ScanResult> {
    let probe = GrowthProbe::new(k, gamma, nu, opts)?;
    let mut sorted = iotas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite ι"));
    let points = exec::map_slice(ExecPolicy::current(), &sorted, |i| probe.rate(*i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut crossings = Vec::new();
    for w in points.windows(2) {
        if w[0].rate.signum() != w[1].rate.signum() {
            crossings.push(probe.crossing(w[0].iota, w[1].iota)?);
        }
    }
    Ok(ScanResult { points, crossings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k2pi() -> [f64; 3] {
        [0.0, 0.0, 2.0 * PI]
    }

    #[test]
    fn s_of_b_values() {
        assert!(s_of_b(0.1).unwrap() < 0.0);
        let small = s_of_b(1e-3).unwrap();
        assert!((small - (-4.0 / 3.0 * 1e-3 + 4e-9)).abs() < 1e-12);
        assert!(s_of_b(0.99).unwrap() > 0.0);
        assert!((s_of_b(1.0 - 1e-12).unwrap() - 2.0 / 3.0).abs() < 1e-9);
        assert!(s_of_b(0.0).is_err() && s_of_b(1.0).is_err());
    }

    #[test]
    fn critical_constants_and_single_sign_change() {
        let (b, g) = critical_constants();
        assert!((b - 0.623).abs() < 1e-3);
        assert!(s_of_b(b).unwrap().abs() < 1e-10);
        assert!((g - 4.0 / (3.0 * PI * b * b * (1.0 - b * b))).abs() < 1e-14);
        let mut changes = 0;
        let mut prev = s_of_b(0.1).unwrap();
        for i in 1..=890 {
            let v = s_of_b(0.1 + i as f64 * 1e-3).unwrap();
            if v.signum() != prev.signum() {
                changes += 1;
            }
            prev = v;
        }
        assert_eq!(changes, 1);
    }

    #[test]
    fn dispersion_relation_at_threshold() {
        // 1 + K̃(λ) = 0 at λ = −i b_c |k| exactly when γ|ι|/|k| = Γ_c, with
        // K̃ the Laplace transform of the transport-only kernel.
        let (b, g) = critical_constants();
        let kn = 2.0 * PI;
        let iota = -g * kn;
        // K̃(−i b|k|) = (3γι/4) ∫ x²(1−x²) / (i|k|(x − b)) dx, principal value
        // plus the iπ term of the limit Re λ → 0⁺.
        let (x, w) = gauss_legendre(4000);
        let f = |x: f64| x * x * (1.0 - x * x);
        let fb = f(b);
        let pv: f64 = x.iter().zip(&w).map(|(x, w)| w * (f(*x) - fb) / (x - b)).sum::<f64>()
            + fb * ((1.0 - b) / (1.0 + b)).ln();
        let lap = C64::new(0.0, -1.0) / kn * C64::new(pv, PI * fb) * (0.75 * iota);
        assert!((lap.re + 1.0).abs() < 1e-8, "{lap}");
        assert!(lap.im.abs() < 1e-8);
    }

    #[test]
    fn free_kernel_matches_closed_form_and_structure() {
        let k = [1.0, 2.0, 2.0 * PI];
        let kn = norm(k);
        let grid = TimeGrid::rescaled(kn, 0.1, 100.0).unwrap();
        let ker = kernel_free(k, 0.8, -1.5, grid).unwrap();
        let p = projector(k);
        for (j, m) in ker.samples.iter().enumerate() {
            let t = j as f64 * grid.dt;
            let expect = mat3::scale(&p, C64::new(kernel_free_scalar(kn, 0.8, -1.5, t), 0.0));
            assert!(mat3::frobenius(&mat3::sub(m, &expect)) < 1e-9, "t = {t}");
        }
        assert!((ker.samples[0][0][0].re - (0.8 * -1.5 / 5.0) * p[0][0].re).abs() < 1e-12);
        assert!(ker.kernel_space_defect() < 1e-10);
    }

    #[test]
    fn free_kernel_is_isotropic_and_scales() {
        let a = [0.0, 0.0, 2.0 * PI];
        let b = [2.0 * PI, 0.0, 0.0];
        let c = [0.0, 0.0, 4.0 * PI];
        let f = |kn: f64| TimeGrid::rescaled(kn, 0.05, 20.0).unwrap();
        let ka = kernel_free(a, 1.0, -1.0, f(2.0 * PI)).unwrap();
        let kb = kernel_free(b, 1.0, -1.0, f(2.0 * PI)).unwrap();
        let kc = kernel_free(c, 1.0, -1.0, f(4.0 * PI)).unwrap();
        // Rotation z → x conjugates the kernels; here both are scalar on k⊥,
        // so compare the trace and the scaling law K_k(t) = K_{k/|k|}(|k| t).
        for j in 0..ka.len() {
            let ta = ka.samples[j][0][0] + ka.samples[j][1][1];
            let tb = kb.samples[j][1][1] + kb.samples[j][2][2];
            let tc = kc.samples[j][0][0] + kc.samples[j][1][1];
            assert!((ta - tb).norm() < 1e-10 && (ta - tc).norm() < 1e-10);
        }
    }

    #[test]
    fn diffusive_kernel_approaches_free_kernel() {
        let k = k2pi();
        let grid = TimeGrid::new(0.05, 101).unwrap();
        let free = kernel_free(k, 1.0, -1.0, grid).unwrap();
        let diff = kernel_diffusive(k, 1.0, -1.0, 1e-6, grid, DiffusiveOptions { lmax: 64, substeps: 10 }).unwrap();
        let scale = free.norms()[0];
        for (a, b) in free.samples.iter().zip(&diff.samples) {
            assert!(mat3::frobenius(&mat3::sub(a, b)) < 1e-3 * scale);
        }
        assert!(diff.kernel_space_defect() < 1e-10);
    }

    #[test]
    fn volterra_trivial_and_constant_kernel() {
        let n = 200;
        let f: Vec<[C64; 3]> = (0..n).map(|j| [C64::new(j as f64, 1.0), ZERO, I]).collect();
        let zero = VolterraKernel::new(0.01, vec![mat3::zero(); n]);
        assert_eq!(volterra_solve(&zero, &f).unwrap(), f);

        let lam = 0.7;
        let err = |dt: f64| {
            let n = (2.0 / dt) as usize + 1;
            let ker = VolterraKernel::scalar(dt, n, |_| lam);
            let one = vec![[C64::new(1.0, 0.0), ZERO, ZERO]; n];
            let u = volterra_solve(&ker, &one).unwrap();
            u.iter()
                .enumerate()
                .map(|(j, v)| (v[0].re - (-lam * j as f64 * dt).exp()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-4);
        assert!((e1 / e2 - 4.0).abs() < 0.1, "{}", e1 / e2);
    }

    #[test]
    fn singular_step_is_reported() {
        let ker = VolterraKernel::scalar(1.0, 4, |_| -2.0);
        let f = vec![[C64::new(1.0, 0.0), ZERO, ZERO]; 4];
        assert!(matches!(volterra_solve(&ker, &f), Err(Error::SingularStep)));
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let a: Vec<Tensor3> = (0..50)
            .map(|t| std::array::from_fn(|i| std::array::from_fn(|j| C64::new((t * (i + 1)) as f64, (j as f64) - 0.5 * t as f64).scale(0.01))))
            .collect();
        let fast = cauchy_convolve(&a, &a, 0.1);
        for n in [0, 7, 49] {
            let mut d = mat3::zero();
            for j in 0..=n {
                d = mat3::add(&d, &mat3::mul(&a[j], &a[n - j]));
            }
            d = mat3::scale(&d, C64::new(0.1, 0.0));
            assert!(mat3::frobenius(&mat3::sub(&d, &fast[n])) < 1e-12 * mat3::frobenius(&d).max(1.0));
        }
    }

    #[test]
    fn neumann_geometric_case() {
        // κ(t) = ½ e^{−t} has L¹ norm ½; the resolvent of u + κ⋆u is
        // ½ e^{−3t/2}.
        let dt = 0.01;
        let n = 2001;
        let ker = VolterraKernel::scalar(dt, n, |t| 0.5 * (-t).exp());
        let r = resolvent_neumann(&ker, 200, 1e-14).unwrap();
        assert!(r.residual < 1e-12);
        let samples = r.samples();
        for j in (100..n).step_by(100) {
            let t = j as f64 * dt;
            assert!((samples[j][0][0].re - 0.5 * (-1.5 * t).exp()).abs() < 1e-5);
        }
        // The endpoint sample carries an O(dt) bias.
        assert!((samples[0][0][0].re - 0.5).abs() < dt);
        let zero = VolterraKernel::new(dt, vec![mat3::zero(); 10]);
        let r0 = resolvent_neumann(&zero, 5, 1e-12).unwrap();
        assert!(r0.samples().iter().all(|m| mat3::frobenius(m) == 0.0));
        let big = VolterraKernel::scalar(dt, n, |_| 1.0);
        assert!(matches!(resolvent_neumann(&big, 50, 1e-12), Err(Error::NeumannDiverged { .. })));
    }

    #[test]
    fn neumann_solution_equals_product_integration() {
        let k = [0.0, 0.0, 6.0 * PI];
        let grid = TimeGrid::rescaled(6.0 * PI, 0.05, 100.0).unwrap();
        let ker = kernel_free(k, 1.0, -3.0, grid).unwrap();
        let r = resolvent_neumann(&ker, 100, 1e-13).unwrap();
        assert!(r.residual < 1e-10);
        let e1 = frame(k).unwrap()[0].map(|x| C64::new(x, 0.0));
        let f: Vec<[C64; 3]> = (0..ker.len())
            .map(|j| e1.map(|c| c * (1.0 + (j as f64 * grid.dt).sin())))
            .collect();
        let direct = volterra_solve(&ker, &f).unwrap();
        let neu = r.solve(&f);
        let scale = direct.iter().map(mat3::norm3).fold(0.0, f64::max);
        let diff = direct
            .iter()
            .zip(&neu)
            .map(|(a, b)| mat3::norm3(&std::array::from_fn(|x| a[x] - b[x])))
            .fold(0.0, f64::max);
        assert!(diff < 1e-10 * scale, "{diff}");
    }

    #[test]
    fn kernel_csv_has_header_and_rows() {
        let ker = VolterraKernel::scalar(0.5, 3, |t| t);
        let mut buf = Vec::new();
        ker.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,re_00,im_00"));
    }
}
