//! Right-hand-side terms of the kinetic equation
//!
//! `∂t ψ + (p + u)·∇x ψ − (3γ/4π) p⊗p : E(u) + ∇p·(P_{p⊥}[(γE + W)p] ψ) = ν Δp ψ`
//!
//! coupled to the Stokes system `−Δu + ∇q = ι ∇x·∫ ψ p⊗p dp`, `∇·u = 0`.
//!
//! Every operator returns its own contribution to `∂t ψ`, signs included, so
//! the full right-hand side is the plain sum of the enabled terms. The pressure
//! never appears: it is eliminated by the projection onto `k⊥`.
//!
//! The velocity gradient uses `(∇u)_ij = ∂_j u_i`, so `E = (∇u + ∇uᵀ)/2`,
//! `W = (∇u − ∇uᵀ)/2` and `W p = ½ ω × p`.

mod physical;

use std::sync::Arc;

pub use physical::PhysGrid;

use crate::error::{Error, Result};
use crate::exec::{self, ExecPolicy};
use crate::sphere::{lm_index, SphField, SphTransform, TangentField};
use crate::state::{wavenumber, wavevector, FlowField, KineticState, Lattice, ModeIndex, Params};
use crate::{C64, FOUR_PI, I};

/// Complex 3×3 matrix, row-major.
pub type Tensor3 = [[C64; 3]; 3];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Selects the terms assembled by [`Engine::rhs`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Terms {
    pub free_transport: bool,
    pub diffusion: bool,
    pub jeffery_source: bool,
    pub convection: bool,
    pub jeffery_transport: bool,
}

impl Terms {
    pub const FULL: Terms = Terms {
        free_transport: true,
        diffusion: true,
        jeffery_source: true,
        convection: true,
        jeffery_transport: true,
    };

    /// Linearization about the isotropic state: the flow enters only through
    /// the Jeffery source.
    pub const LINEARIZED: Terms = Terms {
        convection: false,
        jeffery_transport: false,
        ..Terms::FULL
    };

    /// The linear process `S_u` for a given flow: no source term.
    pub const TRANSPORT: Terms = Terms {
        jeffery_source: false,
        ..Terms::FULL
    };

    pub fn without_diffusion(self) -> Terms {
        Terms {
            diffusion: false,
            ..self
        }
    }

    pub fn is_linear_in_state(&self) -> bool {
        !(self.convection || self.jeffery_transport)
    }
}

/// Where the velocity field comes from.
#[derive(Clone, Copy, Debug)]
pub enum FlowSource<'a> {
    /// Stokes solve of the active stress of the current state.
    Coupled,
    /// Given flow, independent of the state.
    Prescribed(&'a FlowField),
    Zero,
}

/// Coefficients of `p_i p_j` (band limit 2).
pub fn second_moment_fields() -> [[SphField; 3]; 3] {
    let one = SphField::unit(0, 0, 0) * FOUR_PI.sqrt();
    let e = |i: usize| {
        let mut a = [0.0; 3];
        a[i] = 1.0;
        a
    };
    std::array::from_fn(|i| std::array::from_fn(|j| one.mul_cos_axis(e(j)).mul_cos_axis(e(i))))
}

/// `∇û_ij = i k_j û_i` for a mode with integer index `n`.
pub fn velocity_gradient(n: ModeIndex, u: &[C64; 3]) -> Tensor3 {
    let k = wavevector(n);
    std::array::from_fn(|i| std::array::from_fn(|j| I * k[j] * u[i]))
}

/// `γ E + W` from a velocity gradient.
pub fn jeffery_matrix<T>(grad: &[[T; 3]; 3], gamma: f64) -> [[T; 3]; 3]
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    std::array::from_fn(|i| {
        std::array::from_fn(|j| (grad[i][j] + grad[j][i]) * (0.5 * gamma) + (grad[i][j] - grad[j][i]) * 0.5)
    })
}

/// Stokes velocity `û_k = |k|⁻² P_{k⊥}(i Σ̂_k k)`, `û_0 = 0`.
pub fn stokes_solve(stress: &[Tensor3], lattice: &Arc<Lattice>) -> Result<FlowField> {
    if stress.len() != lattice.len() {
        return Err(Error::Shape {
            expected: lattice.len(),
            got: stress.len(),
        });
    }
    let mut flow = FlowField::zeros(lattice.clone());
    for (slot, n) in lattice.modes().iter().enumerate().skip(1) {
        let k = wavevector(*n);
        let k2 = wavenumber(*n).powi(2);
        let s = &stress[slot];
        let v: [C64; 3] = std::array::from_fn(|i| I * (s[i][0] * k[0] + s[i][1] * k[1] + s[i][2] * k[2]));
        let kv = (v[0] * k[0] + v[1] * k[1] + v[2] * k[2]) / k2;
        flow.modes_mut()[slot] = std::array::from_fn(|i| (v[i] - kv * k[i]) / k2);
    }
    Ok(flow)
}

/// Precomputed grids and tables for one `(params, lattice, lmax)`.
pub struct Engine {
    params: Params,
    lattice: Arc<Lattice>,
    lmax: usize,
    policy: ExecPolicy,
    phys: PhysGrid,
    sph: SphTransform,
    frames: Vec<[[f64; 3]; 3]>,
    pp: [[SphField; 3]; 3],
    /// For coefficient `c = (l, m)`: its partner `(l, −m)` and `(−1)^m`.
    conj_map: Vec<(usize, f64)>,
    /// Coefficients with `m ≥ 0`, the only ones transformed in `x`.
    half: Vec<usize>,
    /// For every coefficient: its position in `half`, of `(l, |m|)`.
    half_pos: Vec<usize>,
    /// Stored modes followed by their negatives.
    signed_modes: Vec<ModeIndex>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("params", &self.params)
            .field("lmax", &self.lmax)
            .field("phys", &self.phys)
            .finish()
    }
}

impl Engine {
    pub fn new(params: &Params) -> Result<Self> {
        params.validate()?;
        let lattice = Lattice::new(params.kmax);
        let lmax = params.lmax;
        let sph = SphTransform::padded(lmax, 2 * lmax + 2);
        let grid = sph.grid();
        let mut frames = Vec::with_capacity(grid.len());
        for i in 0..grid.n_theta() {
            for j in 0..grid.n_phi() {
                let (et, ep) = grid.frame(i, j);
                frames.push([grid.point(i, j), et, ep]);
            }
        }
        let mut conj_map = Vec::with_capacity((lmax + 1).pow(2));
        for l in 0..=lmax {
            for m in -(l as i64)..=l as i64 {
                conj_map.push((lm_index(l, -m), if m % 2 == 0 { 1.0 } else { -1.0 }));
            }
        }
        let mut half = Vec::new();
        let mut half_pos = vec![0; (lmax + 1).pow(2)];
        for l in 0..=lmax {
            for m in 0..=l as i64 {
                half_pos[lm_index(l, m)] = half.len();
                half_pos[lm_index(l, -m)] = half.len();
                half.push(lm_index(l, m));
            }
        }
        let signed_modes = lattice
            .modes()
            .iter()
            .copied()
            .chain(lattice.modes().iter().map(|n| [-n[0], -n[1], -n[2]]))
            .collect();
        Ok(Self {
            half,
            half_pos,
            signed_modes,
            params: *params,
            phys: PhysGrid::for_kmax(params.kmax),
            lattice,
            lmax,
            policy: ExecPolicy::current(),
            sph,
            frames,
            pp: second_moment_fields(),
            conj_map,
        })
    }

    pub fn with_policy(mut self, policy: ExecPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn zero_state(&self) -> KineticState {
        KineticState::zeros(self.lattice.clone(), self.lmax)
    }

    fn check(&self, state: &KineticState) -> Result<()> {
        if state.lattice().kmax() != self.lattice.kmax() {
            return Err(Error::Shape {
                expected: self.lattice.kmax(),
                got: state.lattice().kmax(),
            });
        }
        if state.lmax() != self.lmax {
            return Err(Error::BandLimit {
                got: state.lmax(),
                max: self.lmax,
            });
        }
        Ok(())
    }

    fn check_flow(&self, flow: &FlowField) -> Result<()> {
        if flow.lattice().kmax() != self.lattice.kmax() {
            return Err(Error::Shape {
                expected: self.lattice.kmax(),
                got: flow.lattice().kmax(),
            });
        }
        Ok(())
    }

    /// Writes the `m ≥ 0` coefficients of `f` (read as `ψ̂_n`, or as its
    /// conjugate partner `ψ̂_{−n}` when `conj`) into `out`, scaled by `scale`.
    fn fill_half(&self, f: &SphField, conj: bool, scale: C64, out: &mut [C64]) {
        let cf = f.coeffs();
        if conj {
            for (o, &c) in out.iter_mut().zip(&self.half) {
                let (partner, sign) = self.conj_map[c];
                *o = cf[partner].conj() * sign * scale;
            }
        } else {
            for (o, &c) in out.iter_mut().zip(&self.half) {
                *o = cf[c] * scale;
            }
        }
    }

    /// Full coefficient vector of a real function from its `m ≥ 0` part.
    fn unfold(&self, half: &[C64]) -> Vec<C64> {
        (0..self.nc())
            .map(|c| {
                let (partner, sign) = self.conj_map[c];
                let v = half[self.half_pos[c]];
                if partner <= c {
                    v
                } else {
                    v.conj() * sign
                }
            })
            .collect()
    }

    /// Lattice state from point-major physical values holding the `m ≥ 0`
    /// channels of a function that is real in `(x, p)`.
    ///
    /// The `m < 0` coefficients at `k` follow from the `m > 0` ones at `−k`.
    fn collect_half(&self, values: &[C64]) -> KineticState {
        let nh = self.half.len();
        let spec = self.phys.analyze_many_at(self.policy, &self.signed_modes, nh, values);
        let nmodes = self.lattice.len();
        let modes = (0..nmodes)
            .map(|slot| {
                let (here, there) = (&spec[slot], &spec[nmodes + slot]);
                let coeffs = (0..self.nc())
                    .map(|c| {
                        let (partner, sign) = self.conj_map[c];
                        if partner <= c {
                            here[self.half_pos[c]]
                        } else {
                            there[self.half_pos[c]].conj() * sign
                        }
                    })
                    .collect();
                SphField::from_coeffs(self.lmax, coeffs).expect("coefficient count")
            })
            .collect();
        let mut out = KineticState::from_parts(0.0, self.lattice.clone(), self.lmax, modes);
        out.enforce_reality();
        out
    }

    fn flow_value(flow: &FlowField, n: ModeIndex, i: usize) -> C64 {
        flow.get(n).map_or(ZERO, |u| u[i])
    }

    /// `Σ̂_k = ι ∫ ψ̂_k p⊗p dp` for every stored mode.
    pub fn stress(&self, state: &KineticState) -> Result<Vec<Tensor3>> {
        self.check(state)?;
        let iota = self.params.iota;
        Ok(state
            .modes()
            .iter()
            .map(|f| {
                std::array::from_fn(|i| {
                    std::array::from_fn(|j| {
                        let pp = &self.pp[i][j];
                        let mut acc = ZERO;
                        for l in [0usize, 2] {
                            if l > f.lmax() {
                                continue;
                            }
                            for m in -(l as i64)..=l as i64 {
                                acc += f.get(l, m) * pp.get(l, m).conj();
                            }
                        }
                        acc * iota
                    })
                })
            })
            .collect())
    }

    pub fn flow(&self, state: &KineticState) -> Result<FlowField> {
        stokes_solve(&self.stress(state)?, &self.lattice)
    }

    /// `−i (p·k) ψ̂_k` per mode.
    pub fn free_transport(&self, state: &KineticState) -> Result<KineticState> {
        self.check(state)?;
        let mut out = self.zero_state();
        for (slot, n) in self.lattice.modes().iter().enumerate().skip(1) {
            state.mode(slot).mul_axis_into(wavevector(*n), out.mode_mut(slot), -I);
        }
        Ok(out)
    }

    /// `ν Δp ψ`.
    pub fn diffusion(&self, state: &KineticState) -> Result<KineticState> {
        self.check(state)?;
        let mut out = state.clone();
        let nu = self.params.nu;
        for f in out.modes_mut() {
            f.scale_by_degree(|l| -nu * (l * (l + 1)) as f64);
        }
        Ok(out)
    }

    /// `(3γ/4π) p⊗p : Ê(û_k)` per mode.
    pub fn jeffery_source(&self, flow: &FlowField) -> Result<KineticState> {
        self.check_flow(flow)?;
        let c = 3.0 * self.params.gamma / FOUR_PI;
        let mut out = self.zero_state();
        for (slot, n) in self.lattice.modes().iter().enumerate().skip(1) {
            let g = velocity_gradient(*n, &flow.modes()[slot]);
            let mut f = SphField::zeros(2);
            for i in 0..3 {
                for j in 0..3 {
                    let e = (g[i][j] + g[j][i]) * 0.5;
                    if e != ZERO {
                        f.axpy(e * c, &self.pp[i][j]);
                    }
                }
            }
            *out.mode_mut(slot) = f.resized(self.lmax);
        }
        Ok(out)
    }

    fn nc(&self) -> usize {
        (self.lmax + 1).pow(2)
    }

    /// Point-major `u(x)`: component `i` at `out[3x + i]`.
    fn physical_velocity(&self, flow: &FlowField) -> Vec<f64> {
        let v = self.phys.synthesize_many(self.policy, &self.lattice, 3, |n, row| {
            for (i, r) in row.iter_mut().enumerate() {
                *r = Self::flow_value(flow, n, i);
            }
        });
        v.into_iter().map(|z| z.re).collect()
    }

    /// Point-major `∇u(x)`: `∂_j u_i` at `out[9x + 3i + j]`.
    fn physical_gradient(&self, flow: &FlowField) -> Vec<f64> {
        let v = self.phys.synthesize_many(self.policy, &self.lattice, 9, |n, row| {
            let k = wavevector(n);
            for (b, r) in row.iter_mut().enumerate() {
                *r = I * k[b % 3] * Self::flow_value(flow, n, b / 3);
            }
        });
        v.into_iter().map(|z| z.re).collect()
    }

    fn velocity_gradient_at(grad: &[f64], x: usize) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| grad[9 * x + 3 * i + j]))
    }

    /// `−u·∇x ψ`, pseudo-spectral in `x`.
    pub fn convection(&self, state: &KineticState, flow: &FlowField) -> Result<KineticState> {
        self.check(state)?;
        self.check_flow(flow)?;
        if flow.is_zero() {
            return Ok(self.zero_state());
        }
        let nh = self.half.len();
        let u = self.physical_velocity(flow);
        let grads = self.phys.synthesize_many(self.policy, &self.lattice, 3 * nh, |n, row| {
            if let Some((slot, conj)) = self.lattice.locate(n) {
                let k = wavevector(n);
                for (j, part) in row.chunks_mut(nh).enumerate() {
                    self.fill_half(state.mode(slot), conj, I * k[j], part);
                }
            }
        });
        let mut values = vec![ZERO; self.phys.len() * nh];
        exec::for_each_chunk_mut(self.policy, &mut values, nh, |x, out| {
            let g = &grads[x * 3 * nh..(x + 1) * 3 * nh];
            let v = &u[3 * x..3 * x + 3];
            for (c, o) in out.iter_mut().enumerate() {
                *o = -(g[c] * v[0] + g[nh + c] * v[1] + g[2 * nh + c] * v[2]);
            }
        });
        Ok(self.collect_half(&values))
    }

    /// `−∇p·(P_{p⊥}[(γE + W)p] ψ)`.
    ///
    /// With `A = γE + W` formed pointwise in `x`, the flux divergence is
    /// `Σ_ij A_ij(x) M_ij ψ`, where `M_ij f = ∇p·(p_j f ∇p p_i)` acts on the
    /// sphere alone. `M_ij ψ̂_k` is applied per mode in coefficient space and
    /// only the `A_ij(x)` products are taken on the `x` grid.
    pub fn jeffery_transport(&self, state: &KineticState, flow: &FlowField) -> Result<KineticState> {
        self.check(state)?;
        self.check_flow(flow)?;
        if flow.is_zero() {
            return Ok(self.zero_state());
        }
        let nh = self.half.len();
        let grad = self.physical_gradient(flow);
        let gamma = self.params.gamma;
        let basis: Vec<[SphField; 9]> = exec::map_slice(self.policy, state.modes(), jeffery_basis_all);
        let one = C64::new(1.0, 0.0);
        let phys = self.phys.synthesize_many(self.policy, &self.lattice, 9 * nh, |n, row| {
            if let Some((slot, conj)) = self.lattice.locate(n) {
                for (b, part) in row.chunks_mut(nh).enumerate() {
                    self.fill_half(&basis[slot][b], conj, one, part);
                }
            }
        });
        let mut values = vec![ZERO; self.phys.len() * nh];
        exec::for_each_chunk_mut(self.policy, &mut values, nh, |x, out| {
            let a = jeffery_matrix(&Self::velocity_gradient_at(&grad, x), gamma);
            let m = &phys[x * 9 * nh..(x + 1) * 9 * nh];
            for (b, part) in m.chunks(nh).enumerate() {
                let w = -a[b / 3][b % 3];
                for (o, v) in out.iter_mut().zip(part) {
                    *o += v * w;
                }
            }
        });
        Ok(self.collect_half(&values))
    }

    /// Per-point quadrature form of [`Engine::jeffery_transport`], kept as a
    /// cross-check.
    pub fn jeffery_transport_quadrature(&self, state: &KineticState, flow: &FlowField) -> Result<KineticState> {
        self.check(state)?;
        self.check_flow(flow)?;
        if flow.is_zero() {
            return Ok(self.zero_state());
        }
        let nh = self.half.len();
        let grad = self.physical_gradient(flow);
        let one = C64::new(1.0, 0.0);
        let psi = self.phys.synthesize_many(self.policy, &self.lattice, nh, |n, row| {
            if let Some((slot, conj)) = self.lattice.locate(n) {
                self.fill_half(state.mode(slot), conj, one, row);
            }
        });
        let gamma = self.params.gamma;
        let per_point: Vec<Result<Vec<C64>>> = exec::map_range(self.policy, self.phys.len(), |x| {
            let a = jeffery_matrix(&Self::velocity_gradient_at(&grad, x), gamma);
            let f = SphField::from_coeffs(self.lmax, self.unfold(&psi[x * nh..(x + 1) * nh]))?;
            let div = self.divergence_of_jeffery_flux(&a, &f)?;
            Ok(self.half.iter().map(|&c| -div.coeffs()[c]).collect())
        });
        let values: Vec<C64> = per_point.into_iter().collect::<Result<Vec<_>>>()?.concat();
        Ok(self.collect_half(&values))
    }

    /// `∇p·(P_{p⊥}(A p) f)` truncated to the band limit, for a real matrix `A`.
    pub fn divergence_of_jeffery_flux(&self, a: &[[f64; 3]; 3], f: &SphField) -> Result<SphField> {
        let vals = self.sph.synthesize(f)?;
        let mut flux = TangentField::zeros(vals.len());
        for (node, fr) in self.frames.iter().enumerate() {
            let [p, et, ep] = fr;
            let ap: [f64; 3] = std::array::from_fn(|i| a[i][0] * p[0] + a[i][1] * p[1] + a[i][2] * p[2]);
            // The radial part of A p is orthogonal to both frame vectors.
            let vt = ap[0] * et[0] + ap[1] * et[1] + ap[2] * et[2];
            let vp = ap[0] * ep[0] + ap[1] * ep[1] + ap[2] * ep[2];
            flux.theta[node] = vals[node] * vt;
            flux.phi[node] = vals[node] * vp;
        }
        self.sph.divergence(&flux, self.lmax)
    }

    /// Sum of the selected terms, together with the flow used.
    pub fn rhs(&self, state: &KineticState, terms: Terms, source: FlowSource<'_>) -> Result<(KineticState, FlowField)> {
        self.check(state)?;
        let flow = match source {
            FlowSource::Coupled => self.flow(state)?,
            FlowSource::Prescribed(f) => {
                self.check_flow(f)?;
                f.clone()
            }
            FlowSource::Zero => FlowField::zeros(self.lattice.clone()),
        };
        let mut out = self.zero_state();
        if terms.free_transport {
            out.axpy(1.0, &self.free_transport(state)?);
        }
        if terms.diffusion {
            out.axpy(1.0, &self.diffusion(state)?);
        }
        if terms.jeffery_source {
            out.axpy(1.0, &self.jeffery_source(&flow)?);
        }
        if terms.convection {
            out.axpy(1.0, &self.convection(state, &flow)?);
        }
        if terms.jeffery_transport {
            out.axpy(1.0, &self.jeffery_transport(state, &flow)?);
        }
        out.t = state.t;
        Ok((out, flow))
    }
}

fn engine_for(state: &KineticState, gamma: f64, iota: f64) -> Result<Engine> {
    Engine::new(&Params {
        gamma,
        iota,
        nu: 1.0,
        kmax: state.lattice().kmax(),
        lmax: state.lmax(),
    })
}

/// Active stress of every stored mode.
pub fn stress(state: &KineticState, iota: f64) -> Result<Vec<Tensor3>> {
    engine_for(state, 0.0, iota)?.stress(state)
}

pub fn free_transport(state: &KineticState) -> Result<KineticState> {
    engine_for(state, 0.0, 1.0)?.free_transport(state)
}

pub fn convection(state: &KineticState, flow: &FlowField) -> Result<KineticState> {
    engine_for(state, 0.0, 1.0)?.convection(state, flow)
}

/// Jeffery source for a state of band limit `lmax`.
pub fn jeffery_source(flow: &FlowField, gamma: f64, lmax: usize) -> Result<KineticState> {
    let zero = KineticState::zeros(flow.lattice().clone(), lmax);
    engine_for(&zero, gamma, 1.0)?.jeffery_source(flow)
}

pub fn jeffery_transport(state: &KineticState, flow: &FlowField, gamma: f64) -> Result<KineticState> {
    engine_for(state, gamma, 1.0)?.jeffery_transport(state, flow)
}

/// Full right-hand side with the coupled Stokes flow.
pub fn rhs_full(state: &KineticState, params: &Params) -> Result<KineticState> {
    Engine::new(params)?.rhs(state, Terms::FULL, FlowSource::Coupled).map(|r| r.0)
}

/// `M_ij f = ∇p·(p_j f ∇p p_i) = ½Δ(p_i p_j f) − ½ p_i Δ(p_j f) − p_i p_j f`,
/// exact at band limit `f.lmax() + 2`.
/// All nine [`jeffery_basis`] fields, indexed `3i + j`, sharing the
/// intermediate products.
pub fn jeffery_basis_all(f: &SphField) -> [SphField; 9] {
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let h: [SphField; 3] = std::array::from_fn(|j| f.mul_cos_axis(axes[j]));
    let lap_h: [SphField; 3] = std::array::from_fn(|j| h[j].laplacian());
    let mut q: Vec<Option<SphField>> = vec![None; 9];
    for i in 0..3 {
        for j in i..3 {
            let v = h[j].mul_cos_axis(axes[i]);
            q[3 * j + i] = Some(v.clone());
            q[3 * i + j] = Some(v);
        }
    }
    std::array::from_fn(|b| {
        let (i, j) = (b / 3, b % 3);
        let q = q[b].as_ref().expect("filled");
        let mut out = q.laplacian() * 0.5;
        lap_h[j].mul_axis_into(axes[i], &mut out, C64::new(-0.5, 0.0));
        out.axpy(C64::new(-1.0, 0.0), q);
        out
    })
}

pub fn jeffery_basis(f: &SphField, i: usize, j: usize) -> SphField {
    let mut ei = [0.0; 3];
    ei[i] = 1.0;
    let mut ej = [0.0; 3];
    ej[j] = 1.0;
    let h = f.mul_cos_axis(ej);
    let q = h.mul_cos_axis(ei);
    let mut out = q.laplacian() * 0.5;
    out.axpy(C64::new(-0.5, 0.0), &h.laplacian().mul_cos_axis(ei));
    out.axpy(C64::new(-1.0, 0.0), &q);
    out
}

/// `tr M`.
pub fn trace(m: &Tensor3) -> C64 {
    m[0][0] + m[1][1] + m[2][2]
}
