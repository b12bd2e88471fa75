//! Physical parameters, the truncated Fourier lattice, the kinetic state and
//! the flow field.
//!
//! Only a half-space of wave vectors is stored (plus `k = 0`); the modes at
//! `-k` are the conjugates. For the kinetic field the conjugation acts on the
//! orientation dependence too: `ψ̂_{-k}(p) = conj(ψ̂_k(p))`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::SphField;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Particle shape parameter, `γ ∈ [-1, 1]`.
    pub gamma: f64,
    /// Dipole strength; `ι > 0` pullers, `ι < 0` pushers.
    pub iota: f64,
    /// Rotational diffusivity `ν > 0`.
    pub nu: f64,
    /// Fourier truncation per axis.
    pub kmax: usize,
    /// Orientation band limit.
    pub lmax: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            iota: -1.0,
            nu: 1e-2,
            kmax: 4,
            lmax: 12,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.gamma) {
            return Err(Error::Domain(format!("gamma = {} not in [-1, 1]", self.gamma)));
        }
        if self.iota == 0.0 || !self.iota.is_finite() {
            return Err(Error::Domain("iota must be nonzero".into()));
        }
        if !(self.nu > 0.0) {
            return Err(Error::Domain(format!("nu = {} must be positive", self.nu)));
        }
        Ok(())
    }
}

/// Integer lattice coordinates `n`, wave vector `k = 2π n`.
pub type ModeIndex = [i32; 3];

pub fn wavevector(n: ModeIndex) -> [f64; 3] {
    [2.0 * PI * n[0] as f64, 2.0 * PI * n[1] as f64, 2.0 * PI * n[2] as f64]
}

pub fn wavenumber(n: ModeIndex) -> f64 {
    let k = wavevector(n);
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

fn in_half_space(n: ModeIndex) -> bool {
    n[2] > 0 || (n[2] == 0 && (n[1] > 0 || (n[1] == 0 && n[0] > 0)))
}

/// Cube `‖n‖_∞ ≤ kmax`, stored as `k = 0` followed by a half space.
#[derive(Debug, PartialEq)]
pub struct Lattice {
    kmax: usize,
    modes: Vec<ModeIndex>,
    /// Dense cube table: slot and conjugation flag of every `n`.
    lookup: Vec<Option<(usize, bool)>>,
}

impl Lattice {
    pub fn new(kmax: usize) -> Arc<Self> {
        let km = kmax as i32;
        let mut modes = vec![[0, 0, 0]];
        for z in 0..=km {
            for y in -km..=km {
                for x in -km..=km {
                    let n = [x, y, z];
                    if in_half_space(n) {
                        modes.push(n);
                    }
                }
            }
        }
        let w = (2 * kmax + 1) as i32;
        let mut lookup = vec![None; (w * w * w) as usize];
        let cube = |n: ModeIndex| (((n[0] + km) * w + n[1] + km) * w + n[2] + km) as usize;
        for (i, n) in modes.iter().enumerate() {
            lookup[cube([-n[0], -n[1], -n[2]])] = Some((i, true));
        }
        for (i, n) in modes.iter().enumerate() {
            lookup[cube(*n)] = Some((i, false));
        }
        Arc::new(Self { kmax, modes, lookup })
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// Stored modes; index 0 is `k = 0`.
    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Number of modes of the full cube, `(2 kmax + 1)³`.
    pub fn full_len(&self) -> usize {
        (2 * self.kmax + 1).pow(3)
    }

    /// Storage slot of `n` and whether the stored value must be conjugated.
    pub fn locate(&self, n: ModeIndex) -> Option<(usize, bool)> {
        let km = self.kmax as i32;
        if n.iter().any(|c| c.abs() > km) {
            return None;
        }
        let w = 2 * km + 1;
        self.lookup[(((n[0] + km) * w + n[1] + km) * w + n[2] + km) as usize]
    }

    /// Multiplicity of a stored mode in full-lattice sums (1 for `k = 0`, else 2).
    pub fn multiplicity(&self, slot: usize) -> f64 {
        if slot == 0 {
            1.0
        } else {
            2.0
        }
    }
}

/// Perturbation `ψ(t, x, p)` of the isotropic state.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticState {
    pub t: f64,
    lattice: Arc<Lattice>,
    lmax: usize,
    modes: Vec<SphField>,
}

impl KineticState {
    pub fn zeros(lattice: Arc<Lattice>, lmax: usize) -> Self {
        let modes = vec![SphField::zeros(lmax); lattice.len()];
        Self { t: 0.0, lattice, lmax, modes }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn modes(&self) -> &[SphField] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [SphField] {
        &mut self.modes
    }

    pub fn mode(&self, slot: usize) -> &SphField {
        &self.modes[slot]
    }

    pub fn mode_mut(&mut self, slot: usize) -> &mut SphField {
        &mut self.modes[slot]
    }

    /// `ψ̂_n` for any `n` in the cube, reconstructing conjugates.
    pub fn get(&self, n: ModeIndex) -> Option<SphField> {
        self.lattice.locate(n).map(|(i, c)| {
            if c {
                self.modes[i].conj_field()
            } else {
                self.modes[i].clone()
            }
        })
    }

    /// Sets `ψ̂_n` (and implicitly `ψ̂_{-n}`); the zero mode is made real.
    pub fn set(&mut self, n: ModeIndex, f: SphField) -> Result<()> {
        let (i, c) = self
            .lattice
            .locate(n)
            .ok_or_else(|| Error::Domain(format!("mode {n:?} outside the lattice")))?;
        let mut f = f.resized(self.lmax);
        if c {
            f = f.conj_field();
        }
        if i == 0 {
            f.make_real();
        }
        self.modes[i] = f;
        Ok(())
    }

    /// `∫ ψ̂_0 dp`, the total mass of the perturbation.
    pub fn mass(&self) -> C64 {
        self.modes[0].sphere_integral()
    }

    /// Deviation of the zero mode from a real-valued function; the other
    /// modes satisfy the reality constraint by construction.
    pub fn reality_defect(&self) -> f64 {
        self.modes[0].imag_part_norm()
    }

    pub fn enforce_reality(&mut self) {
        self.modes[0].make_real();
    }

    /// L²_x L²_p norm over the full lattice.
    pub fn l2_norm(&self) -> f64 {
        sobolev_norm(self, 0.0)
    }

    pub fn axpy(&mut self, a: f64, x: &KineticState) {
        for (y, x) in self.modes.iter_mut().zip(&x.modes) {
            y.axpy(C64::new(a, 0.0), x);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for m in &mut self.modes {
            *m *= a;
        }
    }

    /// Real L² inner product `Re Σ_k ⟨a_k, b_k⟩` over the full lattice.
    pub fn real_inner(&self, other: &KineticState) -> f64 {
        self.modes
            .iter()
            .zip(&other.modes)
            .enumerate()
            .map(|(i, (a, b))| self.lattice.multiplicity(i) * a.inner(b).re)
            .sum()
    }

    pub(crate) fn from_parts(t: f64, lattice: Arc<Lattice>, lmax: usize, modes: Vec<SphField>) -> Self {
        debug_assert_eq!(modes.len(), lattice.len());
        Self { t, lattice, lmax, modes }
    }
}

/// `(Σ_k (1 + |k|²)^s ‖ψ̂_k‖²)^{1/2}` over the full lattice.
pub fn sobolev_norm(state: &KineticState, s: f64) -> f64 {
    weighted_norm(state, |k| (1.0 + k * k).powf(s))
}

/// `(Σ_{k≠0} |k|^{2s} ‖ψ̂_k‖²)^{1/2}`.
pub fn homogeneous_sobolev_norm(state: &KineticState, s: f64) -> f64 {
    weighted_norm(state, |k| if k == 0.0 { 0.0 } else { k.powf(2.0 * s) })
}

fn weighted_norm(state: &KineticState, weight: impl Fn(f64) -> f64) -> f64 {
    let lat = state.lattice();
    lat.modes()
        .iter()
        .enumerate()
        .map(|(i, n)| lat.multiplicity(i) * weight(wavenumber(*n)) * state.modes[i].norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Incompressible Fourier velocity field `û_k ∈ C³` on the same lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    lattice: Arc<Lattice>,
    modes: Vec<[C64; 3]>,
}

impl FlowField {
    pub fn zeros(lattice: Arc<Lattice>) -> Self {
        let modes = vec![[C64::new(0.0, 0.0); 3]; lattice.len()];
        Self { lattice, modes }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn modes(&self) -> &[[C64; 3]] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [[C64; 3]] {
        &mut self.modes
    }

    pub fn get(&self, n: ModeIndex) -> Option<[C64; 3]> {
        self.lattice.locate(n).map(|(i, c)| {
            let u = self.modes[i];
            if c {
                [u[0].conj(), u[1].conj(), u[2].conj()]
            } else {
                u
            }
        })
    }

    pub fn set(&mut self, n: ModeIndex, u: [C64; 3]) -> Result<()> {
        let (i, c) = self
            .lattice
            .locate(n)
            .ok_or_else(|| Error::Domain(format!("mode {n:?} outside the lattice")))?;
        self.modes[i] = if c { [u[0].conj(), u[1].conj(), u[2].conj()] } else { u };
        if i == 0 {
            self.modes[0] = [C64::new(0.0, 0.0); 3];
        }
        Ok(())
    }

    /// `max_k |k·û_k| / |k|`, zero for an incompressible field.
    pub fn divergence_defect(&self) -> f64 {
        self.lattice
            .modes()
            .iter()
            .zip(&self.modes)
            .skip(1)
            .map(|(n, u)| {
                let k = wavevector(*n);
                let kn = wavenumber(*n);
                (u[0] * k[0] + u[1] * k[1] + u[2] * k[2]).norm() / kn
            })
            .fold(self.modes[0].iter().map(|c| c.norm()).sum(), f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|u| u.iter().all(|c| *c == C64::new(0.0, 0.0)))
    }
}

/// `(Σ_k (1 + |k|²)^s |û_k|²)^{1/2}` over the full lattice.
pub fn flow_norm(flow: &FlowField, s: f64) -> f64 {
    let lat = flow.lattice();
    lat.modes()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let k = wavenumber(*n);
            let a: f64 = flow.modes[i].iter().map(|c| c.norm_sqr()).sum();
            lat.multiplicity(i) * (1.0 + k * k).powf(s) * a
        })
        .sum::<f64>()
        .sqrt()
}

/// Seeded random state with Gaussian coefficients of standard deviation
/// `profile(n, l)`; the zero mode is real with zero mass.
pub fn random_state(
    lattice: Arc<Lattice>,
    lmax: usize,
    seed: u64,
    profile: impl Fn(ModeIndex, usize) -> f64,
) -> KineticState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = KineticState::zeros(lattice.clone(), lmax);
    for (i, n) in lattice.modes().iter().enumerate() {
        let mut f = SphField::random(lmax, &mut rng, |l| profile(*n, l));
        if i == 0 {
            f.make_real();
            f.set(0, 0, C64::new(0.0, 0.0));
        }
        state.modes[i] = f;
    }
    state
}

const CHECKPOINT_FORMAT: &str = "kinsusp-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModeRecord {
    n: ModeIndex,
    coeffs: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    params: Params,
    t: f64,
    kmax: usize,
    lmax: usize,
    modes: Vec<ModeRecord>,
}

/// Writes a versioned JSON checkpoint of `(params, t, coefficients)`.
pub fn write_checkpoint(path: &Path, params: &Params, state: &KineticState) -> Result<()> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        params: *params,
        t: state.t,
        kmax: state.lattice.kmax(),
        lmax: state.lmax,
        modes: state
            .lattice
            .modes()
            .iter()
            .zip(&state.modes)
            .map(|(n, f)| ModeRecord {
                n: *n,
                coeffs: f.coeffs().iter().map(|c| [c.re, c.im]).collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string(&ck).map_err(|e| Error::Checkpoint(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(Params, KineticState)> {
    let text = std::fs::read_to_string(path)?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported header {} v{}",
            ck.format, ck.version
        )));
    }
    let lattice = Lattice::new(ck.kmax);
    let mut state = KineticState::zeros(lattice, ck.lmax);
    state.t = ck.t;
    for rec in ck.modes {
        let coeffs = rec.coeffs.iter().map(|c| C64::new(c[0], c[1])).collect();
        let f = SphField::from_coeffs(ck.lmax, coeffs)?;
        let (i, c) = state
            .lattice
            .locate(rec.n)
            .ok_or_else(|| Error::Checkpoint(format!("mode {:?} outside lattice", rec.n)))?;
        if c {
            return Err(Error::Checkpoint(format!("mode {:?} not in stored half space", rec.n)));
        }
        state.modes[i] = f;
    }
    Ok((ck.params, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_counts() {
        let lat = Lattice::new(2);
        assert_eq!(lat.full_len(), 125);
        assert_eq!(lat.len(), 63);
        for x in -2..=2 {
            for y in -2..=2 {
                for z in -2..=2 {
                    assert!(lat.locate([x, y, z]).is_some());
                }
            }
        }
        assert_eq!(lat.locate([0, 0, 0]), Some((0, false)));
        assert!(lat.locate([3, 0, 0]).is_none());
    }

    #[test]
    fn single_mode_norm_counts_conjugate() {
        let lat = Lattice::new(1);
        let mut s = KineticState::zeros(lat, 4);
        s.set([0, 0, 1], SphField::unit(4, 2, 1)).unwrap();
        assert!((sobolev_norm(&s, 0.0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sobolev_norm(&KineticState::zeros(Lattice::new(1), 4), 1.0), 0.0);
        // ψ̂_{-k} is the conjugate function.
        let back = s.get([0, 0, -1]).unwrap();
        assert_eq!(back, SphField::unit(4, 2, 1).conj_field());
    }

    #[test]
    fn two_mode_sobolev_matches_direct_sum() {
        let lat = Lattice::new(2);
        let mut s = KineticState::zeros(lat, 3);
        let a = SphField::unit(3, 1, 0) * C64::new(0.5, -0.2);
        let b = SphField::unit(3, 3, -2) * 1.5;
        s.set([1, 0, 0], a.clone()).unwrap();
        s.set([1, -2, 1], b.clone()).unwrap();
        let (k1, k2) = (2.0 * PI, 2.0 * PI * 6f64.sqrt());
        let direct = 2.0 * ((1.0 + k1 * k1).powi(2) * a.norm_sqr() + (1.0 + k2 * k2).powi(2) * b.norm_sqr());
        assert!((sobolev_norm(&s, 2.0) / direct.sqrt() - 1.0).abs() < 1e-14);
        let hom = 2.0 * (k1.powi(4) * a.norm_sqr() + k2.powi(4) * b.norm_sqr());
        assert!((homogeneous_sobolev_norm(&s, 2.0) / hom.sqrt() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flow_norms() {
        let lat = Lattice::new(1);
        let mut u = FlowField::zeros(lat);
        assert_eq!(flow_norm(&u, 1.0), 0.0);
        u.set([0, 1, 0], [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert!((flow_norm(&u, 0.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!(u.divergence_defect() < 1e-15);
        let k = 2.0 * PI;
        assert!((flow_norm(&u, 1.5) - (2.0 * (1.0 + k * k).powf(1.5)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn random_state_invariants() {
        let lat = Lattice::new(1);
        let a = random_state(lat.clone(), 5, 42, |_, l| 1.0 / (1 + l) as f64);
        let b = random_state(lat.clone(), 5, 42, |_, l| 1.0 / (1 + l) as f64);
        assert_eq!(a, b);
        assert!(a.mass().norm() < 1e-15);
        assert!(a.reality_defect() < 1e-15);
        let z = random_state(lat.clone(), 5, 1, |_, _| 0.0);
        assert_eq!(z.l2_norm(), 0.0);
        // Concentrated at one (k, l): the norm is 2 Σ_m |g_m|² (1+|k|²)^s.
        let c = random_state(lat, 5, 9, |n, l| if n == [1, 0, 0] && l == 2 { 1.0 } else { 0.0 });
        let f = c.get([1, 0, 0]).unwrap();
        let k = 2.0 * PI;
        let closed = (2.0 * (1.0 + k * k) * f.degree_spectrum()[2]).sqrt();
        assert!((sobolev_norm(&c, 1.0) / closed - 1.0).abs() < 1e-14);
    }

    #[test]
    fn params_validation() {
        assert!(Params::default().validate().is_ok());
        assert!(Params { gamma: 1.5, ..Params::default() }.validate().is_err());
        assert!(Params { nu: 0.0, ..Params::default() }.validate().is_err());
        assert!(Params { iota: 0.0, ..Params::default() }.validate().is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = std::env::temp_dir().join(format!("kinsusp-ck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.json");
        let mut s = random_state(Lattice::new(1), 3, 3, |_, _| 0.1);
        s.t = 1.25;
        write_checkpoint(&path, &Params::default(), &s).unwrap();
        let (p, back) = read_checkpoint(&path).unwrap();
        assert_eq!(p, Params::default());
        assert_eq!(back, s);
        std::fs::write(&path, r#"{"format":"other","version":9,"params":{"gamma":0,"iota":1,"nu":1,"kmax":0,"lmax":0},"t":0,"kmax":0,"lmax":0,"modes":[]}"#).unwrap();
        assert!(read_checkpoint(&path).is_err());
        std::fs::remove_dir_all(dir).ok();
    }
}
