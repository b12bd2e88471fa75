use std::sync::{Arc, RwLock};
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{C64, FOUR_PI};

/// Position of `(l, m)` in a coefficient vector.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

pub fn check_unit_axis(axis: [f64; 3]) -> Result<()> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitAxis { norm });
    }
    Ok(())
}

/// Recurrence factors of `cos θ` and `sin θ e^{±iφ}` for every `(l, m)` with
/// `l ≤ lmax`, cached process-wide and grown on demand.
fn axis_table(lmax: usize) -> Arc<Vec<[f64; 6]>> {
    static CACHE: RwLock<Option<Arc<Vec<[f64; 6]>>>> = RwLock::new(None);
    let need = (lmax + 1) * (lmax + 1);
    if let Some(t) = CACHE.read().expect("axis table lock").as_ref() {
        if t.len() >= need {
            return t.clone();
        }
    }
    let mut guard = CACHE.write().expect("axis table lock");
    if let Some(t) = guard.as_ref() {
        if t.len() >= need {
            return t.clone();
        }
    }
    let top = lmax.max(32);
    let mut t = vec![[0.0; 6]; (top + 1) * (top + 1)];
    for l in 0..=top {
        let lf = l as f64;
        let dup = (2.0 * lf + 1.0) * (2.0 * lf + 3.0);
        let ddn = (2.0 * lf - 1.0) * (2.0 * lf + 1.0);
        for m in -(l as i64)..=l as i64 {
            let mf = m as f64;
            let nonneg = |x: f64| x.max(0.0);
            t[lm_index(l, m)] = [
                (nonneg((lf + 1.0).powi(2) - mf * mf) / dup).sqrt(),
                if l > 0 { (nonneg(lf * lf - mf * mf) / ddn).sqrt() } else { 0.0 },
                ((lf + mf + 1.0) * (lf + mf + 2.0) / dup).sqrt(),
                if l > 0 { (nonneg((lf - mf) * (lf - mf - 1.0)) / ddn).sqrt() } else { 0.0 },
                ((lf - mf + 1.0) * (lf - mf + 2.0) / dup).sqrt(),
                if l > 0 { (nonneg((lf + mf) * (lf + mf - 1.0)) / ddn).sqrt() } else { 0.0 },
            ];
        }
    }
    let t = Arc::new(t);
    *guard = Some(t.clone());
    t
}

/// Band-limited function on the sphere, stored as coefficients `f_lm`,
/// `0 ≤ l ≤ lmax`, `-l ≤ m ≤ l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphField {
    lmax: usize,
    coeffs: Vec<C64>,
}

impl SphField {
    pub fn zeros(lmax: usize) -> Self {
        Self {
            lmax,
            coeffs: vec![C64::new(0.0, 0.0); (lmax + 1) * (lmax + 1)],
        }
    }

    pub fn from_coeffs(lmax: usize, coeffs: Vec<C64>) -> Result<Self> {
        let expected = (lmax + 1) * (lmax + 1);
        if coeffs.len() != expected {
            return Err(Error::Shape {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self { lmax, coeffs })
    }

    /// Single harmonic `Y_lm` embedded at band limit `lmax`.
    pub fn unit(lmax: usize, l: usize, m: i64) -> Self {
        let mut f = Self::zeros(lmax);
        f.set(l, m, C64::new(1.0, 0.0));
        f
    }

    /// Gaussian random coefficients with per-degree amplitude `profile(l)`.
    pub fn random<R: Rng>(lmax: usize, rng: &mut R, profile: impl Fn(usize) -> f64) -> Self {
        let mut f = Self::zeros(lmax);
        for l in 0..=lmax {
            let a = profile(l);
            for m in -(l as i64)..=l as i64 {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                f.set(l, m, C64::new(re, im) * a);
            }
        }
        f
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn get(&self, l: usize, m: i64) -> C64 {
        if l > self.lmax || m.unsigned_abs() as usize > l {
            return C64::new(0.0, 0.0);
        }
        self.coeffs[lm_index(l, m)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: i64, v: C64) {
        self.coeffs[lm_index(l, m)] = v;
    }

    /// Copy at another band limit (zero-padded or truncated).
    pub fn resized(&self, lmax: usize) -> Self {
        let mut out = Self::zeros(lmax);
        let n = (lmax.min(self.lmax) + 1).pow(2);
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    /// Sum of `|f_lm|²`, the squared L² norm under the orthonormal convention.
    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨f, g⟩ = ∫ f conj(g) dp`.
    pub fn inner(&self, other: &SphField) -> C64 {
        let n = (self.lmax.min(other.lmax) + 1).pow(2);
        self.coeffs[..n]
            .iter()
            .zip(&other.coeffs[..n])
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    /// Coefficients of the pointwise complex conjugate `p ↦ conj(f(p))`.
    pub fn conj_field(&self) -> Self {
        let mut out = Self::zeros(self.lmax);
        for l in 0..=self.lmax {
            for m in -(l as i64)..=l as i64 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                out.set(l, m, self.get(l, -m).conj() * sign);
            }
        }
        out
    }

    /// Distance to the set of real-valued functions, `‖f - conj(f)‖ / 2`.
    pub fn imag_part_norm(&self) -> f64 {
        (self - &self.conj_field()).norm() * 0.5
    }

    /// Replaces `f` by `(f + conj f) / 2`.
    pub fn make_real(&mut self) {
        let c = self.conj_field();
        for (a, b) in self.coeffs.iter_mut().zip(c.coeffs) {
            *a = (*a + b) * 0.5;
        }
    }

    /// `Δ_p f`: coefficients scaled by `-l(l+1)`.
    pub fn laplacian(&self) -> Self {
        let mut out = self.clone();
        for l in 0..=self.lmax {
            let ev = -((l * (l + 1)) as f64);
            for m in -(l as i64)..=l as i64 {
                out.coeffs[lm_index(l, m)] *= ev;
            }
        }
        out
    }

    /// Multiplies each degree-`l` block by `factor(l)`.
    pub fn scale_by_degree(&mut self, factor: impl Fn(usize) -> f64) {
        for l in 0..=self.lmax {
            let s = factor(l);
            let a = l * l;
            for c in &mut self.coeffs[a..a + 2 * l + 1] {
                *c *= s;
            }
        }
    }

    /// `Σ l(l+1) |f_lm|² = ‖∇f‖²`.
    pub fn gradient_norm_sqr(&self) -> f64 {
        (0..=self.lmax)
            .map(|l| {
                let a = l * l;
                let s: f64 = self.coeffs[a..a + 2 * l + 1].iter().map(|c| c.norm_sqr()).sum();
                (l * (l + 1)) as f64 * s
            })
            .sum()
    }

    /// `∫_{S²} f dp = √(4π) f_00`.
    pub fn sphere_integral(&self) -> C64 {
        self.coeffs[0] * FOUR_PI.sqrt()
    }

    /// Coefficients of `(p·axis) f` at band limit `lmax + 1` (exact).
    pub fn mul_cos_axis(&self, axis: [f64; 3]) -> Self {
        let mut out = Self::zeros(self.lmax + 1);
        self.mul_axis_into(axis, &mut out, C64::new(1.0, 0.0));
        out
    }

    /// `out += scale · (p·axis) f`, dropping degrees above `out.lmax()`.
    ///
    /// `axis` need not be a unit vector: the map is linear in it.
    pub fn mul_axis_into(&self, axis: [f64; 3], out: &mut SphField, scale: C64) {
        let cz = scale * axis[2];
        // p·a = a_z z + ½(a_x - i a_y) s₊ + ½(a_x + i a_y) s₋,  s± = sin θ e^{±iφ}
        let cplus = scale * C64::new(axis[0], -axis[1]) * 0.5;
        let cminus = scale * C64::new(axis[0], axis[1]) * 0.5;
        let lout = out.lmax;
        let table = axis_table(self.lmax);
        let zero = C64::new(0.0, 0.0);
        for l in 0..=self.lmax {
            let up = l < lout;
            let down = l >= 1 && l - 1 <= lout;
            for m in -(l as i64)..=l as i64 {
                let idx = lm_index(l, m);
                let f = self.coeffs[idx];
                if f == zero {
                    continue;
                }
                let [az_up, az_dn, bp_up, bp_dn, bm_up, bm_dn] = table[idx];
                let (fz, fp, fm) = (cz * f, cplus * f, cminus * f);
                if up {
                    out.coeffs[lm_index(l + 1, m)] += fz * az_up;
                    out.coeffs[lm_index(l + 1, m + 1)] -= fp * bp_up;
                    out.coeffs[lm_index(l + 1, m - 1)] += fm * bm_up;
                }
                if down {
                    if (m.unsigned_abs() as usize) < l {
                        out.coeffs[lm_index(l - 1, m)] += fz * az_dn;
                    }
                    if m + 1 < l as i64 {
                        out.coeffs[lm_index(l - 1, m + 1)] += fp * bp_dn;
                    }
                    if m - 1 > -(l as i64) {
                        out.coeffs[lm_index(l - 1, m - 1)] -= fm * bm_dn;
                    }
                }
            }
        }
    }

    pub fn axpy(&mut self, a: C64, x: &SphField) {
        let n = (self.lmax.min(x.lmax) + 1).pow(2);
        for (y, x) in self.coeffs[..n].iter_mut().zip(&x.coeffs[..n]) {
            *y += a * x;
        }
    }

    /// Largest coefficient magnitude among degrees `l` satisfying `pred`.
    pub fn max_abs_where(&self, pred: impl Fn(usize) -> bool) -> f64 {
        let mut mx: f64 = 0.0;
        for l in 0..=self.lmax {
            if pred(l) {
                for m in -(l as i64)..=l as i64 {
                    mx = mx.max(self.get(l, m).norm());
                }
            }
        }
        mx
    }

    /// Per-degree energies `Σ_m |f_lm|²`.
    pub fn degree_spectrum(&self) -> Vec<f64> {
        (0..=self.lmax)
            .map(|l| self.coeffs[l * l..l * l + 2 * l + 1].iter().map(|c| c.norm_sqr()).sum())
            .collect()
    }
}

impl Add<&SphField> for &SphField {
    type Output = SphField;
    fn add(self, rhs: &SphField) -> SphField {
        let mut out = self.resized(self.lmax.max(rhs.lmax));
        out += rhs;
        out
    }
}

impl Sub<&SphField> for &SphField {
    type Output = SphField;
    fn sub(self, rhs: &SphField) -> SphField {
        let mut out = self.resized(self.lmax.max(rhs.lmax));
        out -= rhs;
        out
    }
}

impl AddAssign<&SphField> for SphField {
    fn add_assign(&mut self, rhs: &SphField) {
        self.axpy(C64::new(1.0, 0.0), rhs);
    }
}

impl SubAssign<&SphField> for SphField {
    fn sub_assign(&mut self, rhs: &SphField) {
        self.axpy(C64::new(-1.0, 0.0), rhs);
    }
}

impl MulAssign<C64> for SphField {
    fn mul_assign(&mut self, rhs: C64) {
        for c in &mut self.coeffs {
            *c *= rhs;
        }
    }
}

impl MulAssign<f64> for SphField {
    fn mul_assign(&mut self, rhs: f64) {
        for c in &mut self.coeffs {
            *c *= rhs;
        }
    }
}

impl Mul<C64> for &SphField {
    type Output = SphField;
    fn mul(self, rhs: C64) -> SphField {
        let mut out = self.clone();
        out *= rhs;
        out
    }
}

impl Mul<f64> for &SphField {
    type Output = SphField;
    fn mul(self, rhs: f64) -> SphField {
        let mut out = self.clone();
        out *= rhs;
        out
    }
}

impl Neg for &SphField {
    type Output = SphField;
    fn neg(self) -> SphField {
        self * -1.0
    }
}

impl Mul<f64> for SphField {
    type Output = SphField;
    fn mul(mut self, rhs: f64) -> SphField {
        self *= rhs;
        self
    }
}

impl Mul<C64> for SphField {
    type Output = SphField;
    fn mul(mut self, rhs: C64) -> SphField {
        self *= rhs;
        self
    }
}
