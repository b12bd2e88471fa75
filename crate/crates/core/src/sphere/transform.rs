use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::field::{lm_index, SphField};
use super::quadrature::SphGrid;
use crate::error::{Error, Result};
use crate::{C64, FOUR_PI};

/// Tangent vector field sampled on a grid, in the local `(e_θ, e_φ)` frame.
/// The radial component is zero by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentField {
    pub theta: Vec<C64>,
    pub phi: Vec<C64>,
}

impl TangentField {
    pub fn zeros(n: usize) -> Self {
        Self {
            theta: vec![C64::new(0.0, 0.0); n],
            phi: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Pointwise `|F|²`.
    pub fn abs_sqr(&self) -> Vec<f64> {
        self.theta
            .iter()
            .zip(&self.phi)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    /// Pointwise Hermitian product `F · conj(G)`.
    pub fn dot_conj(&self, other: &TangentField) -> Vec<C64> {
        (0..self.len())
            .map(|n| self.theta[n] * other.theta[n].conj() + self.phi[n] * other.phi[n].conj())
            .collect()
    }

    /// Pointwise scaling by grid values.
    pub fn scaled(&self, s: &[C64]) -> TangentField {
        TangentField {
            theta: self.theta.iter().zip(s).map(|(a, b)| a * b).collect(),
            phi: self.phi.iter().zip(s).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn scaled_real(&self, s: &[f64]) -> TangentField {
        TangentField {
            theta: self.theta.iter().zip(s).map(|(a, b)| a * b).collect(),
            phi: self.phi.iter().zip(s).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn axpy(&mut self, a: C64, x: &TangentField) {
        for (y, x) in self.theta.iter_mut().zip(&x.theta) {
            *y += a * x;
        }
        for (y, x) in self.phi.iter_mut().zip(&x.phi) {
            *y += a * x;
        }
    }
}

/// Spherical-harmonic transform of band limit `lmax` on a fixed grid.
///
/// Holds the normalized Legendre functions `Θ_lm(θ_i)` and their
/// `θ`-derivatives for `m ≥ 0`; negative orders use `Θ_l,-m = (-1)^m Θ_lm`.
pub struct SphTransform {
    lmax: usize,
    grid: SphGrid,
    theta_tab: Vec<f64>,
    dtheta_tab: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SphTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SphTransform")
            .field("lmax", &self.lmax)
            .field("n_theta", &self.grid.n_theta())
            .field("n_phi", &self.grid.n_phi())
            .finish()
    }
}

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

#[inline]
fn parity(m: i64) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl SphTransform {
    /// Transform on the default grid for `lmax` (exact through degree `2 lmax + 1`).
    pub fn for_band_limit(lmax: usize) -> Self {
        Self::new(lmax, SphGrid::for_band_limit(lmax)).expect("default grid supports lmax")
    }

    /// Transform whose grid integrates degree `degree` exactly; synthesizes
    /// fields up to `lmax`. Used for de-aliased products.
    pub fn padded(lmax: usize, degree: usize) -> Self {
        let degree = degree.max(2 * lmax);
        Self::new(lmax, SphGrid::for_degree(degree)).expect("padded grid supports lmax")
    }

    pub fn new(lmax: usize, grid: SphGrid) -> Result<Self> {
        if grid.exact_degree() < 2 * lmax {
            return Err(Error::GridTooCoarse {
                exact: grid.exact_degree(),
                required: 2 * lmax,
            });
        }
        let nt = grid.n_theta();
        let ntri = tri(lmax, lmax) + 1;
        let mut theta_tab = vec![0.0; nt * ntri];
        let mut dtheta_tab = vec![0.0; nt * ntri];
        for i in 0..nt {
            let x = grid.cos_theta()[i];
            let s = grid.sin_theta()[i];
            let tab = &mut theta_tab[i * ntri..(i + 1) * ntri];
            let mut diag = (1.0 / FOUR_PI).sqrt();
            for m in 0..=lmax {
                if m > 0 {
                    diag *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
                }
                tab[tri(m, m)] = diag;
                if m < lmax {
                    tab[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * diag;
                }
                for l in m + 2..=lmax {
                    let (lf, mf) = (l as f64, m as f64);
                    let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                    let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                    tab[tri(l, m)] = a * (x * tab[tri(l - 1, m)] - b * tab[tri(l - 2, m)]);
                }
            }
            let dtab = &mut dtheta_tab[i * ntri..(i + 1) * ntri];
            for l in 0..=lmax {
                let lf = l as f64;
                for m in 0..=l {
                    let mf = m as f64;
                    let lower = if m == 0 {
                        -tab.get(tri(l, 1)).copied().filter(|_| l >= 1).unwrap_or(0.0)
                    } else {
                        tab[tri(l, m - 1)]
                    };
                    let upper = if m < l { tab[tri(l, m + 1)] } else { 0.0 };
                    dtab[tri(l, m)] = 0.5
                        * (((lf - mf) * (lf + mf + 1.0)).sqrt() * upper
                            - ((lf + mf) * (lf - mf + 1.0)).sqrt() * lower);
                }
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n_phi());
        let inv = planner.plan_fft_inverse(grid.n_phi());
        Ok(Self {
            lmax,
            grid,
            theta_tab,
            dtheta_tab,
            fwd,
            inv,
        })
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn grid(&self) -> &SphGrid {
        &self.grid
    }

    fn ntri(&self) -> usize {
        tri(self.lmax, self.lmax) + 1
    }

    #[inline]
    fn theta_val(&self, i: usize, l: usize, m: i64) -> f64 {
        let v = self.theta_tab[i * self.ntri() + tri(l, m.unsigned_abs() as usize)];
        if m < 0 {
            parity(m) * v
        } else {
            v
        }
    }

    #[inline]
    fn dtheta_val(&self, i: usize, l: usize, m: i64) -> f64 {
        let v = self.dtheta_tab[i * self.ntri() + tri(l, m.unsigned_abs() as usize)];
        if m < 0 {
            parity(m) * v
        } else {
            v
        }
    }

    fn check_field(&self, f: &SphField) -> Result<()> {
        if f.lmax() > self.lmax {
            return Err(Error::BandLimit {
                got: f.lmax(),
                max: self.lmax,
            });
        }
        Ok(())
    }

    fn check_values(&self, n: usize) -> Result<()> {
        if n != self.grid.len() {
            return Err(Error::Shape {
                expected: self.grid.len(),
                got: n,
            });
        }
        Ok(())
    }

    #[inline]
    fn mslot(&self, m: i64) -> usize {
        m.rem_euclid(self.grid.n_phi() as i64) as usize
    }

    /// Pointwise values `Σ f_lm Y_lm` on the grid.
    pub fn synthesize(&self, f: &SphField) -> Result<Vec<C64>> {
        self.check_field(f)?;
        let (nt, np) = (self.grid.n_theta(), self.grid.n_phi());
        let lf = f.lmax() as i64;
        let mut out = vec![C64::new(0.0, 0.0); nt * np];
        for i in 0..nt {
            let ring = &mut out[i * np..(i + 1) * np];
            for m in -lf..=lf {
                let mut acc = C64::new(0.0, 0.0);
                for l in m.unsigned_abs() as usize..=f.lmax() {
                    acc += f.coeffs()[lm_index(l, m)] * self.theta_val(i, l, m);
                }
                ring[self.mslot(m)] += acc;
            }
            self.inv.process(ring);
        }
        Ok(out)
    }

    /// Coefficients up to `lout` of grid values by quadrature,
    /// `f_lm = Σ w · v · conj(Y_lm)`.
    pub fn analyze(&self, values: &[C64], lout: usize) -> Result<SphField> {
        self.check_values(values.len())?;
        if lout > self.lmax {
            return Err(Error::BandLimit {
                got: lout,
                max: self.lmax,
            });
        }
        let (nt, np) = (self.grid.n_theta(), self.grid.n_phi());
        let mut out = SphField::zeros(lout);
        let mut ring = vec![C64::new(0.0, 0.0); np];
        let lo = lout as i64;
        for i in 0..nt {
            ring.copy_from_slice(&values[i * np..(i + 1) * np]);
            self.fwd.process(&mut ring);
            let w = self.grid.ring_weight(i);
            for m in -lo..=lo {
                let xm = ring[self.mslot(m)] * w;
                for l in m.unsigned_abs() as usize..=lout {
                    out.coeffs_mut()[lm_index(l, m)] += xm * self.theta_val(i, l, m);
                }
            }
        }
        Ok(out)
    }

    /// Covariant surface gradient of `f` on the grid.
    pub fn gradient(&self, f: &SphField) -> Result<TangentField> {
        self.check_field(f)?;
        let (nt, np) = (self.grid.n_theta(), self.grid.n_phi());
        let lf = f.lmax() as i64;
        let mut out = TangentField::zeros(nt * np);
        for i in 0..nt {
            let s = self.grid.sin_theta()[i];
            let rt = &mut out.theta[i * np..(i + 1) * np];
            let rp = &mut out.phi[i * np..(i + 1) * np];
            for m in -lf..=lf {
                let mut a = C64::new(0.0, 0.0);
                let mut b = C64::new(0.0, 0.0);
                for l in m.unsigned_abs() as usize..=f.lmax() {
                    let c = f.coeffs()[lm_index(l, m)];
                    a += c * self.theta_val(i, l, m);
                    b += c * self.dtheta_val(i, l, m);
                }
                let slot = self.mslot(m);
                rt[slot] += b;
                rp[slot] += a * C64::new(0.0, m as f64 / s);
            }
            self.inv.process(rt);
            self.inv.process(rp);
        }
        Ok(out)
    }

    /// Weak (Galerkin) divergence: `d_lm = -∫ F · conj(∇Y_lm) dp`, `l ≤ lout`.
    pub fn divergence(&self, field: &TangentField, lout: usize) -> Result<SphField> {
        self.check_values(field.len())?;
        if lout > self.lmax {
            return Err(Error::BandLimit {
                got: lout,
                max: self.lmax,
            });
        }
        let (nt, np) = (self.grid.n_theta(), self.grid.n_phi());
        let mut out = SphField::zeros(lout);
        let mut rt = vec![C64::new(0.0, 0.0); np];
        let mut rp = vec![C64::new(0.0, 0.0); np];
        let lo = lout as i64;
        for i in 0..nt {
            rt.copy_from_slice(&field.theta[i * np..(i + 1) * np]);
            rp.copy_from_slice(&field.phi[i * np..(i + 1) * np]);
            self.fwd.process(&mut rt);
            self.fwd.process(&mut rp);
            let w = self.grid.ring_weight(i);
            let s = self.grid.sin_theta()[i];
            for m in -lo..=lo {
                let slot = self.mslot(m);
                let xt = rt[slot] * (-w);
                let xp = rp[slot] * C64::new(0.0, m as f64 * w / s);
                for l in m.unsigned_abs() as usize..=lout {
                    out.coeffs_mut()[lm_index(l, m)] +=
                        xt * self.dtheta_val(i, l, m) + xp * self.theta_val(i, l, m);
                }
            }
        }
        Ok(out)
    }

    /// De-aliased product `f g` projected to band limit `lout`.
    pub fn product(&self, f: &SphField, g: &SphField, lout: usize) -> Result<SphField> {
        let required = f.lmax() + g.lmax() + lout;
        if self.grid.exact_degree() < required {
            return Err(Error::GridTooCoarse {
                exact: self.grid.exact_degree(),
                required,
            });
        }
        let a = self.synthesize(f)?;
        let b = self.synthesize(g)?;
        let prod: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        self.analyze(&prod, lout)
    }

    /// Quadrature `∫ v dp` of grid values.
    pub fn integrate(&self, values: &[C64]) -> C64 {
        self.grid.integrate(values)
    }

    pub fn integrate_real(&self, values: &[f64]) -> f64 {
        self.grid.integrate(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_field(l: usize, seed: u64) -> SphField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SphField::random(l, &mut rng, |_| 1.0)
    }

    #[test]
    fn y00_synthesizes_to_constant() {
        let t = SphTransform::for_band_limit(6);
        let v = t.synthesize(&SphField::unit(6, 0, 0)).unwrap();
        let c = (1.0 / FOUR_PI).sqrt();
        assert!(v.iter().all(|x| (x - c).norm() < 1e-15));
        let z = t.synthesize(&SphField::zeros(6)).unwrap();
        assert!(z.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn constant_analyzes_to_y00() {
        let t = SphTransform::for_band_limit(8);
        let c = (1.0 / FOUR_PI).sqrt();
        let f = t.analyze(&vec![C64::new(c, 0.0); t.grid().len()], 8).unwrap();
        assert!((f.get(0, 0) - 1.0).norm() < 1e-13);
        assert!(f.max_abs_where(|l| l > 0) < 1e-13);
    }

    #[test]
    fn round_trip_and_parseval() {
        for l in [1, 8, 20] {
            let t = SphTransform::for_band_limit(l);
            let f = rand_field(l, 7 + l as u64);
            let v = t.synthesize(&f).unwrap();
            let q = t.integrate_real(&v.iter().map(|x| x.norm_sqr()).collect::<Vec<_>>());
            assert!((q / f.norm_sqr() - 1.0).abs() < 1e-12);
            let back = t.analyze(&v, l).unwrap();
            assert!((&back - &f).norm() / f.norm() < 1e-12);
        }
    }

    #[test]
    fn matches_closed_form_harmonics() {
        let t = SphTransform::for_band_limit(3);
        let g = t.grid().clone();
        let v = t.synthesize(&SphField::unit(3, 1, 1)).unwrap();
        let v2 = t.synthesize(&SphField::unit(3, 2, -2)).unwrap();
        for i in 0..g.n_theta() {
            for j in 0..g.n_phi() {
                let (th, ph) = (g.theta(i), g.phi(j));
                let y11 = -(3.0 / (8.0 * std::f64::consts::PI)).sqrt()
                    * th.sin()
                    * C64::from_polar(1.0, ph);
                let y2m2 = (15.0 / (32.0 * std::f64::consts::PI)).sqrt()
                    * th.sin().powi(2)
                    * C64::from_polar(1.0, -2.0 * ph);
                assert!((v[i * g.n_phi() + j] - y11).norm() < 1e-14);
                assert!((v2[i * g.n_phi() + j] - y2m2).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_coarse_grid_and_large_fields() {
        let g = SphGrid::new(3, 6).unwrap();
        assert!(matches!(SphTransform::new(4, g), Err(Error::GridTooCoarse { .. })));
        let t = SphTransform::for_band_limit(4);
        assert!(matches!(t.synthesize(&SphField::zeros(5)), Err(Error::BandLimit { .. })));
        assert!(matches!(t.analyze(&[C64::new(0.0, 0.0); 3], 2), Err(Error::Shape { .. })));
    }

    #[test]
    fn gradient_energy_matches_spectrum() {
        let l = 16;
        let t = SphTransform::for_band_limit(l);
        let f = rand_field(l, 3);
        let gr = t.gradient(&f).unwrap();
        let q = t.integrate_real(&gr.abs_sqr());
        assert!((q / f.gradient_norm_sqr() - 1.0).abs() < 1e-10);
        let c = t.gradient(&SphField::unit(l, 0, 0)).unwrap();
        assert!(c.abs_sqr().iter().all(|x| *x < 1e-28));
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let l = 12;
        let t = SphTransform::for_band_limit(l);
        let f = rand_field(l, 11);
        let d = t.divergence(&t.gradient(&f).unwrap(), l).unwrap();
        assert!((&d - &f.laplacian()).norm() / f.laplacian().norm() < 1e-10);
    }

    #[test]
    fn padded_product_is_exact() {
        let (a, b) = (rand_field(5, 1), rand_field(4, 2));
        let t = SphTransform::padded(9, 18);
        let p = t.product(&a, &b, 9).unwrap();
        // z·Y00 oracle through the recurrence: product with the degree-1 field p_z.
        let z = SphField::unit(1, 1, 0) * (FOUR_PI / 3.0).sqrt();
        let pz = t.product(&a, &z, 6).unwrap();
        assert!((&pz - &a.mul_cos_axis([0.0, 0.0, 1.0])).norm() < 1e-12);
        let back = t.synthesize(&p).unwrap();
        let va = t.synthesize(&a).unwrap();
        let vb = t.synthesize(&b).unwrap();
        let err = back
            .iter()
            .zip(va.iter().zip(&vb))
            .map(|(p, (x, y))| (p - x * y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }
}
