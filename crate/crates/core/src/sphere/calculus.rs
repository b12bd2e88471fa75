//! Axis-dependent fields and tangent-vector calculus used by the diagnostics.

use super::field::{check_unit_axis, SphField};
use super::quadrature::SphGrid;
use super::transform::{SphTransform, TangentField};
use crate::error::{Error, Result};
use crate::C64;

/// `∇(p·k̂) = k̂ − (p·k̂) p` at every node, in the local frame.
pub fn grad_axis(axis: [f64; 3], grid: &SphGrid) -> Result<TangentField> {
    check_unit_axis(axis)?;
    let mut out = TangentField::zeros(grid.len());
    for i in 0..grid.n_theta() {
        for j in 0..grid.n_phi() {
            let (et, ep) = grid.frame(i, j);
            let n = i * grid.n_phi() + j;
            out.theta[n] = C64::new(dot(axis, et), 0.0);
            out.phi[n] = C64::new(dot(axis, ep), 0.0);
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Ambient Cartesian components of a tangent field.
pub fn tangent_to_cartesian(field: &TangentField, grid: &SphGrid) -> [Vec<C64>; 3] {
    let n = grid.len();
    let mut out = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
    for i in 0..grid.n_theta() {
        for j in 0..grid.n_phi() {
            let (et, ep) = grid.frame(i, j);
            let k = i * grid.n_phi() + j;
            for (c, comp) in out.iter_mut().enumerate() {
                comp[k] = field.theta[k] * et[c] + field.phi[k] * ep[c];
            }
        }
    }
    out
}

/// Tangential projection of an ambient vector field given by components.
pub fn cartesian_to_tangent(comps: &[Vec<C64>; 3], grid: &SphGrid) -> TangentField {
    let mut out = TangentField::zeros(grid.len());
    for i in 0..grid.n_theta() {
        for j in 0..grid.n_phi() {
            let (et, ep) = grid.frame(i, j);
            let k = i * grid.n_phi() + j;
            for c in 0..3 {
                out.theta[k] += comps[c][k] * et[c];
                out.phi[k] += comps[c][k] * ep[c];
            }
        }
    }
    out
}

/// Connection (rough) Laplacian of a tangent field whose ambient components
/// are the band-limited fields `comps`: `Δ^∇ V = P_{p⊥}(Δ V_cart) + V`.
pub fn rough_laplacian(comps: &[SphField; 3], t: &SphTransform) -> Result<TangentField> {
    let lap = [
        t.synthesize(&comps[0].laplacian())?,
        t.synthesize(&comps[1].laplacian())?,
        t.synthesize(&comps[2].laplacian())?,
    ];
    let v = [
        t.synthesize(&comps[0])?,
        t.synthesize(&comps[1])?,
        t.synthesize(&comps[2])?,
    ];
    let mut out = cartesian_to_tangent(&lap, t.grid());
    out.axpy(C64::new(1.0, 0.0), &cartesian_to_tangent(&v, t.grid()));
    Ok(out)
}

/// Outcome of the commutator identity check on one field.
#[derive(Clone, Copy, Debug)]
pub struct CommutatorReport {
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    /// `‖lhs − rhs‖ / ‖rhs‖` in L²(S²).
    pub relative_residual: f64,
}

/// Checks `Δ(Y ∇(p·k̂)) = −∇(p·k̂) Y − 2 (p·k̂) ∇Y + ∇(p·k̂) ΔY` for scalar `Y`.
///
/// The left side is formed spectrally from the ambient components
/// `k̂_j Y − (p·k̂) p_j Y` (band limit `L + 2`); the right side pointwise.
/// `t` must support band limit `Y.lmax() + 2`.
pub fn commutator_residual(y: &SphField, axis: [f64; 3], t: &SphTransform) -> Result<CommutatorReport> {
    check_unit_axis(axis)?;
    let l = y.lmax();
    if t.lmax() < l + 2 {
        return Err(Error::BandLimit { got: l + 2, max: t.lmax() });
    }
    let yk = y.mul_cos_axis(axis);
    let mut comps = [SphField::zeros(l + 2), SphField::zeros(l + 2), SphField::zeros(l + 2)];
    for (j, comp) in comps.iter_mut().enumerate() {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        comp.axpy(C64::new(axis[j], 0.0), y);
        yk.mul_axis_into(e, comp, C64::new(-1.0, 0.0));
    }
    let lhs = rough_laplacian(&comps, t)?;

    let grid = t.grid();
    let ga = grad_axis(axis, grid)?;
    let yv = t.synthesize(y)?;
    let ly = t.synthesize(&y.laplacian())?;
    let gy = t.gradient(y)?;
    let x = grid.sample(|p| dot(p, axis));
    let mut rhs = ga.scaled(&ly.iter().zip(&yv).map(|(a, b)| a - b).collect::<Vec<_>>());
    let xs: Vec<C64> = x.iter().map(|v| C64::new(-2.0 * v, 0.0)).collect();
    rhs.axpy(C64::new(1.0, 0.0), &gy.scaled(&xs));

    let mut diff = lhs.clone();
    diff.axpy(C64::new(-1.0, 0.0), &rhs);
    let n2 = |f: &TangentField| t.integrate_real(&f.abs_sqr()).sqrt();
    let (ln, rn, dn) = (n2(&lhs), n2(&rhs), n2(&diff));
    Ok(CommutatorReport {
        lhs_norm: ln,
        rhs_norm: rn,
        relative_residual: if rn > 0.0 { dn / rn } else { dn },
    })
}

/// Slack of the interpolation inequality
/// `σ^{1/2}‖g‖² ≤ (σ/2)‖∇g‖² + 2‖∇(p·e) g‖²`, i.e. right side minus left side.
///
/// Uses `|∇(p·e)|² = 1 − (p·e)²`, so every term is an exact coefficient sum.
pub fn interpolation_gap(g: &SphField, sigma: f64, axis: [f64; 3]) -> Result<f64> {
    check_unit_axis(axis)?;
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Domain(format!("sigma = {sigma} not in (0, 1]")));
    }
    let n2 = g.norm_sqr();
    let weighted = n2 - g.mul_cos_axis(axis).norm_sqr();
    Ok(0.5 * sigma * g.gradient_norm_sqr() + 2.0 * weighted - sigma.sqrt() * n2)
}

/// Ambient components of `∇f` as fields of band limit `f.lmax() + 1`.
pub fn gradient_cartesian(f: &SphField, t: &SphTransform) -> Result<[SphField; 3]> {
    let lo = f.lmax() + 1;
    if t.lmax() < lo {
        return Err(Error::BandLimit { got: lo, max: t.lmax() });
    }
    let g = t.gradient(f)?;
    let c = tangent_to_cartesian(&g, t.grid());
    Ok([t.analyze(&c[0], lo)?, t.analyze(&c[1], lo)?, t.analyze(&c[2], lo)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grad_axis_identities() {
        let grid = SphGrid::for_band_limit(10);
        let ez = [0.0, 0.0, 1.0];
        let g = grad_axis(ez, &grid).unwrap();
        let e = [0.6, 0.0, 0.8];
        let ge = grad_axis(e, &grid).unwrap();
        let abs = ge.abs_sqr();
        for (n, p) in grid.points().iter().enumerate() {
            let x = dot(*p, e);
            assert!((abs[n] + x * x - 1.0).abs() < 1e-14);
            // |∇(p·e_z)| = sin θ
            let s = (1.0 - p[2] * p[2]).sqrt();
            assert!((g.abs_sqr()[n].sqrt() - s).abs() < 1e-14);
        }
        assert!(grad_axis([1.0, 1.0, 0.0], &grid).is_err());
    }

    #[test]
    fn gradient_of_axis_function_is_tangential_projection() {
        let t = SphTransform::for_band_limit(4);
        let e = [0.0, 0.6, -0.8];
        let f = SphField::unit(0, 0, 0).mul_cos_axis(e) * crate::FOUR_PI.sqrt();
        let gf = t.gradient(&f.resized(4)).unwrap();
        let ga = grad_axis(e, t.grid()).unwrap();
        let err = gf.theta.iter().zip(&ga.theta).chain(gf.phi.iter().zip(&ga.phi));
        assert!(err.map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) < 1e-13);
    }

    #[test]
    fn rotation_field_is_divergence_free() {
        let t = SphTransform::for_band_limit(8);
        let w = [0.3, -1.1, 0.4];
        let comps = [
            t.grid().sample(|p| C64::new(w[1] * p[2] - w[2] * p[1], 0.0)),
            t.grid().sample(|p| C64::new(w[2] * p[0] - w[0] * p[2], 0.0)),
            t.grid().sample(|p| C64::new(w[0] * p[1] - w[1] * p[0], 0.0)),
        ];
        let f = cartesian_to_tangent(&comps, t.grid());
        let d = t.divergence(&f, 8).unwrap();
        assert!(d.norm() < 1e-13);
    }

    #[test]
    fn killing_field_rough_laplacian() {
        // ω × p is Killing: rough Laplacian equals −Ric(V) = −V.
        let t = SphTransform::for_band_limit(6);
        let c = (crate::FOUR_PI / 3.0).sqrt();
        let px = (&SphField::unit(1, 1, -1) - &SphField::unit(1, 1, 1)) * (c / 2f64.sqrt());
        let py = (&SphField::unit(1, 1, -1) + &SphField::unit(1, 1, 1)) * C64::new(0.0, c / 2f64.sqrt());
        // V = e_z × p = (−y, x, 0)
        let comps = [-&py, px, SphField::zeros(1)];
        let lap = rough_laplacian(&comps, &t).unwrap();
        let v = cartesian_to_tangent(
            &[
                t.synthesize(&comps[0]).unwrap(),
                t.synthesize(&comps[1]).unwrap(),
                t.synthesize(&comps[2]).unwrap(),
            ],
            t.grid(),
        );
        for n in 0..v.len() {
            assert!((lap.theta[n] + v.theta[n]).norm() < 1e-13);
            assert!((lap.phi[n] + v.phi[n]).norm() < 1e-13);
        }
    }

    #[test]
    fn commutator_identity_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = 10;
        let t = SphTransform::for_band_limit(l + 2);
        for _ in 0..5 {
            let y = SphField::random(l, &mut rng, |l| 1.0 / (1.0 + l as f64));
            let r = commutator_residual(&y, [0.48, 0.6, 0.64], &t).unwrap();
            assert!(r.relative_residual < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn interpolation_gap_rejects_bad_sigma() {
        let g = SphField::unit(3, 0, 0);
        assert!(interpolation_gap(&g, 0.0, [0.0, 0.0, 1.0]).is_err());
        assert!(interpolation_gap(&g, 1.5, [0.0, 0.0, 1.0]).is_err());
        assert!(interpolation_gap(&g, 1.0, [0.0, 0.0, 1.0]).unwrap() > 0.0);
    }
}
