//! Uniform physical grid on `T³` and transforms to and from the truncated
//! lattice.
//!
//! Only `2 kmax + 1` wavenumbers per axis are ever nonzero, so the transforms
//! are separable pruned DFTs with tabulated phases rather than full FFTs.

use crate::exec::{self, ExecPolicy};
use crate::state::{Lattice, ModeIndex};
use crate::C64;

/// `N³` grid with `N ≥ 3 kmax + 1`, so quadratic products of truncated
/// fields are alias-free on the lattice.
pub struct PhysGrid {
    n: usize,
    kmax: usize,
    /// `phase[a * n + x] = e^{2πi (a − kmax) x / N}`.
    phase: Vec<C64>,
}

impl std::fmt::Debug for PhysGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhysGrid").field("n", &self.n).finish()
    }
}

impl PhysGrid {
    pub fn for_kmax(kmax: usize) -> Self {
        let mut n = 3 * kmax + 1;
        n += n % 2;
        let m = 2 * kmax + 1;
        let mut phase = Vec::with_capacity(m * n);
        for a in 0..m {
            let k = a as f64 - kmax as f64;
            for x in 0..n {
                phase.push(C64::from_polar(1.0, std::f64::consts::TAU * k * x as f64 / n as f64));
            }
        }
        Self { n, kmax, phase }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Grid point `x = (i, j, l) / N`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let nf = n as f64;
        [(idx / (n * n)) as f64 / nf, ((idx / n) % n) as f64 / nf, (idx % n) as f64 / nf]
    }

    fn width(&self) -> usize {
        2 * self.kmax + 1
    }

    fn cube_slot(&self, k: ModeIndex) -> usize {
        let m = self.width();
        let w = |c: i32| (c + self.kmax as i32) as usize;
        (w(k[0]) * m + w(k[1])) * m + w(k[2])
    }

    /// Values `Σ_k f̂_k e^{i k·x}` from a full-lattice accessor.
    pub fn to_physical(&self, lattice: &Lattice, coeff: impl Fn(ModeIndex) -> C64) -> Vec<C64> {
        assert!(lattice.kmax() <= self.kmax, "lattice exceeds grid");
        let (n, m) = (self.n, self.width());
        let km = lattice.kmax() as i32;
        let mut cube = vec![C64::new(0.0, 0.0); m * m * m];
        for x in -km..=km {
            for y in -km..=km {
                for z in -km..=km {
                    cube[self.cube_slot([x, y, z])] = coeff([x, y, z]);
                }
            }
        }
        let ph = &self.phase;
        let mut t1 = vec![C64::new(0.0, 0.0); m * m * n];
        for ab in 0..m * m {
            let row = &mut t1[ab * n..(ab + 1) * n];
            for c in 0..m {
                let v = cube[ab * m + c];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                for (o, e) in row.iter_mut().zip(&ph[c * n..(c + 1) * n]) {
                    *o += v * e;
                }
            }
        }
        let mut t2 = vec![C64::new(0.0, 0.0); m * n * n];
        for a in 0..m {
            for y in 0..n {
                let out = &mut t2[(a * n + y) * n..(a * n + y + 1) * n];
                for b in 0..m {
                    let e = ph[b * n + y];
                    for (o, v) in out.iter_mut().zip(&t1[(a * m + b) * n..(a * m + b + 1) * n]) {
                        *o += v * e;
                    }
                }
            }
        }
        let mut data = vec![C64::new(0.0, 0.0); n * n * n];
        for x in 0..n {
            let out = &mut data[x * n * n..(x + 1) * n * n];
            for a in 0..m {
                let e = ph[a * n + x];
                for (o, v) in out.iter_mut().zip(&t2[a * n * n..(a + 1) * n * n]) {
                    *o += v * e;
                }
            }
        }
        data
    }

    /// Fourier coefficients of physical values at the stored lattice modes.
    pub fn to_lattice(&self, lattice: &Lattice, values: Vec<C64>) -> Vec<C64> {
        self.lattice_of(lattice, &values)
    }

    fn lattice_of(&self, lattice: &Lattice, values: &[C64]) -> Vec<C64> {
        assert!(lattice.kmax() <= self.kmax, "lattice exceeds grid");
        let (n, m) = (self.n, self.width());
        let ph = &self.phase;
        let mut s1 = vec![C64::new(0.0, 0.0); m * n * n];
        for a in 0..m {
            let out = &mut s1[a * n * n..(a + 1) * n * n];
            for x in 0..n {
                let e = ph[a * n + x].conj();
                for (o, v) in out.iter_mut().zip(&values[x * n * n..(x + 1) * n * n]) {
                    *o += v * e;
                }
            }
        }
        let mut s2 = vec![C64::new(0.0, 0.0); m * m * n];
        for a in 0..m {
            for b in 0..m {
                let out = &mut s2[(a * m + b) * n..(a * m + b + 1) * n];
                for y in 0..n {
                    let e = ph[b * n + y].conj();
                    for (o, v) in out.iter_mut().zip(&s1[(a * n + y) * n..(a * n + y + 1) * n]) {
                        *o += v * e;
                    }
                }
            }
        }
        let scale = 1.0 / self.len() as f64;
        lattice
            .modes()
            .iter()
            .map(|k| {
                let ab = self.cube_slot(*k) / m;
                let c = (k[2] + self.kmax as i32) as usize;
                let row = &s2[ab * n..(ab + 1) * n];
                let e = &ph[c * n..(c + 1) * n];
                let s: C64 = row.iter().zip(e).map(|(v, e)| v * e.conj()).sum();
                s * scale
            })
            .collect()
    }

    /// Point-major synthesis of `count` channels at once.
    ///
    /// `fill(n, row)` writes the `count` channel coefficients of mode `n`
    /// (every `n` of the lattice cube, not only stored ones). The result holds
    /// channel `ch` at point `x` in `out[x * count + ch]`.
    pub fn synthesize_many<F>(&self, policy: ExecPolicy, lattice: &Lattice, count: usize, fill: F) -> Vec<C64>
    where
        F: Fn(ModeIndex, &mut [C64]) + Sync + Send,
    {
        assert!(lattice.kmax() <= self.kmax, "lattice exceeds grid");
        let (n, m) = (self.n, self.width());
        let km = lattice.kmax() as i32;
        let zero = C64::new(0.0, 0.0);
        let mut cube = vec![zero; m * m * m * count];
        exec::for_each_chunk_mut(policy, &mut cube, count, |slot, row| {
            let k = [
                (slot / (m * m)) as i32 - self.kmax as i32,
                ((slot / m) % m) as i32 - self.kmax as i32,
                (slot % m) as i32 - self.kmax as i32,
            ];
            if k.iter().all(|c| c.abs() <= km) {
                fill(k, row);
            }
        });
        let ph = &self.phase;
        let mut t1 = vec![zero; m * m * n * count];
        exec::for_each_chunk_mut(policy, &mut t1, n * count, |ab, out| {
            for c in 0..m {
                let src = &cube[(ab * m + c) * count..(ab * m + c + 1) * count];
                for z in 0..n {
                    axpy(&mut out[z * count..(z + 1) * count], src, ph[c * n + z]);
                }
            }
        });
        drop(cube);
        let mut t2 = vec![zero; m * n * n * count];
        exec::for_each_chunk_mut(policy, &mut t2, n * count, |ay, out| {
            let (a, y) = (ay / n, ay % n);
            for b in 0..m {
                let src = &t1[(a * m + b) * n * count..(a * m + b + 1) * n * count];
                axpy(out, src, ph[b * n + y]);
            }
        });
        drop(t1);
        let plane = n * n * count;
        let mut data = vec![zero; n * plane];
        exec::for_each_chunk_mut(policy, &mut data, plane, |x, out| {
            for a in 0..m {
                axpy(out, &t2[a * plane..(a + 1) * plane], ph[a * n + x]);
            }
        });
        data
    }

    /// Inverse of [`Self::synthesize_many`]: for every stored lattice mode the
    /// `count` channel coefficients of the point-major `values`.
    pub fn analyze_many(&self, policy: ExecPolicy, lattice: &Lattice, count: usize, values: &[C64]) -> Vec<Vec<C64>> {
        assert!(lattice.kmax() <= self.kmax, "lattice exceeds grid");
        self.analyze_many_at(policy, lattice.modes(), count, values)
    }

    /// [`Self::analyze_many`] at an arbitrary list of modes of the cube.
    pub fn analyze_many_at(&self, policy: ExecPolicy, modes: &[ModeIndex], count: usize, values: &[C64]) -> Vec<Vec<C64>> {
        assert!(
            modes.iter().all(|k| k.iter().all(|c| c.unsigned_abs() as usize <= self.kmax)),
            "mode outside grid"
        );
        let (n, m) = (self.n, self.width());
        assert_eq!(values.len(), n * n * n * count, "point-major size");
        let zero = C64::new(0.0, 0.0);
        let ph = &self.phase;
        let plane = n * n * count;
        let mut s1 = vec![zero; m * plane];
        exec::for_each_chunk_mut(policy, &mut s1, plane, |a, out| {
            for x in 0..n {
                axpy(out, &values[x * plane..(x + 1) * plane], ph[a * n + x].conj());
            }
        });
        let mut s2 = vec![zero; m * m * n * count];
        exec::for_each_chunk_mut(policy, &mut s2, n * count, |ab, out| {
            let (a, b) = (ab / m, ab % m);
            for y in 0..n {
                let src = &s1[(a * n + y) * n * count..(a * n + y + 1) * n * count];
                axpy(out, src, ph[b * n + y].conj());
            }
        });
        let scale = 1.0 / self.len() as f64;
        exec::map_slice(policy, modes, |k| {
            let ab = self.cube_slot(*k) / m;
            let c = (k[2] + self.kmax as i32) as usize;
            let mut out = vec![zero; count];
            for z in 0..n {
                let src = &s2[(ab * n + z) * count..(ab * n + z + 1) * count];
                axpy(&mut out, src, ph[c * n + z].conj() * scale);
            }
            out
        })
    }

    /// Batched [`Self::to_physical`] over independent components.
    pub fn to_physical_batch<F>(&self, policy: ExecPolicy, lattice: &Lattice, count: usize, coeff: F) -> Vec<Vec<C64>>
    where
        F: Fn(usize, ModeIndex) -> C64 + Sync + Send,
    {
        exec::map_range(policy, count, |c| self.to_physical(lattice, |k| coeff(c, k)))
    }

    /// Batched [`Self::to_lattice`].
    pub fn to_lattice_batch(&self, policy: ExecPolicy, lattice: &Lattice, values: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
        exec::map_slice(policy, &values, |v| self.lattice_of(lattice, v))
    }
}

fn axpy(out: &mut [C64], src: &[C64], e: C64) {
    for (o, v) in out.iter_mut().zip(src) {
        *o += v * e;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_size_dealiases() {
        assert_eq!(PhysGrid::for_kmax(2).n(), 8);
        assert_eq!(PhysGrid::for_kmax(1).n(), 4);
        assert_eq!(PhysGrid::for_kmax(0).n(), 2);
    }

    #[test]
    fn single_mode_round_trip() {
        let lat = Lattice::new(2);
        let g = PhysGrid::for_kmax(2);
        let k0 = [1, -2, 1];
        let a = C64::new(0.3, -0.7);
        let vals = g.to_physical(&lat, |k| {
            if k == k0 {
                a
            } else if k == [-1, 2, -1] {
                a.conj()
            } else {
                C64::new(0.0, 0.0)
            }
        });
        for (idx, v) in vals.iter().enumerate() {
            let x = g.point(idx);
            let ph = 2.0 * PI * (x[0] - 2.0 * x[1] + x[2]);
            let expect = 2.0 * (a * C64::new(ph.cos(), ph.sin())).re;
            assert!((v.re - expect).abs() < 1e-13 && v.im.abs() < 1e-13);
        }
        let back = g.to_lattice(&lat, vals);
        let (slot, _) = lat.locate(k0).unwrap();
        for (i, c) in back.iter().enumerate() {
            let e = if i == slot { a } else { C64::new(0.0, 0.0) };
            assert!((c - e).norm() < 1e-14);
        }
    }

    #[test]
    fn batched_transforms_match_single_channel() {
        let lat = Lattice::new(2);
        let g = PhysGrid::for_kmax(2);
        let coeff = |ch: usize, k: ModeIndex| {
            let s = (k[0] * 7 + k[1] * 3 + k[2]) as f64 + ch as f64 * 0.37;
            C64::new(s.sin(), (1.3 * s).cos())
        };
        let many = g.synthesize_many(ExecPolicy::Parallel, &lat, 3, |k, row| {
            for (ch, v) in row.iter_mut().enumerate() {
                *v = coeff(ch, k);
            }
        });
        for ch in 0..3 {
            let single = g.to_physical(&lat, |k| coeff(ch, k));
            for (x, v) in single.iter().enumerate() {
                assert!((many[x * 3 + ch] - v).norm() < 1e-12);
            }
        }
        let back = g.analyze_many(ExecPolicy::Sequential, &lat, 3, &many);
        for (slot, k) in lat.modes().iter().enumerate() {
            for ch in 0..3 {
                assert!((back[slot][ch] - coeff(ch, *k)).norm() < 1e-12);
            }
        }
    }
}
