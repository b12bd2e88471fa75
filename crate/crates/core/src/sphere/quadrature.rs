use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], nodes in decreasing order
/// (so that the colatitude `acos(x)` increases with the index).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Product grid: Gauss–Legendre in `cos θ` times uniform `φ_j = 2πj/n_phi`.
///
/// Values on the grid are stored ring-major: index `i * n_phi + j`.
#[derive(Clone, Debug)]
pub struct SphGrid {
    n_theta: usize,
    n_phi: usize,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl SphGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::Domain("empty sphere grid".into()));
        }
        let (x, w) = gauss_legendre(n_theta);
        let sin_theta = x.iter().map(|c| (1.0 - c * c).sqrt()).collect();
        Ok(Self {
            n_theta,
            n_phi,
            cos_theta: x,
            sin_theta,
            gl_weights: w,
        })
    }

    /// Smallest grid integrating every polynomial of degree `degree` exactly.
    pub fn for_degree(degree: usize) -> Self {
        let n_theta = degree / 2 + 1;
        let mut n_phi = degree + 1;
        if n_phi % 2 == 1 {
            n_phi += 1;
        }
        Self::new(n_theta, n_phi).expect("nonempty grid")
    }

    /// Grid for transforms of band limit `lmax`; integrates degree `2 lmax + 1`.
    pub fn for_band_limit(lmax: usize) -> Self {
        Self::for_degree(2 * lmax + 1)
    }

    /// Highest total polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        (2 * self.n_theta - 1).min(self.n_phi - 1)
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.cos_theta[i].acos()
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    /// Quadrature weight of ring `i` (identical for every node of the ring).
    pub fn ring_weight(&self, i: usize) -> f64 {
        self.gl_weights[i] * 2.0 * PI / self.n_phi as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len());
        for i in 0..self.n_theta {
            let wi = self.ring_weight(i);
            w.extend(std::iter::repeat_n(wi, self.n_phi));
        }
        w
    }

    /// Unit vector of node `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> [f64; 3] {
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        let (sp, cp) = self.phi(j).sin_cos();
        [s * cp, s * sp, c]
    }

    /// Local orthonormal tangent frame `(e_θ, e_φ)` at node `(i, j)`.
    pub fn frame(&self, i: usize, j: usize) -> ([f64; 3], [f64; 3]) {
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        let (sp, cp) = self.phi(j).sin_cos();
        ([c * cp, c * sp, -s], [-sp, cp, 0.0])
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                v.push(self.point(i, j));
            }
        }
        v
    }

    /// Evaluates `f` at every node.
    pub fn sample<T>(&self, mut f: impl FnMut([f64; 3]) -> T) -> Vec<T> {
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                v.push(f(self.point(i, j)));
            }
        }
        v
    }

    /// Quadrature of node values.
    pub fn integrate<T>(&self, values: &[T]) -> T
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let mut total = T::default();
        for i in 0..self.n_theta {
            let mut ring = T::default();
            for j in 0..self.n_phi {
                ring = ring + values[i * self.n_phi + j];
            }
            total = total + ring * self.ring_weight(i);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_four_pi() {
        for (nt, np) in [(1, 1), (5, 9), (33, 66), (130, 8)] {
            let g = SphGrid::new(nt, np).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!((s / (4.0 * PI) - 1.0).abs() < 1e-13, "{nt}x{np}: {s}");
        }
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree() {
        let n = 12;
        let (x, w) = gauss_legendre(n);
        for d in 0..2 * n {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
            let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {d}");
        }
        assert!(x.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn second_moment_is_isotropic() {
        let g = SphGrid::for_degree(4);
        let zz = g.sample(|p| p[2] * p[2]);
        let xy = g.sample(|p| p[0] * p[1]);
        assert!((g.integrate(&zz) - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!(g.integrate(&xy).abs() < 1e-14);
    }
}
