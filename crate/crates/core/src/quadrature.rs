//! Quadrature nodes for the `(k, δ, ξ)` mode grid.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[−1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Tensor grid over log-spaced `k`, Gauss–Legendre `cos δ`, and periodic
/// trapezoidal `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub k: Vec<f64>,
    /// Trapezoidal weights for `∫ dk` on the (non-uniform) `k` nodes.
    pub k_weights: Vec<f64>,
    /// Polar nodes `δ = arccos x`, ascending in `x`.
    pub delta: Vec<f64>,
    /// Weights for `∫ sinδ dδ = ∫ dx`.
    pub delta_weights: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_weight: f64,
}

impl QuadratureGrid {
    pub fn new(n_k: usize, k_min: f64, k_max: f64, n_delta: usize, n_xi: usize) -> Result<Self> {
        if n_k < 2 || n_delta < 2 || n_xi < 2 {
            return Err(Error::usage(format!(
                "grid counts must be at least 2, got (n_k, n_delta, n_xi) = ({n_k}, {n_delta}, {n_xi})"
            )));
        }
        if !(k_min > 0.0 && k_max > k_min && k_max.is_finite()) {
            return Err(Error::usage(format!("need 0 < k_min < k_max, got [{k_min}, {k_max}]")));
        }
        let ratio = (k_max / k_min).ln();
        let mut k: Vec<f64> = (0..n_k)
            .map(|i| k_min * (ratio * i as f64 / (n_k - 1) as f64).exp())
            .collect();
        k[n_k - 1] = k_max;
        let mut k_weights = vec![0.0; n_k];
        for i in 0..n_k - 1 {
            let h = 0.5 * (k[i + 1] - k[i]);
            k_weights[i] += h;
            k_weights[i + 1] += h;
        }
        let (x, delta_weights) = gauss_legendre(n_delta);
        let delta = x.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect();
        let xi = (0..n_xi).map(|j| TAU * j as f64 / n_xi as f64).collect();
        Ok(QuadratureGrid {
            k,
            k_weights,
            delta,
            delta_weights,
            xi,
            xi_weight: TAU / n_xi as f64,
        })
    }

    /// Number of `(k, δ, ξ)` nodes.
    pub fn len(&self) -> usize {
        self.k.len() * self.delta.len() * self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat node index with `k` fastest, then `δ`, then `ξ`.
    pub fn index(&self, ik: usize, id: usize, ix: usize) -> usize {
        (ix * self.delta.len() + id) * self.k.len() + ik
    }

    pub fn node(&self, index: usize) -> (usize, usize, usize) {
        let nk = self.k.len();
        let nd = self.delta.len();
        (index % nk, (index / nk) % nd, index / (nk * nd))
    }

    /// Upper edge of the top `k` octave.
    pub fn k_max(&self) -> f64 {
        *self.k.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_exactness() {
        for n in [2, 3, 8, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            assert!(x.windows(2).all(|p| p[1] > p[0]));
            // Degree 2n − 1 monomials are integrated exactly.
            for deg in [2 * n - 2, 2 * n - 1] {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n = {n}, deg = {deg}");
            }
        }
    }

    #[test]
    fn grid_layout() {
        let g = QuadratureGrid::new(5, 0.1, 10.0, 4, 6).unwrap();
        assert_eq!(g.len(), 120);
        assert!((g.k[0] - 0.1).abs() < 1e-15 && g.k[4] == 10.0);
        assert!((g.k_weights.iter().sum::<f64>() - 9.9).abs() < 1e-12);
        assert!((g.xi_weight * 6.0 - TAU).abs() < 1e-15);
        for i in 0..g.len() {
            let (a, b, c) = g.node(i);
            assert_eq!(g.index(a, b, c), i);
        }
        assert!(QuadratureGrid::new(0, 0.1, 1.0, 4, 4).is_err());
        assert!(QuadratureGrid::new(4, 1.0, 1.0, 4, 4).is_err());
    }
}
