//! Finite-difference eigenpairs of a one-dimensional Hamiltonian.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DoubleWellParams;

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub x: Vec<f64>,
    pub dx: f64,
    /// Ascending.
    pub energies: Vec<f64>,
    /// Eigenfunctions normalized so that `Σ φ² dx = 1`.
    #[serde(skip)]
    pub states: Vec<Vec<f64>>,
    /// `⟨φ_n|Ψ(0)⟩` with the width-`γ_x` Gaussian on the barrier top.
    pub overlaps: Vec<f64>,
}

impl EigenResult {
    pub fn overlap_sq(&self, n: usize) -> f64 {
        self.overlaps[n] * self.overlaps[n]
    }

    /// `Σ_n |c_n|² e^{−i E_n t}` over every computed eigenstate.
    pub fn spectral_autocorrelation(&self, t: f64) -> Complex64 {
        self.energies
            .iter()
            .zip(&self.overlaps)
            .map(|(e, c)| c * c * Complex64::from_polar(1.0, -e * t))
            .sum()
    }

    /// Eigenfunction `n` normalized with the trapezoid weights used for the overlaps.
    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n]
    }

    /// `Σ_n |c_n|²` over the lowest `count` states.
    pub fn overlap_sum(&self, count: usize) -> f64 {
        (0..count.min(self.overlaps.len())).map(|n| self.overlap_sq(n)).sum()
    }

    /// Parity of state `n` under `x → −x` on a symmetric grid: `+1` or `−1`.
    pub fn parity(&self, n: usize) -> f64 {
        let s = &self.states[n];
        let len = s.len();
        let (mut even, mut odd) = (0.0, 0.0);
        for i in 0..len {
            even += (s[i] + s[len - 1 - i]).powi(2);
            odd += (s[i] - s[len - 1 - i]).powi(2);
        }
        if even >= odd {
            1.0
        } else {
            -1.0
        }
    }
}

/// Three-point finite differences on `n_points` equally spaced points of
/// `[x_min, x_max]` (end points included), wavefunction zero beyond them.
pub fn solve_tise_with<V: Fn(f64) -> f64>(
    potential: V,
    mass: f64,
    gamma_x: f64,
    x_min: f64,
    x_max: f64,
    n_points: usize,
) -> Result<EigenResult> {
    if n_points < 3 {
        return Err(Error::invalid("n_points", "need at least 3 points"));
    }
    if !(x_max > x_min) {
        return Err(Error::invalid("x_max", "must exceed x_min"));
    }
    let dx = (x_max - x_min) / (n_points - 1) as f64;
    let x: Vec<f64> = (0..n_points).map(|i| x_min + i as f64 * dx).collect();
    let t = 1.0 / (2.0 * mass * dx * dx);
    let h = Mat::<f64>::from_fn(n_points, n_points, |i, j| {
        if i == j {
            2.0 * t + potential(x[i])
        } else if i.abs_diff(j) == 1 {
            -t
        } else {
            0.0
        }
    });
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n_points).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));

    let norm = (gamma_x / std::f64::consts::PI).powf(0.25);
    let psi0: Vec<f64> = x.iter().map(|x| norm * (-0.5 * gamma_x * x * x).exp()).collect();
    let scale = 1.0 / dx.sqrt();
    let mut energies = Vec::with_capacity(n_points);
    let mut states = Vec::with_capacity(n_points);
    let mut overlaps = Vec::with_capacity(n_points);
    for &k in &order {
        energies.push(s[k]);
        let phi: Vec<f64> = (0..n_points).map(|i| u[(i, k)] * scale).collect();
        overlaps.push(phi.iter().zip(&psi0).map(|(a, b)| a * b).sum::<f64>() * dx);
        states.push(phi);
    }
    Ok(EigenResult {
        x,
        dx,
        energies,
        states,
        overlaps,
    })
}

/// Eigenpairs of the bare double well.
pub fn solve_tise(well: &DoubleWellParams, x_min: f64, x_max: f64, n_points: usize) -> Result<EigenResult> {
    solve_tise_with(|x| well.potential(x), well.m_x, well.gamma_x, x_min, x_max, n_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn harmonic_spectrum() {
        let w = 1.3;
        let r = solve_tise_with(|x| 0.5 * w * w * x * x, 1.0, w, -10.0, 10.0, 2001).unwrap();
        for n in 1..=5 {
            let want = w * (n as f64 - 0.5);
            assert!((r.energies[n - 1] - want).abs() < 5e-4, "{} vs {want}", r.energies[n - 1]);
        }
        // the ground state is the Gaussian itself
        assert!((r.overlap_sq(0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn double_well_levels_and_parity() {
        let spec = ModelConfig::default().build().unwrap();
        let r = solve_tise(&spec.well, -4.0, 4.0, 256).unwrap();
        for (n, want) in [-0.300, 0.046, 1.23, 2.46, 3.94].iter().enumerate() {
            assert!((r.energies[n] - want).abs() < 0.005, "E_{} = {}", n + 1, r.energies[n]);
        }
        for n in 0..6 {
            assert_eq!(r.parity(n), if n % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert!(r.overlap_sq(1) < 1e-10 && r.overlap_sq(3) < 1e-10);
    }

    #[test]
    fn orthonormal_states() {
        let spec = ModelConfig::default().build().unwrap();
        let r = solve_tise(&spec.well, -4.0, 4.0, 256).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let ip: f64 = r.states[a].iter().zip(&r.states[b]).map(|(x, y)| x * y).sum::<f64>() * r.dx;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn spectral_sum_rule() {
        let spec = ModelConfig::default().build().unwrap();
        let r = solve_tise(&spec.well, -4.0, 4.0, 256).unwrap();
        let mut last = 0.0;
        for count in [1, 3, 5, 9, 17, 256] {
            let s = r.overlap_sum(count);
            assert!(s >= last - 1e-15);
            last = s;
        }
        assert!((last - 1.0).abs() < 1e-8);
        assert!((r.spectral_autocorrelation(0.0).re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn grid_refinement_is_converged() {
        let spec = ModelConfig::default().build().unwrap();
        let coarse = solve_tise(&spec.well, -4.0, 4.0, 256).unwrap();
        let fine = solve_tise(&spec.well, -4.0, 4.0, 511).unwrap();
        for n in 0..5 {
            assert!((coarse.energies[n] - fine.energies[n]).abs() < 5e-3);
        }
    }
}
