//! Truncated spectral solves of Hermitian positive semi-definite systems.
//!
//! Overlap matrices of coherent states are overcomplete and numerically
//! singular. `Ω x = b` is solved in the span of the eigenvectors whose
//! eigenvalues exceed `threshold · λ_max`; the remaining directions are
//! dropped.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RegularizedSolver {
    /// Retained eigenvectors as columns.
    vectors: Mat<Complex64>,
    /// Reciprocals of the retained eigenvalues.
    inv_values: Vec<f64>,
    lambda_max: f64,
    lambda_min: f64,
    lambda_min_kept: f64,
    size: usize,
}

impl RegularizedSolver {
    pub fn new(matrix: &Mat<Complex64>, threshold: f64) -> Result<Self> {
        let size = matrix.nrows();
        if size == 0 {
            return Err(Error::Singular {
                condition: f64::INFINITY,
                rank: 0,
                size,
            });
        }
        let eig = matrix
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = eig.S().column_vector();
        let u = eig.U();
        let values: Vec<f64> = (0..size).map(|i| s[i].re).collect();
        let lambda_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lambda_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if !lambda_max.is_finite() || lambda_max <= 0.0 {
            return Err(Error::Singular {
                condition: f64::INFINITY,
                rank: 0,
                size,
            });
        }
        let cut = threshold * lambda_max;
        let kept: Vec<usize> = (0..size).filter(|&i| values[i] > cut).collect();
        let vectors = Mat::from_fn(size, kept.len(), |r, c| u[(r, kept[c])]);
        let inv_values: Vec<f64> = kept.iter().map(|&i| 1.0 / values[i]).collect();
        let lambda_min_kept = kept.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
        Ok(Self {
            vectors,
            inv_values,
            lambda_max,
            lambda_min,
            lambda_min_kept,
            size,
        })
    }

    pub fn rank(&self) -> usize {
        self.inv_values.len()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `λ_max / λ_min` over the retained spectrum.
    pub fn condition(&self) -> f64 {
        self.lambda_max / self.lambda_min_kept
    }

    /// `λ_max / |λ_min|` of the full matrix.
    pub fn full_condition(&self) -> f64 {
        self.lambda_max / self.lambda_min.abs().max(f64::MIN_POSITIVE)
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let r = self.rank();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); r];
        for (c, coeff) in coeffs.iter_mut().enumerate() {
            let col = self.vectors.col(c);
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, b) in rhs.iter().enumerate() {
                acc += col[i].conj() * b;
            }
            *coeff = acc * self.inv_values[c];
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.size];
        for (c, coeff) in coeffs.iter().enumerate() {
            let col = self.vectors.col(c);
            for (i, o) in out.iter_mut().enumerate() {
                *o += col[i] * coeff;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Eigendecomposition with the small eigenvalues discarded.
    #[default]
    Spectral,
    /// Cholesky factorization of `Ω + δ I` with `δ = threshold · ‖Ω‖_∞`.
    Tikhonov,
}

/// Cholesky solve of the diagonally shifted matrix. Much cheaper than the
/// eigendecomposition; small eigenvalues are damped instead of cut.
pub struct ShiftedCholesky {
    llt: Llt<Complex64>,
    condition: f64,
    size: usize,
}

impl ShiftedCholesky {
    pub fn new(matrix: &Mat<Complex64>, threshold: f64) -> Result<Self> {
        Self::from_owned(matrix.clone(), threshold)
    }

    /// Like [`ShiftedCholesky::new`], shifting `matrix` in place.
    pub fn from_owned(mut matrix: Mat<Complex64>, threshold: f64) -> Result<Self> {
        let size = matrix.nrows();
        let norm_inf = (0..size)
            .map(|i| (0..size).map(|j| matrix[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        if size == 0 || !(norm_inf > 0.0) || !norm_inf.is_finite() {
            return Err(Error::Singular {
                condition: f64::INFINITY,
                rank: 0,
                size,
            });
        }
        let shift = threshold * norm_inf;
        for i in 0..size {
            matrix[(i, i)] += shift;
        }
        let llt = matrix.llt(Side::Lower).map_err(|_| Error::Singular {
            condition: f64::INFINITY,
            rank: 0,
            size,
        })?;
        let l = llt.L();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..size {
            let d = l[(i, i)].re;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        Ok(Self {
            llt,
            condition: (hi / lo).powi(2),
            size,
        })
    }

    /// Pivot-ratio estimate of the condition number of the shifted matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let b = Mat::from_fn(self.size, 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        (0..self.size).map(|i| x[(i, 0)]).collect()
    }
}

pub enum OverlapSolver {
    Spectral(RegularizedSolver),
    Tikhonov(ShiftedCholesky),
}

impl OverlapSolver {
    pub fn new(kind: SolverKind, matrix: &Mat<Complex64>, threshold: f64) -> Result<Self> {
        Ok(match kind {
            SolverKind::Spectral => Self::Spectral(RegularizedSolver::new(matrix, threshold)?),
            SolverKind::Tikhonov => Self::Tikhonov(ShiftedCholesky::new(matrix, threshold)?),
        })
    }

    /// Consumes `matrix`, saving a copy for the Cholesky variant.
    pub fn from_owned(kind: SolverKind, matrix: Mat<Complex64>, threshold: f64) -> Result<Self> {
        Ok(match kind {
            SolverKind::Spectral => Self::Spectral(RegularizedSolver::new(&matrix, threshold)?),
            SolverKind::Tikhonov => Self::Tikhonov(ShiftedCholesky::from_owned(matrix, threshold)?),
        })
    }

    pub fn condition(&self) -> f64 {
        match self {
            Self::Spectral(s) => s.condition(),
            Self::Tikhonov(s) => s.condition(),
        }
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        match self {
            Self::Spectral(s) => s.solve(rhs),
            Self::Tikhonov(s) => s.solve(rhs),
        }
    }
}

/// `y = A x` for a dense complex matrix.
pub fn mat_vec(a: &Mat<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![Complex64::new(0.0, 0.0); a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
    y
}

/// `x† A y`
pub fn quadratic_form(x: &[Complex64], a: &Mat<Complex64>, y: &[Complex64]) -> Complex64 {
    mat_vec(a, y)
        .iter()
        .zip(x)
        .map(|(ay, xi)| xi.conj() * ay)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn well_conditioned_solve_is_exact() {
        let a = Mat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => c(4.0, 0.0),
            (1, 1) => c(3.0, 0.0),
            (2, 2) => c(2.0, 0.0),
            (0, 1) => c(1.0, 0.5),
            (1, 0) => c(1.0, -0.5),
            _ => c(0.0, 0.0),
        });
        let x = [c(1.0, 2.0), c(-0.5, 0.3), c(0.2, 0.0)];
        let b = mat_vec(&a, &x);
        let s = RegularizedSolver::new(&a, 1e-12).unwrap();
        assert_eq!(s.rank(), 3);
        for (got, want) in s.solve(&b).iter().zip(&x) {
            assert!((got - want).norm() < 1e-13);
        }
    }

    #[test]
    fn rank_deficient_gives_minimum_norm_solution() {
        // rank one: [[1,1],[1,1]]
        let a = Mat::from_fn(2, 2, |_, _| c(1.0, 0.0));
        let s = RegularizedSolver::new(&a, 1e-8).unwrap();
        assert_eq!(s.rank(), 1);
        let x = s.solve(&[c(2.0, 0.0), c(2.0, 0.0)]);
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(s.full_condition() > 1e14);
    }

    #[test]
    fn shifted_cholesky_agrees_on_well_conditioned_input() {
        let a = Mat::from_fn(4, 4, |i, j| {
            if i == j {
                c(3.0 + i as f64, 0.0)
            } else {
                c(0.3 / (1.0 + (i + j) as f64), 0.1 * (i as f64 - j as f64))
            }
        });
        let b = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.5), c(0.2, 0.2)];
        let s = OverlapSolver::new(SolverKind::Spectral, &a, 1e-12).unwrap();
        let t = OverlapSolver::new(SolverKind::Tikhonov, &a, 1e-12).unwrap();
        for (x, y) in s.solve(&b).iter().zip(&t.solve(&b)) {
            assert!((x - y).norm() < 1e-10);
        }
        assert!(t.condition() >= 1.0);
    }

    #[test]
    fn shifted_cholesky_handles_rank_deficiency() {
        let a = Mat::from_fn(2, 2, |_, _| c(1.0, 0.0));
        let s = ShiftedCholesky::new(&a, 1e-8).unwrap();
        let x = s.solve(&[c(2.0, 0.0), c(2.0, 0.0)]);
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-7);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn zero_matrix_is_singular() {
        let a = Mat::<Complex64>::zeros(2, 2);
        assert!(matches!(
            RegularizedSolver::new(&a, 1e-8),
            Err(Error::Singular { .. })
        ));
    }
}
