//! Coherent-state matrix elements of the normally ordered Hamiltonian.
//!
//! For two multi-mode coherent states `|z_k⟩`, `|z_l⟩` the normally ordered
//! Hamiltonian has the closed form `H_ord(z_k*, z_l)` built from the
//! substitution `a† → z_k*`, `a → z_l`. With `s = z_kx* + z_lx`,
//! `d = z_kx* − z_lx` and bath labels `u_n = z_kn*`, `v_n = z_ln`:
//!
//! ```text
//! T_S = −γ_x/(4 m_x) (d² − 1)
//! V_S = −a/(4γ_x) (s² + 1) + b/(16γ_x²) (s⁴ + 6 s² + 3)
//! H_E = Σ ω_n (u_n v_n + 1/2)
//! H_SE = −s Σ g_n / (2 √(γ_x γ_n)) (u_n + v_n)
//! V_C = (s² + 1) Σ g_n² / (4 m ω_n² γ_x)
//! ```
//!
//! All matrix elements are taken between normalized states; multiply by the
//! overlap to get `⟨z_k|Ĥ|z_l⟩`.

use std::ops::{Deref, DerefMut};

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Complex coherent-state label, mode 0 is the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementVector(pub Vec<Complex64>);

impl DisplacementVector {
    pub fn zeros(dof: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); dof])
    }

    /// `z_j = (√γ_j q_j + i p_j / √γ_j) / √2`
    pub fn from_phase_space(q: &[f64], p: &[f64], widths: &[f64]) -> Result<Self> {
        if q.len() != widths.len() || p.len() != widths.len() {
            return Err(Error::DimensionMismatch {
                expected: widths.len(),
                found: q.len().min(p.len()),
            });
        }
        Ok(Self(
            q.iter()
                .zip(p)
                .zip(widths)
                .map(|((&q, &p), &g)| {
                    let s = g.sqrt();
                    Complex64::new(s * q, p / s) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect(),
        ))
    }

    /// Inverse of [`from_phase_space`](Self::from_phase_space): returns `(q, p)`.
    pub fn to_phase_space(&self, widths: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.0
            .iter()
            .zip(widths)
            .map(|(z, &g)| {
                let s = g.sqrt();
                (
                    z.re * std::f64::consts::SQRT_2 / s,
                    z.im * std::f64::consts::SQRT_2 * s,
                )
            })
            .unzip()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }
}

impl Deref for DisplacementVector {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for DisplacementVector {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

/// `⟨z_k|z_l⟩ = exp[−(|z_k|² + |z_l|²)/2 + z_k*·z_l]`
pub fn overlap(zk: &[Complex64], zl: &[Complex64]) -> Result<Complex64> {
    if zk.len() != zl.len() {
        return Err(Error::DimensionMismatch {
            expected: zk.len(),
            found: zl.len(),
        });
    }
    Ok(overlap_unchecked(zk, zl))
}

#[inline]
pub(crate) fn overlap_unchecked(zk: &[Complex64], zl: &[Complex64]) -> Complex64 {
    overlap_exponent(zk, zl).exp()
}

#[inline]
fn overlap_exponent(zk: &[Complex64], zl: &[Complex64]) -> Complex64 {
    let mut e = Complex64::new(0.0, 0.0);
    for (a, b) in zk.iter().zip(zl) {
        e += a.conj() * b - 0.5 * (a.norm_sqr() + b.norm_sqr());
    }
    e
}

/// Term-resolved `H_ord(z_k*, z_l)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OrderedEnergyBreakdown {
    pub kinetic_s: Complex64,
    pub potential_s: Complex64,
    pub bath: Complex64,
    pub interaction: Complex64,
    pub counter: Complex64,
    pub total: Complex64,
}

impl OrderedEnergyBreakdown {
    pub fn system(&self) -> Complex64 {
        self.kinetic_s + self.potential_s
    }
}

/// Precomputed coefficients of the normally ordered Hamiltonian for one model.
#[derive(Debug, Clone)]
pub struct OrderedHamiltonian {
    dof: usize,
    kin: f64,
    quad: f64,
    quart: f64,
    omegas: Vec<f64>,
    /// `g_n / (2 √(γ_x γ_n))`
    coupling: Vec<f64>,
    /// `Σ g_n² / (4 m ω_n² γ_x)`, zero when the counter term is disabled.
    counter: f64,
    /// `Σ ω_n / 2`
    zero_point: f64,
    // gradient coefficients
    kin_grad: f64,
    cubic: f64,
    linear: f64,
}

impl OrderedHamiltonian {
    pub fn new(spec: &ModelSpec) -> Self {
        let w = &spec.well;
        let gx = w.gamma_x;
        let counter_coeff = spec.active_counter_coeff();
        let coupling = spec
            .coupling
            .g_n
            .iter()
            .zip(&spec.bath.gammas)
            .map(|(g, gn)| g / (2.0 * (gx * gn).sqrt()))
            .collect();
        Self {
            dof: spec.dof(),
            kin: gx / (4.0 * w.m_x),
            quad: w.a / (4.0 * gx),
            quart: w.b / (16.0 * gx * gx),
            omegas: spec.bath.frequencies.clone(),
            coupling,
            counter: counter_coeff / (2.0 * gx),
            zero_point: 0.5 * spec.bath.frequencies.iter().sum::<f64>(),
            kin_grad: gx / (2.0 * w.m_x),
            cubic: w.b / (4.0 * gx * gx),
            // (Σ g²/(mω²) − a + 3b/(2γ_x)) / (2γ_x), with Σ g²/(mω²) = 2·counter_coeff
            linear: (2.0 * counter_coeff - w.a + 1.5 * w.b / gx) / (2.0 * gx),
        }
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.omegas
    }

    fn check(&self, z: &[Complex64]) -> Result<()> {
        if z.len() != self.dof {
            return Err(Error::DimensionMismatch {
                expected: self.dof,
                found: z.len(),
            });
        }
        Ok(())
    }

    /// All five terms of `H_ord(z_k*, z_l)`.
    pub fn h_ord(&self, zk: &[Complex64], zl: &[Complex64]) -> Result<OrderedEnergyBreakdown> {
        self.check(zk)?;
        self.check(zl)?;
        Ok(self.breakdown_unchecked(zk, zl))
    }

    pub(crate) fn breakdown_unchecked(
        &self,
        zk: &[Complex64],
        zl: &[Complex64],
    ) -> OrderedEnergyBreakdown {
        let one = Complex64::new(1.0, 0.0);
        let u = zk[0].conj();
        let s = u + zl[0];
        let d = u - zl[0];
        let s2 = s * s;
        let kinetic_s = -self.kin * (d * d - one);
        let potential_s = -self.quad * (s2 + one) + self.quart * (s2 * s2 + 6.0 * s2 + 3.0);
        let mut bath = Complex64::new(0.0, 0.0);
        let mut sum_c = Complex64::new(0.0, 0.0);
        for n in 1..self.dof {
            let un = zk[n].conj();
            bath += self.omegas[n - 1] * (un * zl[n] + 0.5);
            sum_c += self.coupling[n - 1] * (un + zl[n]);
        }
        let interaction = -s * sum_c;
        let counter = self.counter * (s2 + one);
        OrderedEnergyBreakdown {
            kinetic_s,
            potential_s,
            bath,
            interaction,
            counter,
            total: kinetic_s + potential_s + bath + interaction + counter,
        }
    }

    /// Sum of all terms, without the breakdown.
    #[inline]
    pub(crate) fn total_unchecked(&self, zk: &[Complex64], zl: &[Complex64]) -> Complex64 {
        let u = zk[0].conj();
        let s = u + zl[0];
        let d = u - zl[0];
        let s2 = s * s;
        let mut e = -self.kin * (d * d - 1.0)
            - self.quad * (s2 + 1.0)
            + self.quart * (s2 * s2 + 6.0 * s2 + 3.0)
            + self.counter * (s2 + 1.0);
        let mut sum_c = Complex64::new(0.0, 0.0);
        for n in 1..self.dof {
            let un = zk[n].conj();
            e += self.omegas[n - 1] * (un * zl[n] + 0.5);
            sum_c += self.coupling[n - 1] * (un + zl[n]);
        }
        e - s * sum_c
    }

    /// System-mode terms of `H_ord` at `(u, z)`, counter term included.
    #[inline]
    fn system_kernel(&self, u: Complex64, z: Complex64) -> Complex64 {
        let s = u + z;
        let d = u - z;
        let s2 = s * s;
        -self.kin * (d * d - 1.0) - self.quad * (s2 + 1.0)
            + self.quart * (s2 * s2 + 6.0 * s2 + 3.0)
            + self.counter * (s2 + 1.0)
    }

    /// Energy kernel `ω_n (z_kn* z_ln + 1/2)` of bath oscillator `n` (1-based mode index).
    #[inline]
    pub fn bath_mode_kernel(&self, zk: &[Complex64], zl: &[Complex64], n: usize) -> Complex64 {
        self.omegas[n - 1] * (zk[n].conj() * zl[n] + 0.5)
    }

    /// `∂H_ord/∂z*` at the diagonal point `(z*, z)`.
    pub fn grad(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(z)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.dof];
        self.grad_into(z, &mut out);
        Ok(out)
    }

    pub(crate) fn grad_into(&self, z: &[Complex64], out: &mut [Complex64]) {
        let zx = z[0];
        // z* + z and z* − z on the diagonal
        let s = 2.0 * zx.re;
        let d = Complex64::new(0.0, -2.0 * zx.im);
        let mut bath_force = 0.0;
        for n in 1..self.dof {
            let c = self.coupling[n - 1];
            bath_force += c * 2.0 * z[n].re;
            out[n] = self.omegas[n - 1] * z[n] - c * s;
        }
        out[0] = -self.kin_grad * d + self.cubic * s * s * s - bath_force + self.linear * s;
    }

    /// `H̃_kl / ⟨z_k|z_l⟩`, i.e. the bracket multiplying the overlap.
    fn h_tilde_bracket(
        &self,
        zk: &[Complex64],
        zl: &[Complex64],
        grad_l: &[Complex64],
        phase_l: Complex64,
    ) -> Complex64 {
        let mut proj = Complex64::new(0.0, 0.0);
        for (a, g) in zk.iter().zip(grad_l) {
            proj += a.conj() * g;
        }
        self.total_unchecked(zk, zl) - phase_l - proj
    }

    /// `½ (z_l·∂H/∂z_l − ∂H/∂z_l*·z_l*)`; on the diagonal `∂H/∂z = (∂H/∂z*)*`.
    fn phase_term(zl: &[Complex64], grad_l: &[Complex64]) -> Complex64 {
        let mut t = Complex64::new(0.0, 0.0);
        for (z, g) in zl.iter().zip(grad_l) {
            t += z * g.conj() - g * z.conj();
        }
        0.5 * t
    }

    /// Coupling matrix element `H̃_kl` of the amplitude equations.
    pub fn h_tilde(&self, zk: &[Complex64], zl: &[Complex64]) -> Result<Complex64> {
        self.check(zk)?;
        let grad_l = self.grad(zl)?;
        let phase = Self::phase_term(zl, &grad_l);
        Ok(overlap_unchecked(zk, zl) * self.h_tilde_bracket(zk, zl, &grad_l, phase))
    }
}

/// Free-function form of [`OrderedHamiltonian::h_ord`].
pub fn h_ord(
    zk: &[Complex64],
    zl: &[Complex64],
    spec: &ModelSpec,
) -> Result<OrderedEnergyBreakdown> {
    OrderedHamiltonian::new(spec).h_ord(zk, zl)
}

pub fn grad_h_ord(z: &[Complex64], spec: &ModelSpec) -> Result<Vec<Complex64>> {
    OrderedHamiltonian::new(spec).grad(z)
}

pub fn h_tilde(zk: &[Complex64], zl: &[Complex64], spec: &ModelSpec) -> Result<Complex64> {
    OrderedHamiltonian::new(spec).h_tilde(zk, zl)
}

/// Flat, contiguous storage of `M` displacement vectors of `dof` modes each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub dof: usize,
    pub z: Vec<Complex64>,
}

impl Basis {
    pub fn from_vectors(vectors: &[DisplacementVector]) -> Result<Self> {
        let dof = vectors.first().map_or(0, |v| v.len());
        let mut z = Vec::with_capacity(dof * vectors.len());
        for v in vectors {
            if v.len() != dof {
                return Err(Error::DimensionMismatch {
                    expected: dof,
                    found: v.len(),
                });
            }
            z.extend_from_slice(v);
        }
        Ok(Self { dof, z })
    }

    pub fn len(&self) -> usize {
        if self.dof == 0 {
            0
        } else {
            self.z.len() / self.dof
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, l: usize) -> &[Complex64] {
        &self.z[l * self.dof..(l + 1) * self.dof]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Complex64]> {
        self.z.chunks_exact(self.dof.max(1))
    }

    pub fn to_vectors(&self) -> Vec<DisplacementVector> {
        self.iter().map(|z| DisplacementVector(z.to_vec())).collect()
    }
}

/// Hermitian overlap matrix `Ω_kl = ⟨z_k|z_l⟩`.
pub fn overlap_matrix(basis: &Basis) -> Mat<Complex64> {
    let m = basis.len();
    let mut out = Mat::<Complex64>::zeros(m, m);
    for l in 0..m {
        let zl = basis.get(l);
        out[(l, l)] = overlap_unchecked(zl, zl);
        for k in 0..l {
            let v = overlap_unchecked(basis.get(k), zl);
            out[(k, l)] = v;
            out[(l, k)] = v.conj();
        }
    }
    out
}

/// Kernels needed for one evaluation of the amplitude equations.
pub struct Kernels {
    /// `Ω_kl = ⟨z_k|z_l⟩`
    pub omega: Mat<Complex64>,
    /// `H̃_kl`, column `l` built with the gradient at `z_l`.
    pub htilde: Mat<Complex64>,
    /// `∂H_ord/∂z_l*` for every basis function, flat like [`Basis::z`].
    pub grads: Vec<Complex64>,
}

fn gradients_and_phases(ham: &OrderedHamiltonian, basis: &Basis) -> (Vec<Complex64>, Vec<Complex64>) {
    let (m, dof) = (basis.len(), basis.dof);
    let mut grads = vec![Complex64::new(0.0, 0.0); m * dof];
    for (l, g) in grads.chunks_exact_mut(dof).enumerate() {
        ham.grad_into(basis.get(l), g);
    }
    let phases = (0..m)
        .map(|l| OrderedHamiltonian::phase_term(basis.get(l), &grads[l * dof..(l + 1) * dof]))
        .collect();
    (grads, phases)
}

/// Column-major `Ω`, built from the upper triangle and mirrored.
fn overlap_columns(basis: &Basis) -> Vec<Complex64> {
    let m = basis.len();
    let half_norms: Vec<f64> = (0..m)
        .map(|l| 0.5 * basis.get(l).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
    buf.par_chunks_mut(m).enumerate().for_each(|(l, col)| {
        let zl = basis.get(l);
        for (k, out) in col.iter_mut().enumerate().take(l + 1) {
            let mut e = Complex64::new(-half_norms[k] - half_norms[l], 0.0);
            for (a, b) in basis.get(k).iter().zip(zl) {
                e += a.conj() * b;
            }
            *out = e.exp();
        }
    });
    for l in 0..m {
        for k in l + 1..m {
            buf[l * m + k] = buf[k * m + l].conj();
        }
    }
    buf
}

fn column_major(buf: &[Complex64], m: usize) -> Mat<Complex64> {
    faer::MatRef::from_column_major_slice(buf, m, m).to_owned()
}

pub fn assemble_kernels(ham: &OrderedHamiltonian, basis: &Basis) -> Kernels {
    let (m, dof) = (basis.len(), basis.dof);
    let (grads, phases) = gradients_and_phases(ham, basis);
    let buf = overlap_columns(basis);
    let mut ht = vec![Complex64::new(0.0, 0.0); m * m];
    ht.par_chunks_mut(m).enumerate().for_each(|(l, col)| {
        let zl = basis.get(l);
        let gl = &grads[l * dof..(l + 1) * dof];
        for (k, out) in col.iter_mut().enumerate() {
            *out = buf[l * m + k] * ham.h_tilde_bracket(basis.get(k), zl, gl, phases[l]);
        }
    });
    Kernels {
        omega: column_major(&buf, m),
        htilde: column_major(&ht, m),
        grads,
    }
}

/// `Ω`, the product `H̃ a` and the gradients, without forming `H̃`.
pub struct KernelAction {
    pub omega: Mat<Complex64>,
    pub htilde_a: Vec<Complex64>,
    pub grads: Vec<Complex64>,
}

pub fn assemble_action(ham: &OrderedHamiltonian, basis: &Basis, a: &[Complex64]) -> KernelAction {
    let (m, dof) = (basis.len(), basis.dof);
    let (grads, phases) = gradients_and_phases(ham, basis);
    let buf = overlap_columns(basis);
    // row k of Ω is the conjugate of column k
    // With C = Σ_n c_n z_n the bath terms ω_n z_kn* z_ln cancel against the
    // gradient projection, leaving a bracket that only needs per-state sums.
    let coupled = |z: &[Complex64], conj: bool| -> Complex64 {
        ham.coupling
            .iter()
            .zip(&z[1..])
            .map(|(c, v)| c * if conj { v.conj() } else { *v })
            .sum()
    };
    let cols: Vec<[Complex64; 4]> = (0..m)
        .map(|l| {
            let zl = basis.get(l);
            let shift = ham.zero_point - phases[l];
            [zl[0], coupled(zl, false), grads[l * dof], shift]
        })
        .collect();
    let htilde_a = (0..m)
        .into_par_iter()
        .map(|k| {
            let zk = basis.get(k);
            let u = zk[0].conj();
            let ck = coupled(zk, true);
            let row = &buf[k * m..(k + 1) * m];
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..m {
                let [z0, dl, g0, shift] = cols[l];
                let b = ham.system_kernel(u, z0) + shift - (u + z0) * (ck + dl) + 2.0 * z0.re * ck - u * g0;
                acc += row[l].conj() * b * a[l];
            }
            acc
        })
        .collect();
    KernelAction {
        omega: column_major(&buf, m),
        htilde_a,
        grads,
    }
}
