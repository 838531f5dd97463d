//! Random placement of the initial coherent-state basis and projection of
//! the initial wavefunction onto it.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{overlap_matrix, Basis, DisplacementVector};
use crate::linalg::{mat_vec, quadratic_form, RegularizedSolver};
use crate::model::ModelSpec;

/// Identifier of the generator written to run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20Rng (rand_chacha 0.9), seed_from_u64; StandardNormal (rand_distr 0.5)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub multiplicity: usize,
    /// Standard deviation of the circular complex normal per mode, `E|z_j|² = σ²`.
    pub sigma: f64,
    #[serde(skip)]
    pub seed: u64,
    /// Pairs with `|⟨z_i|z_j⟩| > 1 − min_overlap` are redrawn.
    pub min_overlap: f64,
    /// Total number of draws allowed before giving up.
    pub max_draws: usize,
    /// Place the first basis function exactly on the initial state.
    pub include_origin: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            multiplicity: 1,
            sigma: 0.5,
            seed: 0,
            min_overlap: 1e-3,
            max_draws: 0,
            include_origin: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.multiplicity == 0 {
            return Err(Error::invalid("sampler.multiplicity", "must be at least 1"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sampler.sigma", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.min_overlap) {
            return Err(Error::invalid("sampler.min_overlap", "must lie in [0, 1)"));
        }
        Ok(())
    }

    fn draw_budget(&self) -> usize {
        if self.max_draws > 0 {
            self.max_draws
        } else {
            100 * self.multiplicity + 1000
        }
    }
}

/// Draws `M` displacement vectors around the origin, deterministic in the seed.
pub fn sample_basis(cfg: &SamplerConfig, spec: &ModelSpec) -> Result<Vec<DisplacementVector>> {
    cfg.validate()?;
    let dof = spec.dof();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let scale = cfg.sigma * std::f64::consts::FRAC_1_SQRT_2;
    // |⟨z_i|z_j⟩| = exp(−|z_i − z_j|²/2)
    let min_dist2 = -2.0 * (1.0 - cfg.min_overlap).ln();

    let mut out: Vec<DisplacementVector> = Vec::with_capacity(cfg.multiplicity);
    if cfg.include_origin {
        out.push(DisplacementVector::zeros(dof));
    }
    let budget = cfg.draw_budget();
    let mut draws = 0;
    while out.len() < cfg.multiplicity {
        if draws >= budget {
            return Err(Error::SamplingExhausted {
                requested: cfg.multiplicity,
                placed: out.len(),
                attempts: draws,
            });
        }
        draws += 1;
        let candidate = DisplacementVector(
            (0..dof)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * scale
                })
                .collect(),
        );
        let too_close = out.iter().any(|z| {
            z.iter()
                .zip(candidate.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                < min_dist2
        });
        if !too_close {
            out.push(candidate);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub amplitudes: Vec<Complex64>,
    /// `a† Ω a` of the reconstructed initial state.
    pub norm: f64,
    /// `1 − norm`.
    pub norm_defect: f64,
    /// `‖Ω a − b‖₂`
    pub residual: f64,
    pub condition: f64,
    pub full_condition: f64,
    pub rank: usize,
}

impl Projection {
    /// Norm above 0.999; otherwise the basis under-resolves `Ψ(0)`.
    pub fn is_converged(&self) -> bool {
        self.norm >= 0.999
    }
}

/// Solves `Σ_l ⟨z_k|z_l⟩ a_l = ⟨z_k|Ψ(0)⟩` by truncated spectral decomposition.
pub fn project_initial_amplitudes(
    basis: &[DisplacementVector],
    spec: &ModelSpec,
    reg_threshold: f64,
) -> Result<Projection> {
    let basis = Basis::from_vectors(basis)?;
    if basis.dof != spec.dof() {
        return Err(Error::DimensionMismatch {
            expected: spec.dof(),
            found: basis.dof,
        });
    }
    let omega = overlap_matrix(&basis);
    // ⟨z_k|0⟩ = exp(−|z_k|²/2)
    let rhs: Vec<Complex64> = basis
        .iter()
        .map(|z| {
            let n2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
            Complex64::new((-0.5 * n2).exp(), 0.0)
        })
        .collect();
    let solver = RegularizedSolver::new(&omega, reg_threshold)?;
    let amplitudes = solver.solve(&rhs);
    if amplitudes.iter().any(|a| !a.is_finite()) {
        return Err(Error::Singular {
            condition: solver.full_condition(),
            rank: solver.rank(),
            size: solver.size(),
        });
    }
    let norm = quadratic_form(&amplitudes, &omega, &amplitudes).re;
    let residual = mat_vec(&omega, &amplitudes)
        .iter()
        .zip(&rhs)
        .map(|(x, b)| (x - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(Projection {
        amplitudes,
        norm,
        norm_defect: 1.0 - norm,
        residual,
        condition: solver.condition(),
        full_condition: solver.full_condition(),
        rank: solver.rank(),
    })
}

/// Writes one basis vector per line as `re_0 im_0 re_1 im_1 ...`.
pub fn write_basis<W: Write>(mut w: W, basis: &[DisplacementVector]) -> Result<()> {
    for z in basis {
        let line: Vec<String> = z
            .iter()
            .flat_map(|v| [format!("{:.16e}", v.re), format!("{:.16e}", v.im)])
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_basis<R: BufRead>(r: R) -> Result<Vec<DisplacementVector>> {
    let mut out = Vec::new();
    let mut dof = None;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("basis line {}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.len() % 2 != 0 {
            return Err(Error::Parse(format!(
                "basis line {}: odd number of columns",
                lineno + 1
            )));
        }
        let d = vals.len() / 2;
        if *dof.get_or_insert(d) != d {
            return Err(Error::DimensionMismatch {
                expected: dof.unwrap_or(d),
                found: d,
            });
        }
        out.push(DisplacementVector(
            vals.chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        ));
    }
    Ok(out)
}
