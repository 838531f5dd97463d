//! Physical parameters of the double well, the harmonic bath and their coupling.
//!
//! Units have ħ = 1. The system coordinate is `x` (mode 0), bath coordinates
//! are `y_1..y_f` (modes 1..f). Every coherent-state basis uses the widths
//! `γ_0 = γ_x` and `γ_n = m ω_n`, so the bath kernels are those of
//! `ω_n (a†a + 1/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `f_co` values used with `ω_co = 4` for f = 2..5.
pub const TABLE2_F_CO: [(usize, usize); 4] = [(2, 10), (3, 12), (4, 14), (5, 16)];

/// Looks up the tabulated discretization denominator for `f` bath modes.
pub fn tabulated_f_co(f: usize) -> Option<usize> {
    TABLE2_F_CO
        .iter()
        .find(|&&(ff, _)| ff == f)
        .map(|&(_, fco)| fco)
}

/// Bath frequencies `ω_k = -ω_co ln(1 - k/f_co)` for `k = 1..=f`.
pub fn discretize_frequencies(omega_co: f64, f_co: usize, f: usize) -> Result<Vec<f64>> {
    if !(omega_co > 0.0) || !omega_co.is_finite() {
        return Err(Error::invalid("model.omega_co", "must be positive and finite"));
    }
    if f >= f_co {
        return Err(Error::invalid(
            "model.f_co",
            format!("f_co = {f_co} must exceed the number of oscillators f = {f}"),
        ));
    }
    Ok((1..=f)
        .map(|k| -omega_co * (1.0 - k as f64 / f_co as f64).ln())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleWellParams {
    pub a: f64,
    pub b: f64,
    pub m_x: f64,
    pub gamma_x: f64,
}

impl DoubleWellParams {
    pub fn potential(&self, x: f64) -> f64 {
        let x2 = x * x;
        -0.5 * self.a * x2 + 0.25 * self.b * x2 * x2
    }

    pub fn barrier_height(&self) -> f64 {
        self.a * self.a / (4.0 * self.b)
    }

    /// Positive minimum; the other one is its mirror image.
    pub fn minimum(&self) -> f64 {
        (self.a / self.b).sqrt()
    }

    /// Energy of the width-`γ_x` Gaussian centred on the barrier top.
    pub fn gaussian_energy(&self) -> f64 {
        let g = self.gamma_x;
        g / (4.0 * self.m_x) - self.a / (4.0 * g) + 3.0 * self.b / (16.0 * g * g)
    }

    fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("model.a", self.a),
            ("model.b", self.b),
            ("model.m_x", self.m_x),
            ("model.gamma_x", self.gamma_x),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(key, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    pub f: usize,
    pub m: f64,
    pub omega_co: f64,
    pub f_co: usize,
    pub frequencies: Vec<f64>,
    /// Always `m * ω_n`.
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub g: f64,
    /// `g / √f` for every oscillator (empty when f = 0).
    pub g_n: Vec<f64>,
    /// `Σ g_n² / (2 m ω_n²)`, the coefficient of `x²` in the counter term.
    pub counter_coeff: f64,
}

/// Raw user inputs. `frequencies`, when given, replace the logarithmic
/// discretization; `f_co` is otherwise required for f > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub a: f64,
    pub b: f64,
    pub m_x: f64,
    pub gamma_x: f64,
    pub f: usize,
    pub m: f64,
    pub omega_co: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_co: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    pub g: f64,
    pub include_counter_term: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            a: 2.0,
            b: 1.0,
            m_x: 1.0,
            gamma_x: 2.0,
            f: 0,
            m: 0.1,
            omega_co: 4.0,
            f_co: None,
            frequencies: None,
            g: 0.1,
            include_counter_term: true,
        }
    }
}

impl ModelConfig {
    /// Defaults with `f` oscillators and the tabulated `f_co` when one exists.
    pub fn with_bath(f: usize) -> Self {
        Self {
            f,
            f_co: tabulated_f_co(f),
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<ModelSpec> {
        ModelSpec::new(self)
    }
}

/// Validated, immutable model. Cheap to clone and safe to share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub well: DoubleWellParams,
    pub bath: BathParams,
    pub coupling: CouplingParams,
    pub include_counter_term: bool,
    pub barrier_height: f64,
    pub minima: (f64, f64),
}

impl ModelSpec {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let well = DoubleWellParams {
            a: cfg.a,
            b: cfg.b,
            m_x: cfg.m_x,
            gamma_x: cfg.gamma_x,
        };
        well.validate()?;
        if !(cfg.m > 0.0) || !cfg.m.is_finite() {
            return Err(Error::invalid("model.m", "must be positive and finite"));
        }
        if !(cfg.g >= 0.0) || !cfg.g.is_finite() {
            return Err(Error::invalid("model.g", "must be non-negative and finite"));
        }

        let f = cfg.f;
        let (frequencies, f_co) = match (&cfg.frequencies, cfg.f_co) {
            (Some(freqs), fco) => {
                if freqs.len() != f {
                    return Err(Error::invalid(
                        "model.frequencies",
                        format!("expected {f} frequencies, got {}", freqs.len()),
                    ));
                }
                (freqs.clone(), fco.unwrap_or(f + 1))
            }
            (None, Some(fco)) => (discretize_frequencies(cfg.omega_co, fco, f)?, fco),
            (None, None) if f == 0 => (Vec::new(), 1),
            (None, None) => {
                return Err(Error::invalid(
                    "model.f_co",
                    format!("required for f = {f} when no explicit frequencies are given"),
                ))
            }
        };
        if f > 0 && !(cfg.omega_co > 0.0) {
            return Err(Error::invalid("model.omega_co", "must be positive"));
        }
        if f_co <= f {
            return Err(Error::invalid("model.f_co", "must exceed f"));
        }
        for (i, w) in frequencies.iter().enumerate() {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::invalid(
                    "model.frequencies",
                    format!("frequency {} is not positive: {w}", i + 1),
                ));
            }
            if i > 0 && *w <= frequencies[i - 1] {
                return Err(Error::invalid(
                    "model.frequencies",
                    "frequencies must be strictly increasing",
                ));
            }
        }
        let gammas: Vec<f64> = frequencies.iter().map(|w| cfg.m * w).collect();

        let g_n = if f == 0 {
            Vec::new()
        } else {
            vec![cfg.g / (f as f64).sqrt(); f]
        };
        let counter_coeff = g_n
            .iter()
            .zip(&frequencies)
            .map(|(g, w)| g * g / (2.0 * cfg.m * w * w))
            .sum();

        let barrier_height = well.barrier_height();
        let xm = well.minimum();
        Ok(Self {
            well,
            bath: BathParams {
                f,
                m: cfg.m,
                omega_co: cfg.omega_co,
                f_co,
                frequencies,
                gammas,
            },
            coupling: CouplingParams {
                g: cfg.g,
                g_n,
                counter_coeff,
            },
            include_counter_term: cfg.include_counter_term,
            barrier_height,
            minima: (-xm, xm),
        })
    }

    /// Number of modes, `f + 1`.
    pub fn dof(&self) -> usize {
        self.bath.f + 1
    }

    /// Basis width of every mode, system first.
    pub fn widths(&self) -> Vec<f64> {
        std::iter::once(self.well.gamma_x)
            .chain(self.bath.gammas.iter().copied())
            .collect()
    }

    /// Masses of every mode, system first.
    pub fn masses(&self) -> Vec<f64> {
        std::iter::once(self.well.m_x)
            .chain(std::iter::repeat(self.bath.m).take(self.bath.f))
            .collect()
    }

    /// Counter-term coefficient as it enters the Hamiltonian (zero when disabled).
    pub fn active_counter_coeff(&self) -> f64 {
        if self.include_counter_term {
            self.coupling.counter_coeff
        } else {
            0.0
        }
    }

    /// Full potential energy at the coordinate point `q = (x, y_1..y_f)`.
    pub fn potential(&self, q: &[f64]) -> f64 {
        let x = q[0];
        let mut v = self.well.potential(x);
        let mut coupling = 0.0;
        for (n, &y) in q[1..].iter().enumerate() {
            let w = self.bath.frequencies[n];
            v += 0.5 * self.bath.m * w * w * y * y;
            coupling += self.coupling.g_n[n] * y;
        }
        v - x * coupling + self.active_counter_coeff() * x * x
    }

    pub fn initial_state(&self) -> InitialState {
        InitialState {
            widths: self.widths(),
        }
    }
}

/// The factorized Gaussian `Ψ(0)`: width-`γ_x` Gaussian on the barrier top
/// times the bath ground states. In the coherent-state basis this is the
/// state with displacement zero in every mode.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub widths: Vec<f64>,
}

impl InitialState {
    /// Position-space value of the factor belonging to `mode`.
    pub fn factor(&self, mode: usize, q: f64) -> f64 {
        let g = self.widths[mode];
        (g / std::f64::consts::PI).powf(0.25) * (-0.5 * g * q * q).exp()
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        q.iter()
            .enumerate()
            .map(|(j, &qj)| self.factor(j, qj))
            .product()
    }

    pub fn displacement(&self) -> crate::hamiltonian::DisplacementVector {
        crate::hamiltonian::DisplacementVector::zeros(self.widths.len())
    }
}
