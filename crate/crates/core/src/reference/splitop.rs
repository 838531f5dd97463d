//! Split-operator FFT propagation on tensor-product grids.
//!
//! Second-order Strang splitting `e^{−iVΔt/2} e^{−iTΔt} e^{−iVΔt/2}`, the
//! kinetic factor applied axis by axis in momentum space. Consecutive
//! half potential steps are fused between records.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::observables::{EnergyRecord, ObservableSeries, Record};

/// Upper bound on the number of grid points of one wavefunction.
pub const MAX_GRID_POINTS: usize = 1 << 25;

/// Periodic grid `x_i = x_min + i·dx`, `dx = (x_max − x_min)/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub mass: f64,
}

impl Axis {
    pub fn new(x_min: f64, x_max: f64, n: usize, mass: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("splitop.points", "need at least 2 points per axis"));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::invalid("splitop.extent", "x_max must exceed x_min"));
        }
        if !(mass > 0.0) {
            return Err(Error::invalid("splitop.mass", "must be positive"));
        }
        Ok(Self { x_min, x_max, n, mass })
    }

    /// Symmetric axis `[−half_width, half_width)`.
    pub fn symmetric(half_width: f64, n: usize, mass: f64) -> Result<Self> {
        Self::new(-half_width, half_width, n, mass)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * std::f64::consts::PI / (self.x_max - self.x_min);
        (0..self.n)
            .map(|i| {
                let j = if i <= self.n / 2 { i as f64 } else { i as f64 - self.n as f64 };
                j * dk
            })
            .collect()
    }
}

/// Potential energy on configuration space.
pub trait Potential: Sync {
    fn value(&self, q: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Potential for F {
    fn value(&self, q: &[f64]) -> f64 {
        self(q)
    }
}

impl Potential for ModelSpec {
    fn value(&self, q: &[f64]) -> f64 {
        self.potential(q)
    }
}

/// Complex amplitudes on a tensor grid, stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    axes: Vec<Axis>,
    psi: Vec<Complex64>,
}

impl GridWavefunction {
    /// Samples `f` on the grid and normalizes the result.
    pub fn from_fn<F>(axes: Vec<Axis>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let total = total_points(&axes)?;
        let mut psi = vec![Complex64::new(0.0, 0.0); total];
        psi.par_iter_mut().enumerate().for_each_init(
            || vec![0.0; axes.len()],
            |q, (idx, v)| {
                coords(&axes, idx, q);
                *v = f(q);
            },
        );
        let mut wf = Self { axes, psi };
        let n = wf.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("splitop.initial", "wavefunction vanishes on the grid"));
        }
        let s = 1.0 / n.sqrt();
        wf.psi.iter_mut().for_each(|v| *v *= s);
        Ok(wf)
    }

    /// The factorized initial Gaussian of `spec` on the given axes.
    pub fn initial(spec: &ModelSpec, axes: Vec<Axis>) -> Result<Self> {
        if axes.len() != spec.dof() {
            return Err(Error::DimensionMismatch {
                expected: spec.dof(),
                found: axes.len(),
            });
        }
        let init = spec.initial_state();
        Self::from_fn(axes, |q| Complex64::new(init.value(q), 0.0))
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn volume_element(&self) -> f64 {
        self.axes.iter().map(Axis::dx).product()
    }

    /// Riemann sum of `|ψ|²`.
    pub fn norm(&self) -> f64 {
        ordered_sum(self.psi.len(), |r| self.psi[r].iter().map(|v| v.norm_sqr()).sum::<f64>())
            * self.volume_element()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Complex64 {
        ordered_sum(self.psi.len(), |r| {
            self.psi[r.clone()]
                .iter()
                .zip(&other.psi[r])
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
        }) * self.volume_element()
    }

    /// `ρ(x_i) = Σ |ψ|² Π dy` over every axis but the first.
    pub fn reduced_density(&self) -> Vec<f64> {
        let n0 = self.axes[0].n;
        let rest = self.psi.len() / n0;
        let w: f64 = self.axes[1..].iter().map(Axis::dx).product();
        self.psi
            .par_chunks(rest)
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>() * w)
            .collect::<Vec<_>>()
            .into_iter()
            .take(n0)
            .collect()
    }

    /// `∫ Ψ_S(x,0) √ρ(x) dx` with the width-`γ_x` Gaussian.
    pub fn system_autocorr(&self, gamma_x: f64) -> f64 {
        let ax = &self.axes[0];
        let norm = (gamma_x / std::f64::consts::PI).powf(0.25);
        self.reduced_density()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let x = ax.x(i);
                norm * (-0.5 * gamma_x * x * x).exp() * r.max(0.0).sqrt()
            })
            .sum::<f64>()
            * ax.dx()
    }

    /// `⟨p_a²/2m_a⟩` for every axis.
    pub fn kinetic_energies(&self, plan: &AxisTransforms) -> Vec<f64> {
        let vol = self.volume_element();
        (0..self.axes.len())
            .map(|a| {
                let mut buf = self.psi.clone();
                let ax = &self.axes[a];
                let k = ax.wavenumbers();
                plan.forward(&mut buf, a);
                let n = ax.n as f64;
                let sum = ordered_sum(buf.len(), |r| {
                    r.map(|idx| {
                        let i = (idx / plan.strides[a]) % ax.n;
                        buf[idx].norm_sqr() * k[i] * k[i]
                    })
                    .sum::<f64>()
                });
                // an unnormalized forward transform scales |ψ̃|² by n
                sum / n * vol / (2.0 * ax.mass)
            })
            .collect()
    }

    /// `⟨g(q)⟩` for a real function of the coordinates.
    pub fn expectation<G: Fn(&[f64]) -> f64 + Sync>(&self, g: G) -> f64 {
        let axes = &self.axes;
        ordered_sum(self.psi.len(), |r| {
            let mut q = vec![0.0; axes.len()];
            r.map(|idx| {
                coords(axes, idx, &mut q);
                self.psi[idx].norm_sqr() * g(&q)
            })
            .sum::<f64>()
        }) * self.volume_element()
    }
}

const REDUCE_CHUNK: usize = 1 << 14;

/// Parallel sum over fixed index chunks, combined in order, so the result
/// does not depend on the number of threads.
fn ordered_sum<T, F>(len: usize, chunk_sum: F) -> T
where
    T: Send + std::iter::Sum<T>,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let partial: Vec<T> = (0..len.div_ceil(REDUCE_CHUNK))
        .into_par_iter()
        .map(|c| chunk_sum(c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(len)))
        .collect();
    partial.into_iter().sum()
}

fn total_points(axes: &[Axis]) -> Result<usize> {
    if axes.is_empty() {
        return Err(Error::invalid("splitop.axes", "need at least one axis"));
    }
    let mut total: usize = 1;
    for a in axes {
        total = total
            .checked_mul(a.n)
            .filter(|&t| t <= MAX_GRID_POINTS)
            .ok_or_else(|| {
                Error::invalid(
                    "splitop.points",
                    format!("tensor grid exceeds {MAX_GRID_POINTS} points"),
                )
            })?;
    }
    Ok(total)
}

fn coords(axes: &[Axis], mut idx: usize, q: &mut [f64]) {
    for a in (0..axes.len()).rev() {
        let n = axes[a].n;
        q[a] = axes[a].x(idx % n);
        idx /= n;
    }
}

/// FFT plans and strides for every axis of one grid shape.
pub struct AxisTransforms {
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    sizes: Vec<usize>,
    strides: Vec<usize>,
}

impl AxisTransforms {
    pub fn new(axes: &[Axis]) -> Self {
        let mut planner = FftPlanner::new();
        let sizes: Vec<usize> = axes.iter().map(|a| a.n).collect();
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * sizes[a + 1];
        }
        Self {
            fwd: sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inv: sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
            sizes,
            strides,
        }
    }

    fn forward(&self, psi: &mut [Complex64], axis: usize) {
        self.along(psi, axis, |line| self.fwd[axis].process(line));
    }

    /// Forward transform, pointwise multiplication by `factor[k]`, inverse
    /// transform; `factor` already carries the `1/n` normalization.
    fn filter(&self, psi: &mut [Complex64], axis: usize, factor: &[Complex64]) {
        self.along(psi, axis, |line| {
            self.fwd[axis].process(line);
            let n = self.sizes[axis];
            for chunk in line.chunks_exact_mut(n) {
                for (v, f) in chunk.iter_mut().zip(factor) {
                    *v *= f;
                }
            }
            self.inv[axis].process(line);
        });
    }

    /// Applies `op` to batches of contiguous lines along `axis`; lines of
    /// strided axes are transposed into scratch first.
    fn along<F>(&self, psi: &mut [Complex64], axis: usize, op: F)
    where
        F: Fn(&mut [Complex64]) + Sync,
    {
        let n = self.sizes[axis];
        let s = self.strides[axis];
        if s == 1 {
            let batch = n * (4096 / n).max(1);
            psi.par_chunks_mut(batch).for_each(|c| op(c));
            return;
        }
        psi.par_chunks_mut(n * s).for_each_init(
            || vec![Complex64::new(0.0, 0.0); n * s],
            |scratch, block| {
                for i in 0..n {
                    for j in 0..s {
                        scratch[j * n + i] = block[i * s + j];
                    }
                }
                op(scratch);
                for i in 0..n {
                    for j in 0..s {
                        block[i * s + j] = scratch[j * n + i];
                    }
                }
            },
        );
    }
}

/// Strang-split propagator for one grid shape, potential and time step.
pub struct SplitOperator {
    dt: f64,
    transforms: AxisTransforms,
    half_potential: Vec<Complex64>,
    full_potential: Vec<Complex64>,
    kinetic: Vec<Vec<Complex64>>,
}

impl SplitOperator {
    pub fn new<P: Potential + ?Sized>(axes: &[Axis], potential: &P, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::invalid("splitop.dt", "must be finite and non-zero"));
        }
        let total = total_points(axes)?;
        let mut v = vec![0.0; total];
        v.par_iter_mut().enumerate().for_each_init(
            || vec![0.0; axes.len()],
            |q, (idx, out)| {
                coords(axes, idx, q);
                *out = potential.value(q);
            },
        );
        let half_potential = v.iter().map(|v| Complex64::from_polar(1.0, -0.5 * v * dt)).collect();
        let full_potential = v.iter().map(|v| Complex64::from_polar(1.0, -v * dt)).collect();
        let kinetic = axes
            .iter()
            .map(|a| {
                let inv_n = 1.0 / a.n as f64;
                a.wavenumbers()
                    .iter()
                    .map(|k| Complex64::from_polar(inv_n, -k * k / (2.0 * a.mass) * dt))
                    .collect()
            })
            .collect();
        Ok(Self {
            dt,
            transforms: AxisTransforms::new(axes),
            half_potential,
            full_potential,
            kinetic,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn transforms(&self) -> &AxisTransforms {
        &self.transforms
    }

    fn potential_phase(psi: &mut [Complex64], phase: &[Complex64]) {
        psi.par_iter_mut().zip(phase).for_each(|(v, p)| *v *= p);
    }

    fn kinetic_step(&self, psi: &mut [Complex64]) {
        for (a, k) in self.kinetic.iter().enumerate() {
            self.transforms.filter(psi, a, k);
        }
    }

    /// Advances `wf` by `steps` full steps.
    pub fn advance(&self, wf: &mut GridWavefunction, steps: usize) {
        if steps == 0 {
            return;
        }
        let psi = &mut wf.psi;
        Self::potential_phase(psi, &self.half_potential);
        for s in 0..steps {
            self.kinetic_step(psi);
            let phase = if s + 1 == steps {
                &self.half_potential
            } else {
                &self.full_potential
            };
            Self::potential_phase(psi, phase);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitOpConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Record every `record_stride` steps.
    pub record_stride: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    /// Per bath mode point counts; empty means the default heuristic.
    pub bath_points: Vec<usize>,
    /// Bath extents in units of the ground-state length `1/√γ_n`.
    pub bath_half_width: f64,
    /// Record a density frame every `density_stride` records (0: never).
    pub density_stride: usize,
}

impl Default for SplitOpConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_final: 20.0,
            record_stride: 10,
            x_min: -3.5,
            x_max: 3.5,
            x_points: 32,
            bath_points: Vec::new(),
            bath_half_width: 8.0,
            density_stride: 0,
        }
    }
}

impl SplitOpConfig {
    pub fn validate(&self, f: usize) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("splitop.dt", "must be positive"));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::invalid("splitop.t_final", "must be non-negative"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("splitop.record_stride", "must be at least 1"));
        }
        if f > 3 {
            return Err(Error::Unsupported(format!(
                "split-operator propagation supports at most 3 bath modes, got {f}"
            )));
        }
        if !self.bath_points.is_empty() && self.bath_points.len() != f {
            return Err(Error::invalid(
                "splitop.bath_points",
                format!("expected {f} entries, got {}", self.bath_points.len()),
            ));
        }
        if !(self.bath_half_width > 0.0) {
            return Err(Error::invalid("splitop.bath_half_width", "must be positive"));
        }
        Ok(())
    }

    /// 128 points for the lowest bath frequency, 64 for the others.
    pub fn resolved_bath_points(&self, f: usize) -> Vec<usize> {
        if self.bath_points.is_empty() {
            (0..f).map(|n| if n == 0 { 128 } else { 64 }).collect()
        } else {
            self.bath_points.clone()
        }
    }

    pub fn axes(&self, spec: &ModelSpec) -> Result<Vec<Axis>> {
        self.validate(spec.bath.f)?;
        let mut axes = vec![Axis::new(self.x_min, self.x_max, self.x_points, spec.well.m_x)?];
        for (n, points) in self.resolved_bath_points(spec.bath.f).into_iter().enumerate() {
            let half = self.bath_half_width / spec.bath.gammas[n].sqrt();
            axes.push(Axis::symmetric(half, points, spec.bath.m)?);
        }
        Ok(axes)
    }
}

/// Result of a grid run.
#[derive(Debug)]
pub struct GridOutcome {
    pub series: ObservableSeries,
    pub final_state: GridWavefunction,
    pub steps: usize,
}

impl GridOutcome {
    pub fn max_norm_drift(&self) -> f64 {
        self.series.max_norm_drift()
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.series.max_energy_drift()
    }
}

/// Per-term energies of a grid state under `spec`.
pub fn grid_energy(wf: &GridWavefunction, spec: &ModelSpec, plan: &AxisTransforms) -> EnergyRecord {
    let kin = wf.kinetic_energies(plan);
    let f = spec.bath.f;
    let well = &spec.well;
    let potential_s = wf.expectation(|q| well.potential(q[0]));
    let bath_modes = (0..f)
        .map(|n| {
            let w = spec.bath.frequencies[n];
            let m = spec.bath.m;
            kin[n + 1] + wf.expectation(|q| 0.5 * m * w * w * q[n + 1] * q[n + 1])
        })
        .collect();
    let g = &spec.coupling.g_n;
    let interaction = wf.expectation(|q| -q[0] * (0..f).map(|n| g[n] * q[n + 1]).sum::<f64>());
    let cc = spec.active_counter_coeff();
    let counter = wf.expectation(|q| cc * q[0] * q[0]);
    EnergyRecord {
        kinetic_s: kin[0],
        potential_s,
        bath_modes,
        interaction,
        counter,
    }
}

/// Propagates the initial product Gaussian of `spec` and records the same
/// observables as the coherent-state engine. Reduced densities and `c_S` are
/// evaluated on the native `x` grid.
pub fn split_operator_propagate(spec: &ModelSpec, cfg: &SplitOpConfig) -> Result<GridOutcome> {
    let axes = cfg.axes(spec)?;
    let psi0 = GridWavefunction::initial(spec, axes.clone())?;
    let op = SplitOperator::new(&axes, spec, cfg.dt)?;
    let total_steps = (cfg.t_final / cfg.dt).round() as usize;
    let mut series = ObservableSeries::new(spec.bath.f, axes[0].points());
    let mut wf = psi0.clone();
    let mut done = 0;
    let mut records = 0;
    loop {
        let t = done as f64 * cfg.dt;
        let rho = wf.reduced_density();
        let rec = Record {
            t,
            norm: wf.norm(),
            energy: grid_energy(&wf, spec, op.transforms()),
            autocorr: (spec.bath.f == 0).then(|| psi0.inner(&wf)),
            c_s: wf.system_autocorr(spec.well.gamma_x),
            density_integral: rho.iter().sum::<f64>() * axes[0].dx(),
            condition: f64::NAN,
        };
        if !rec.norm.is_finite() {
            return Err(Error::NonFinite { time: t });
        }
        series.push(rec);
        if cfg.density_stride > 0 && records % cfg.density_stride == 0 {
            series.push_frame(t, rho);
        }
        records += 1;
        if done >= total_steps {
            break;
        }
        let n = cfg.record_stride.min(total_steps - done);
        op.advance(&mut wf, n);
        done += n;
        log::debug!("split-operator t = {:.3}", done as f64 * cfg.dt);
    }
    Ok(GridOutcome {
        series,
        final_state: wf,
        steps: done,
    })
}
