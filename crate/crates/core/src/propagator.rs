//! Coupled coherent states propagation.
//!
//! Every basis function follows the complexified classical flow
//! `i ż_l = ∂H_ord/∂z_l*`, while the amplitudes obey the variational
//! equations `i Σ_l ⟨z_k|z_l⟩ ȧ_l = Σ_l H̃_kl a_l`. Both are advanced by the
//! same Runge–Kutta stages. The wavefunction is never renormalized.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{assemble_action, assemble_kernels, Basis, DisplacementVector, KernelAction, OrderedHamiltonian};
use crate::linalg::{OverlapSolver, RegularizedSolver, SolverKind};
use crate::model::{InitialState, ModelSpec};
use crate::observables::{
    self, autocorrelation_1d, energy_breakdown, reduced_density, system_autocorr, trapezoid,
    ObservableConfig, ObservableSeries, Record,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fixed-step fourth-order Runge–Kutta.
    Rk4,
    /// Dormand–Prince 5(4) with step-size control.
    DormandPrince,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub method: Method,
    /// Relative eigenvalue cut (or relative shift) of the overlap-matrix solves.
    pub reg_threshold: f64,
    pub solver: SolverKind,
    /// Record every `record_stride` base steps of length `dt`.
    pub record_stride: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            t_final: 20.0,
            method: Method::Rk4,
            reg_threshold: 1e-8,
            solver: SolverKind::Spectral,
            record_stride: 10,
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("integrator.dt", "must be positive"));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::invalid("integrator.t_final", "must be non-negative"));
        }
        if !(self.reg_threshold > 0.0 && self.reg_threshold < 1.0) {
            return Err(Error::invalid("integrator.reg_threshold", "must lie in (0, 1)"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("integrator.record_stride", "must be at least 1"));
        }
        if self.method == Method::DormandPrince && !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::invalid("integrator.rtol", "tolerances must be positive"));
        }
        Ok(())
    }

    pub fn record_interval(&self) -> f64 {
        self.dt * self.record_stride as f64
    }
}

/// The expansion `Ψ(t) = Σ_l a_l(t) |z_l(t)⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcsState {
    pub t: f64,
    pub basis: Basis,
    pub amplitudes: Vec<Complex64>,
}

impl CcsState {
    pub fn new(t: f64, basis: &[DisplacementVector], amplitudes: Vec<Complex64>) -> Result<Self> {
        let basis = Basis::from_vectors(basis)?;
        if basis.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            t,
            basis,
            amplitudes,
        })
    }

    pub fn multiplicity(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn dof(&self) -> usize {
        self.basis.dof
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.basis.z.iter().all(|z| z.is_finite())
            && self.amplitudes.iter().all(|a| a.is_finite())
    }

    pub fn diagnostics(&self, ham: &OrderedHamiltonian, reg_threshold: f64) -> Result<Diagnostics> {
        let k = assemble_kernels(ham, &self.basis);
        let solver = RegularizedSolver::new(&k.omega, reg_threshold)?;
        Ok(Diagnostics {
            norm: observables::norm(self),
            energy: energy_breakdown(self, ham).total(),
            condition: solver.condition(),
            rank: solver.rank(),
        })
    }

    /// JSON checkpoint; floats are written in shortest round-trip form.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let st: Self = serde_json::from_str(s)?;
        if st.basis.len() != st.amplitudes.len() || st.basis.z.len() != st.basis.len() * st.basis.dof {
            return Err(Error::Parse("inconsistent checkpoint dimensions".into()));
        }
        Ok(st)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub norm: f64,
    pub energy: f64,
    pub condition: f64,
    pub rank: usize,
}

/// Evaluates the coupled right-hand side and advances states.
pub struct Propagator {
    ham: OrderedHamiltonian,
    reg_threshold: f64,
    solver: SolverKind,
}

#[derive(Debug, Clone, Copy)]
struct StageInfo {
    condition: f64,
}

// Dormand–Prince 5(4) tableau; the right-hand side is autonomous so the nodes are not needed
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MINUS_I: Complex64 = Complex64 { re: 0.0, im: -1.0 };

fn axpy(y: &[Complex64], terms: &[(f64, &[Complex64])], h: f64) -> Vec<Complex64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        let s = h * c;
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += s * v;
        }
    }
    out
}

impl Propagator {
    pub fn new(spec: &ModelSpec, reg_threshold: f64) -> Self {
        Self {
            ham: OrderedHamiltonian::new(spec),
            reg_threshold,
            solver: SolverKind::Spectral,
        }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn hamiltonian(&self) -> &OrderedHamiltonian {
        &self.ham
    }

    fn pack(state: &CcsState) -> Vec<Complex64> {
        let mut y = state.basis.z.clone();
        y.extend_from_slice(&state.amplitudes);
        y
    }

    fn unpack(y: Vec<Complex64>, dof: usize, m: usize, t: f64) -> CcsState {
        let mut z = y;
        let amplitudes = z.split_off(m * dof);
        CcsState {
            t,
            basis: Basis { dof, z },
            amplitudes,
        }
    }

    /// Time derivative of the packed `(z, a)` vector.
    fn derivative(&self, y: &[Complex64], dof: usize, m: usize) -> Result<(Vec<Complex64>, StageInfo)> {
        let basis = Basis {
            dof,
            z: y[..m * dof].to_vec(),
        };
        let a = &y[m * dof..];
        let KernelAction { omega, htilde_a, grads } = assemble_action(&self.ham, &basis, a);
        let solver = OverlapSolver::from_owned(self.solver, omega, self.reg_threshold)?;
        let adot = solver.solve(&htilde_a);
        let mut out = Vec::with_capacity(y.len());
        out.extend(grads.iter().map(|g| MINUS_I * g));
        out.extend(adot.iter().map(|v| MINUS_I * v));
        Ok((
            out,
            StageInfo {
                condition: solver.condition(),
            },
        ))
    }

    fn rk4(&self, state: &CcsState, h: f64) -> Result<(CcsState, StageInfo)> {
        let (dof, m) = (state.dof(), state.multiplicity());
        let y = Self::pack(state);
        let (k1, info) = self.derivative(&y, dof, m)?;
        let (k2, _) = self.derivative(&axpy(&y, &[(0.5, &k1)], h), dof, m)?;
        let (k3, _) = self.derivative(&axpy(&y, &[(0.5, &k2)], h), dof, m)?;
        let (k4, _) = self.derivative(&axpy(&y, &[(1.0, &k3)], h), dof, m)?;
        let next = axpy(
            &y,
            &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
            h,
        );
        Ok((Self::unpack(next, dof, m, state.t + h), info))
    }

    /// One Dormand–Prince attempt; returns the 5th-order solution and the scaled error norm.
    fn dopri(&self, state: &CcsState, h: f64, rtol: f64, atol: f64) -> Result<(CcsState, f64, StageInfo)> {
        let (dof, m) = (state.dof(), state.multiplicity());
        let y = Self::pack(state);
        let mut ks: Vec<Vec<Complex64>> = Vec::with_capacity(7);
        let mut info = None;
        for s in 0..7 {
            let terms: Vec<(f64, &[Complex64])> =
                (0..s).map(|j| (DP_A[s][j], ks[j].as_slice())).collect();
            let ys = axpy(&y, &terms, h);
            let (k, i) = self.derivative(&ys, dof, m)?;
            info.get_or_insert(i);
            ks.push(k);
        }
        let terms: Vec<(f64, &[Complex64])> = (0..7).map(|j| (DP_B[j], ks[j].as_slice())).collect();
        let next = axpy(&y, &terms, h);
        let mut err2 = 0.0;
        for i in 0..y.len() {
            let e: Complex64 = (0..7).map(|j| DP_E[j] * ks[j][i]).sum::<Complex64>() * h;
            let sc = atol + rtol * y[i].norm().max(next[i].norm());
            err2 += (e.norm() / sc).powi(2);
        }
        let err = (err2 / y.len() as f64).sqrt();
        Ok((
            Self::unpack(next, dof, m, state.t + h),
            err,
            info.expect("seven stages evaluated"),
        ))
    }

    /// Advances by `h` (which may be negative) with one classical RK4 step.
    pub fn advance_rk4(&self, state: &CcsState, h: f64) -> Result<CcsState> {
        let (next, _) = self.rk4(state, h)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { time: state.t });
        }
        Ok(next)
    }

    /// Advances to `t_target` with adaptive steps starting from `h0`.
    /// Returns the new state, the suggested next step, and the numbers of
    /// accepted and rejected attempts.
    fn advance_adaptive(
        &self,
        state: &CcsState,
        t_target: f64,
        h0: f64,
        cfg: &IntegratorConfig,
        max_condition: &mut f64,
    ) -> Result<(CcsState, f64, usize, usize)> {
        let mut cur = state.clone();
        let mut h = h0;
        let (mut accepted, mut rejected) = (0, 0);
        while cur.t < t_target - 1e-12 * t_target.abs().max(1.0) {
            let remaining = t_target - cur.t;
            let hs = h.min(remaining);
            if hs < 1e-12 * cur.t.abs().max(1.0) {
                return Err(Error::StepUnderflow { time: cur.t, step: hs });
            }
            let (next, err, info) = self.dopri(&cur, hs, cfg.rtol, cfg.atol)?;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 && next.is_finite() {
                *max_condition = max_condition.max(info.condition);
                cur = next;
                if hs == remaining {
                    cur.t = t_target;
                }
                accepted += 1;
                // keep the proposed step if we only shortened it to land on the target
                h = if hs < h { h.max(hs * factor) } else { hs * factor };
            } else {
                rejected += 1;
                h = hs * if err.is_finite() { factor.min(0.9) } else { 0.2 };
            }
        }
        Ok((cur, h, accepted, rejected))
    }
}

/// Advances one base step `dt` with the configured method.
pub fn step(state: &CcsState, cfg: &IntegratorConfig, spec: &ModelSpec) -> Result<CcsState> {
    cfg.validate()?;
    let prop = Propagator::new(spec, cfg.reg_threshold).with_solver(cfg.solver);
    match cfg.method {
        Method::Rk4 => prop.advance_rk4(state, cfg.dt),
        Method::DormandPrince => {
            let mut cond = 0.0;
            prop.advance_adaptive(state, state.t + cfg.dt, cfg.dt, cfg, &mut cond)
                .map(|(s, ..)| s)
        }
    }
}

/// Result of [`propagate`]. On abort `error` is set, `series` holds every
/// record up to the failure and `final_state` is the last good state.
#[derive(Debug)]
pub struct PropagationOutcome {
    pub series: ObservableSeries,
    pub final_state: CcsState,
    pub error: Option<Error>,
    pub steps: usize,
    pub rejected_steps: usize,
    pub max_condition: f64,
}

impl PropagationOutcome {
    pub fn max_norm_drift(&self) -> f64 {
        self.series.max_norm_drift()
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.series.max_energy_drift()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Builds [`Record`]s from CCS states.
pub struct Recorder {
    ham: OrderedHamiltonian,
    gamma_x: f64,
    initial: InitialState,
    reference: CcsState,
    x_grid: Vec<f64>,
    density_stride: usize,
    records: usize,
}

impl Recorder {
    pub fn new(spec: &ModelSpec, reference: &CcsState, obs: &ObservableConfig) -> Self {
        Self {
            ham: OrderedHamiltonian::new(spec),
            gamma_x: spec.well.gamma_x,
            initial: spec.initial_state(),
            reference: reference.clone(),
            x_grid: obs.grid(),
            density_stride: obs.density_stride,
            records: 0,
        }
    }

    pub fn record(&mut self, state: &CcsState, condition: f64, series: &mut ObservableSeries) -> Record {
        let density = reduced_density(state, self.gamma_x, &self.x_grid);
        let rec = Record {
            t: state.t,
            norm: observables::norm(state),
            energy: energy_breakdown(state, &self.ham),
            autocorr: autocorrelation_1d(state, &self.reference).ok(),
            c_s: system_autocorr(&density.values, &self.initial, &self.x_grid),
            density_integral: trapezoid(&self.x_grid, &density.values),
            condition,
        };
        series.clamp_count += density.clamped;
        series.push(rec.clone());
        if self.density_stride > 0 && self.records % self.density_stride == 0 {
            series.push_frame(state.t, density.values);
        }
        self.records += 1;
        rec
    }
}

pub type Hook<'a> = &'a mut dyn FnMut(&CcsState, &Record);

/// Integrates from `initial.t` to `cfg.t_final`, recording every
/// `record_stride` base steps and at the final time.
pub fn propagate(
    initial: &CcsState,
    cfg: &IntegratorConfig,
    spec: &ModelSpec,
    obs: &ObservableConfig,
    mut hook: Option<Hook<'_>>,
) -> Result<PropagationOutcome> {
    cfg.validate()?;
    obs.validate()?;
    if initial.dof() != spec.dof() {
        return Err(Error::DimensionMismatch {
            expected: spec.dof(),
            found: initial.dof(),
        });
    }
    let prop = Propagator::new(spec, cfg.reg_threshold).with_solver(cfg.solver);
    let mut recorder = Recorder::new(spec, initial, obs);
    let mut series = ObservableSeries::new(spec.bath.f, obs.grid());

    let omega0 = assemble_kernels(prop.hamiltonian(), &initial.basis).omega;
    let cond0 = OverlapSolver::new(cfg.solver, &omega0, cfg.reg_threshold)?.condition();
    let rec = recorder.record(initial, cond0, &mut series);
    if let Some(h) = hook.as_mut() {
        h(initial, &rec);
    }

    let t0 = initial.t;
    let span = cfg.t_final - t0;
    let n_steps = if span <= 0.0 {
        0
    } else {
        (span / cfg.dt - 1e-9).ceil() as usize
    };
    let mut state = initial.clone();
    let mut outcome_err = None;
    let (mut steps, mut rejected) = (0usize, 0usize);
    let mut max_condition = cond0;
    let mut h_adapt = cfg.dt;
    let mut last_condition = cond0;

    let mut i = 0;
    while i < n_steps {
        // next record boundary in base steps
        let next_i = ((i / cfg.record_stride) + 1) * cfg.record_stride;
        let next_i = next_i.min(n_steps);
        let t_next = if next_i == n_steps {
            cfg.t_final
        } else {
            t0 + next_i as f64 * cfg.dt
        };
        let result = match cfg.method {
            Method::Rk4 => {
                let mut cur = state.clone();
                let mut res = Ok(());
                for j in i..next_i {
                    let t_end = if j + 1 == n_steps {
                        cfg.t_final
                    } else {
                        t0 + (j + 1) as f64 * cfg.dt
                    };
                    match prop.rk4(&cur, t_end - cur.t) {
                        Ok((mut next, info)) => {
                            if !next.is_finite() {
                                res = Err(Error::NonFinite { time: cur.t });
                                break;
                            }
                            next.t = t_end;
                            max_condition = max_condition.max(info.condition);
                            last_condition = info.condition;
                            steps += 1;
                            cur = next;
                        }
                        Err(e) => {
                            res = Err(e);
                            break;
                        }
                    }
                }
                match res {
                    Ok(()) => Ok(cur),
                    Err(e) => {
                        state = cur;
                        Err(e)
                    }
                }
            }
            Method::DormandPrince => {
                let mut mc = max_condition;
                let r = prop.advance_adaptive(&state, t_next, h_adapt, cfg, &mut mc);
                max_condition = mc;
                r.map(|(s, h, acc, rej)| {
                    h_adapt = h;
                    steps += acc;
                    rejected += rej;
                    last_condition = mc;
                    s
                })
            }
        };
        match result {
            Ok(s) => {
                state = s;
                let rec = recorder.record(&state, last_condition, &mut series);
                if let Some(h) = hook.as_mut() {
                    h(&state, &rec);
                }
                if !(rec.norm.is_finite() && rec.energy.total().is_finite()) {
                    outcome_err = Some(Error::NonFinite { time: state.t });
                    break;
                }
            }
            Err(e) => {
                outcome_err = Some(e);
                break;
            }
        }
        i = next_i;
    }

    Ok(PropagationOutcome {
        series,
        final_state: state,
        error: outcome_err,
        steps,
        rejected_steps: rejected,
        max_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::sampler::{project_initial_amplitudes, sample_basis, SamplerConfig};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_gaussian_keeps_modulus() {
        let spec = ModelConfig::with_bath(2).build().unwrap();
        let z = DisplacementVector(vec![c(0.3, -0.2), c(0.5, 0.1), c(-0.2, 0.4)]);
        let init = CcsState::new(0.0, &[z], vec![c(1.0, 0.0)]).unwrap();
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_final: 5.0,
            record_stride: 50,
            ..Default::default()
        };
        let out = propagate(&init, &cfg, &spec, &ObservableConfig::default(), None)
            .unwrap()
            .into_result()
            .unwrap();
        // each stage is a pure phase; only the RK4 combination leaks
        assert!((out.final_state.amplitudes[0].norm() - 1.0).abs() < 1e-8);
        assert!(out.max_norm_drift() < 1e-8);
    }

    #[test]
    fn free_bath_modes_rotate() {
        let mut cfg = ModelConfig::with_bath(2);
        cfg.g = 0.0;
        let spec = cfg.build().unwrap();
        let z0 = vec![c(0.0, 0.0), c(0.7, 0.2), c(-0.3, 0.5)];
        let init = CcsState::new(0.0, &[DisplacementVector(z0.clone())], vec![c(1.0, 0.0)]).unwrap();
        let icfg = IntegratorConfig {
            dt: 0.01,
            t_final: 3.0,
            ..Default::default()
        };
        let prop = Propagator::new(&spec, icfg.reg_threshold);
        let mut s = init;
        for _ in 0..300 {
            s = prop.advance_rk4(&s, 0.01).unwrap();
        }
        for n in 1..3 {
            let w = spec.bath.frequencies[n - 1];
            let want = z0[n] * Complex64::from_polar(1.0, -w * 3.0);
            assert!((s.basis.get(0)[n] - want).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_length_run_has_initial_record_only() {
        let spec = ModelConfig::default().build().unwrap();
        let init = CcsState::new(0.0, &[DisplacementVector::zeros(1)], vec![c(1.0, 0.0)]).unwrap();
        let cfg = IntegratorConfig {
            t_final: 0.0,
            ..Default::default()
        };
        let out = propagate(&init, &cfg, &spec, &ObservableConfig::default(), None).unwrap();
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.series.times[0], 0.0);
        assert!(out.error.is_none());
    }

    #[test]
    fn time_reversal_recovers_amplitudes() {
        let spec = ModelConfig::with_bath(2).build().unwrap();
        let scfg = SamplerConfig {
            multiplicity: 8,
            seed: 4,
            ..Default::default()
        };
        let basis = sample_basis(&scfg, &spec).unwrap();
        let p = project_initial_amplitudes(&basis, &spec, 1e-10).unwrap();
        let init = CcsState::new(0.0, &basis, p.amplitudes).unwrap();
        let prop = Propagator::new(&spec, 1e-10);
        let mut s = init.clone();
        for _ in 0..100 {
            s = prop.advance_rk4(&s, 0.01).unwrap();
        }
        for _ in 0..100 {
            s = prop.advance_rk4(&s, -0.01).unwrap();
        }
        for (a, b) in s.amplitudes.iter().zip(&init.amplitudes) {
            assert!((a - b).norm() < 1e-6, "{a} vs {b}");
        }
        for (a, b) in s.basis.z.iter().zip(&init.basis.z) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn adaptive_matches_fixed_step() {
        let spec = ModelConfig::with_bath(2).build().unwrap();
        let scfg = SamplerConfig {
            multiplicity: 6,
            seed: 9,
            ..Default::default()
        };
        let basis = sample_basis(&scfg, &spec).unwrap();
        let p = project_initial_amplitudes(&basis, &spec, 1e-10).unwrap();
        let init = CcsState::new(0.0, &basis, p.amplitudes).unwrap();
        let obs = ObservableConfig::default();
        let fixed = IntegratorConfig {
            dt: 0.005,
            t_final: 2.0,
            reg_threshold: 1e-10,
            record_stride: 100,
            ..Default::default()
        };
        let adaptive = IntegratorConfig {
            method: Method::DormandPrince,
            dt: 0.05,
            record_stride: 10,
            ..fixed.clone()
        };
        let a = propagate(&init, &fixed, &spec, &obs, None).unwrap().into_result().unwrap();
        let b = propagate(&init, &adaptive, &spec, &obs, None).unwrap().into_result().unwrap();
        assert_eq!(b.series.times.last(), Some(&2.0));
        let ea = a.series.total();
        let eb = b.series.total();
        assert!((ea.last().unwrap() - eb.last().unwrap()).abs() < 1e-6);
        for (x, y) in a.final_state.amplitudes.iter().zip(&b.final_state.amplitudes) {
            assert!((x - y).norm() < 1e-5);
        }
    }

    #[test]
    fn checkpoint_resume_is_bit_identical() {
        let spec = ModelConfig::with_bath(2).build().unwrap();
        let scfg = SamplerConfig {
            multiplicity: 5,
            seed: 1,
            ..Default::default()
        };
        let basis = sample_basis(&scfg, &spec).unwrap();
        let p = project_initial_amplitudes(&basis, &spec, 1e-8).unwrap();
        let init = CcsState::new(0.0, &basis, p.amplitudes).unwrap();
        let prop = Propagator::new(&spec, 1e-8);
        let mut s = init;
        for _ in 0..10 {
            s = prop.advance_rk4(&s, 0.01).unwrap();
        }
        let restored = CcsState::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(restored, s);
        let a = prop.advance_rk4(&s, 0.01).unwrap();
        let b = prop.advance_rk4(&restored, 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_start_aborts() {
        let spec = ModelConfig::default().build().unwrap();
        let z = DisplacementVector(vec![c(f64::NAN, 0.0)]);
        let init = CcsState::new(0.0, &[z], vec![c(1.0, 0.0)]).unwrap();
        let prop = Propagator::new(&spec, 1e-8);
        assert!(prop.advance_rk4(&init, 0.01).is_err());
    }
}
