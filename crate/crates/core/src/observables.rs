//! Quantities recorded along a propagation: norm, term-resolved energies,
//! autocorrelations and the reduced density of the double-well coordinate.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{overlap_unchecked, Basis, OrderedHamiltonian};
use crate::model::InitialState;
use crate::propagator::CcsState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservableConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    /// Store the reduced density every `density_stride` records (0 disables frames).
    pub density_stride: usize,
    /// Averaging window for the long-time average; `None` means the full run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_tot: Option<f64>,
}

impl Default for ObservableConfig {
    fn default() -> Self {
        Self {
            x_min: -3.5,
            x_max: 3.5,
            x_points: 141,
            density_stride: 0,
            t_tot: None,
        }
    }
}

impl ObservableConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > self.x_min) {
            return Err(Error::invalid("observables.x_max", "must exceed x_min"));
        }
        if self.x_points < 3 {
            return Err(Error::invalid("observables.x_points", "need at least 3 points"));
        }
        if let Some(t) = self.t_tot {
            if !(t > 0.0) {
                return Err(Error::invalid("observables.t_tot", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = (self.x_max - self.x_min) / (self.x_points - 1) as f64;
        (0..self.x_points)
            .map(|i| self.x_min + i as f64 * h)
            .collect()
    }
}

/// Term-resolved energy expectation values of one state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub kinetic_s: f64,
    pub potential_s: f64,
    pub bath_modes: Vec<f64>,
    pub interaction: f64,
    pub counter: f64,
}

impl EnergyRecord {
    /// Double-well energy, kinetic plus quartic potential.
    pub fn system(&self) -> f64 {
        self.kinetic_s + self.potential_s
    }

    pub fn bath(&self) -> f64 {
        self.bath_modes.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.system() + self.bath() + self.interaction + self.counter
    }
}

/// Reduced density on a grid plus the number of negative round-off values set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub values: Vec<f64>,
    pub clamped: usize,
    pub min_raw: f64,
}

/// Trapezoidal rule on a uniform or non-uniform grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Position representation of a single-mode coherent state of width `γ`.
#[inline]
pub fn cs_wavefunction(gamma: f64, z: Complex64, x: f64) -> Complex64 {
    let e = -0.5 * gamma * x * x + (2.0 * gamma).sqrt() * z * x - 0.5 * z * z - 0.5 * z.norm_sqr();
    (gamma / std::f64::consts::PI).powf(0.25) * e.exp()
}

/// `‖Ψ‖² = Σ a_k* ⟨z_k|z_l⟩ a_l`
pub fn norm(state: &CcsState) -> f64 {
    let b = &state.basis;
    let a = &state.amplitudes;
    let mut acc = 0.0;
    for l in 0..b.len() {
        acc += a[l].norm_sqr();
        for k in 0..l {
            acc += 2.0 * (a[k].conj() * overlap_unchecked(b.get(k), b.get(l)) * a[l]).re;
        }
    }
    acc
}

/// Applies `⟨E⟩ = Σ a_k* H_ord(z_k*, z_l) ⟨z_k|z_l⟩ a_l` to every term separately.
pub fn energy_breakdown(state: &CcsState, ham: &OrderedHamiltonian) -> EnergyRecord {
    let b = &state.basis;
    let a = &state.amplitudes;
    let f = b.dof - 1;
    let mut kin = Complex64::new(0.0, 0.0);
    let mut pot = kin;
    let mut int = kin;
    let mut cnt = kin;
    let mut modes = vec![Complex64::new(0.0, 0.0); f];
    for k in 0..b.len() {
        let zk = b.get(k);
        for l in 0..b.len() {
            let zl = b.get(l);
            let w = a[k].conj() * a[l] * overlap_unchecked(zk, zl);
            let e = ham.breakdown_unchecked(zk, zl);
            kin += w * e.kinetic_s;
            pot += w * e.potential_s;
            int += w * e.interaction;
            cnt += w * e.counter;
            for (n, m) in modes.iter_mut().enumerate() {
                *m += w * ham.bath_mode_kernel(zk, zl, n + 1);
            }
        }
    }
    EnergyRecord {
        kinetic_s: kin.re,
        potential_s: pot.re,
        bath_modes: modes.iter().map(|m| m.re).collect(),
        interaction: int.re,
        counter: cnt.re,
    }
}

/// `c(t) = Σ_{k,l} a_k*(0) ⟨z_k(0)|z_l(t)⟩ a_l(t)` for the bare double well.
pub fn autocorrelation_1d(state: &CcsState, initial: &CcsState) -> Result<Complex64> {
    if state.basis.dof != 1 || initial.basis.dof != 1 {
        return Err(Error::Unsupported(
            "the wavefunction autocorrelation is defined for f = 0 only; use c_S".into(),
        ));
    }
    Ok(cross_overlap(initial, state))
}

/// `⟨Ψ_a|Ψ_b⟩` of two expansions in the same mode space.
pub fn cross_overlap(a: &CcsState, b: &CcsState) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..a.basis.len() {
        let zk = a.basis.get(k);
        let mut inner = Complex64::new(0.0, 0.0);
        for l in 0..b.basis.len() {
            inner += overlap_unchecked(zk, b.basis.get(l)) * b.amplitudes[l];
        }
        acc += a.amplitudes[k].conj() * inner;
    }
    acc
}

/// `ρ_S(x) = Σ_{k,l} a_k* a_l G_k*(x) G_l(x) Π_{n≥1} ⟨z_kn|z_ln⟩`
pub fn reduced_density(state: &CcsState, gamma_x: f64, x_grid: &[f64]) -> Density {
    let b = &state.basis;
    let a = &state.amplitudes;
    let m = b.len();
    // a_l G_l(x) for every l and x, row-major in x
    let mut ag = vec![Complex64::new(0.0, 0.0); m * x_grid.len()];
    for (ix, &x) in x_grid.iter().enumerate() {
        for l in 0..m {
            ag[ix * m + l] = a[l] * cs_wavefunction(gamma_x, b.get(l)[0], x);
        }
    }
    let raw: Vec<f64> = if b.dof == 1 {
        (0..x_grid.len())
            .map(|ix| ag[ix * m..(ix + 1) * m].iter().sum::<Complex64>().norm_sqr())
            .collect()
    } else {
        // ρ(x_i) = Σ_k conj(A_ki) (B A)_ki with A_li = a_l G_l(x_i)
        let bath = bath_overlaps(b);
        let nx = x_grid.len();
        let amat = Mat::from_fn(m, nx, |l, ix| ag[ix * m + l]);
        let prod = &bath * &amat;
        (0..nx)
            .map(|ix| {
                let (p, q) = (amat.col(ix), prod.col(ix));
                (0..m).map(|k| (p[k].conj() * q[k]).re).sum::<f64>()
            })
            .collect()
    };
    let min_raw = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let mut clamped = 0;
    let values = raw
        .into_iter()
        .map(|v| {
            if v < 0.0 {
                clamped += 1;
                0.0
            } else {
                v
            }
        })
        .collect();
    Density {
        values,
        clamped,
        min_raw,
    }
}

/// Products of bath-mode overlaps, `B_kl = Π_{n≥1} ⟨z_kn|z_ln⟩`.
fn bath_overlaps(b: &Basis) -> Mat<Complex64> {
    let m = b.len();
    let mut out = Mat::<Complex64>::zeros(m, m);
    for l in 0..m {
        for k in 0..=l {
            let v = overlap_unchecked(&b.get(k)[1..], &b.get(l)[1..]);
            out[(k, l)] = v;
            out[(l, k)] = v.conj();
        }
    }
    out
}

/// `c_S = ∫ dx Ψ(x,0) √ρ_S(x)` by the trapezoidal rule.
pub fn system_autocorr(density: &[f64], initial: &InitialState, x_grid: &[f64]) -> f64 {
    let integrand: Vec<f64> = x_grid
        .iter()
        .zip(density)
        .map(|(&x, &r)| initial.factor(0, x) * r.max(0.0).sqrt())
        .collect();
    trapezoid(x_grid, &integrand)
}

/// `(1/T) ∫_0^T E(t) dt` by the trapezoidal rule, interpolating linearly at `T`.
pub fn long_time_average(times: &[f64], values: &[f64], t_tot: f64) -> Result<f64> {
    if !(t_tot > 0.0) {
        return Err(Error::invalid("t_tot", "must be positive"));
    }
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::invalid("series", "times and values must be non-empty and of equal length"));
    }
    let last = *times.last().unwrap_or(&0.0);
    if last < t_tot * (1.0 - 1e-9) {
        return Err(Error::invalid(
            "t_tot",
            format!("series ends at t = {last}, shorter than T_tot = {t_tot}"),
        ));
    }
    if times[0].abs() > 1e-12 {
        return Err(Error::invalid("series", "must start at t = 0"));
    }
    let mut acc = 0.0;
    for i in 1..times.len() {
        let (t0, t1) = (times[i - 1], times[i]);
        if t0 >= t_tot {
            break;
        }
        let (v0, v1) = (values[i - 1], values[i]);
        if t1 <= t_tot {
            acc += 0.5 * (t1 - t0) * (v0 + v1);
        } else {
            let frac = (t_tot - t0) / (t1 - t0);
            let vt = v0 + frac * (v1 - v0);
            acc += 0.5 * (t_tot - t0) * (v0 + vt);
        }
    }
    Ok(acc / t_tot)
}

/// Reduced-density frames on a fixed grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DensityFrames {
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
}

/// Time series of everything recorded during a run. All per-record vectors
/// have the same length as `times`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub norm: Vec<f64>,
    pub kinetic_s: Vec<f64>,
    pub potential_s: Vec<f64>,
    /// One series per bath oscillator.
    pub bath_modes: Vec<Vec<f64>>,
    pub interaction: Vec<f64>,
    pub counter: Vec<f64>,
    /// Wavefunction autocorrelation, recorded only for f = 0.
    pub autocorr: Vec<Complex64>,
    pub c_s: Vec<f64>,
    /// `∫ ρ_S dx` on the observable grid.
    pub density_integral: Vec<f64>,
    /// Overlap-matrix condition estimate (retained spectrum); NaN for grid engines.
    pub condition: Vec<f64>,
    pub density: DensityFrames,
    pub clamp_count: usize,
}

/// One row of [`ObservableSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub norm: f64,
    pub energy: EnergyRecord,
    pub autocorr: Option<Complex64>,
    pub c_s: f64,
    pub density_integral: f64,
    pub condition: f64,
}

impl ObservableSeries {
    pub fn new(f: usize, x_grid: Vec<f64>) -> Self {
        Self {
            bath_modes: vec![Vec::new(); f],
            density: DensityFrames {
                x: x_grid,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, r: Record) {
        self.times.push(r.t);
        self.norm.push(r.norm);
        self.kinetic_s.push(r.energy.kinetic_s);
        self.potential_s.push(r.energy.potential_s);
        for (s, v) in self.bath_modes.iter_mut().zip(&r.energy.bath_modes) {
            s.push(*v);
        }
        self.interaction.push(r.energy.interaction);
        self.counter.push(r.energy.counter);
        if let Some(c) = r.autocorr {
            self.autocorr.push(c);
        }
        self.c_s.push(r.c_s);
        self.density_integral.push(r.density_integral);
        self.condition.push(r.condition);
    }

    pub fn push_frame(&mut self, t: f64, rho: Vec<f64>) {
        self.density.times.push(t);
        self.density.frames.push(rho);
    }

    pub fn system(&self) -> Vec<f64> {
        self.kinetic_s
            .iter()
            .zip(&self.potential_s)
            .map(|(k, v)| k + v)
            .collect()
    }

    pub fn bath_total(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.bath_modes.iter().map(|s| s[i]).sum())
            .collect()
    }

    pub fn total(&self) -> Vec<f64> {
        let sys = self.system();
        let bath = self.bath_total();
        (0..self.len())
            .map(|i| sys[i] + bath[i] + self.interaction[i] + self.counter[i])
            .collect()
    }

    /// `max_t |‖Ψ(t)‖² − ‖Ψ(0)‖²|`
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.norm.first().copied().unwrap_or(1.0);
        self.norm.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max)
    }

    /// `max_t |E(t) − E(0)| / |E(0)|` of the total energy.
    pub fn max_energy_drift(&self) -> f64 {
        let e = self.total();
        let e0 = e.first().copied().unwrap_or(0.0);
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        e.iter().map(|v| (v - e0).abs() / scale).fold(0.0, f64::max)
    }

    /// Long-time average of the double-well energy over `[0, t_tot]`.
    pub fn long_time_average(&self, t_tot: f64) -> Result<f64> {
        long_time_average(&self.times, &self.system(), t_tot)
    }

    pub fn autocorr_abs(&self) -> Vec<f64> {
        self.autocorr.iter().map(|c| c.norm()).collect()
    }

    /// Writes the series as CSV, 17 significant digits, one row per record.
    ///
    /// Columns: `t, norm, e_kinetic_s, e_potential_s, e_system, e_bath_1..e_bath_f,
    /// e_bath, e_interaction, e_counter, e_total, [c_re, c_im, c_abs,] c_s,
    /// density_integral, condition`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let f = self.bath_modes.len();
        let has_c = !self.autocorr.is_empty();
        let mut header = vec![
            "t".to_string(),
            "norm".into(),
            "e_kinetic_s".into(),
            "e_potential_s".into(),
            "e_system".into(),
        ];
        header.extend((1..=f).map(|n| format!("e_bath_{n}")));
        header.extend(["e_bath", "e_interaction", "e_counter", "e_total"].map(String::from));
        if has_c {
            header.extend(["c_re", "c_im", "c_abs"].map(String::from));
        }
        header.extend(["c_s", "density_integral", "condition"].map(String::from));
        writeln!(w, "{}", header.join(","))?;

        let sys = self.system();
        let bath = self.bath_total();
        let total = self.total();
        for i in 0..self.len() {
            let mut row = vec![
                self.times[i],
                self.norm[i],
                self.kinetic_s[i],
                self.potential_s[i],
                sys[i],
            ];
            row.extend(self.bath_modes.iter().map(|s| s[i]));
            row.extend([bath[i], self.interaction[i], self.counter[i], total[i]]);
            if has_c {
                let c = self.autocorr[i];
                row.extend([c.re, c.im, c.norm()]);
            }
            row.extend([self.c_s[i], self.density_integral[i], self.condition[i]]);
            writeln!(w, "{}", join_floats(&row))?;
        }
        Ok(())
    }

    /// Density frames as CSV: header `t,x_0,...`, one row per frame.
    pub fn write_density_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.density.x.iter().map(|x| fmt_float(*x)));
        writeln!(w, "{}", header.join(","))?;
        for (t, frame) in self.density.times.iter().zip(&self.density.frames) {
            let mut row = vec![*t];
            row.extend(frame);
            writeln!(w, "{}", join_floats(&row))?;
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(",")
}

/// Indices of local maxima of a sampled curve, skipping the end points.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect()
}

/// Mean spacing of the local maxima of `values` that exceed `min_height`.
pub fn peak_period(times: &[f64], values: &[f64], min_height: f64) -> Option<f64> {
    let peaks: Vec<f64> = local_maxima(values)
        .into_iter()
        .filter(|&i| values[i] > min_height)
        .map(|i| times[i])
        .collect();
    if peaks.len() < 2 {
        return None;
    }
    Some((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::DisplacementVector;
    use crate::model::ModelConfig;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn state(vectors: Vec<Vec<Complex64>>, amps: Vec<Complex64>) -> CcsState {
        let v: Vec<DisplacementVector> = vectors.into_iter().map(DisplacementVector).collect();
        CcsState::new(0.0, &v, amps).unwrap()
    }

    #[test]
    fn long_time_average_of_constant() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let v = vec![0.296875; t.len()];
        assert!((long_time_average(&t, &v, 5.0).unwrap() - 0.296875).abs() < 1e-15);
        assert!(long_time_average(&t, &v, 6.0).is_err());
        // linear ramp averaged over a partial window
        let r: Vec<f64> = t.clone();
        assert!((long_time_average(&t, &r, 3.25).unwrap() - 1.625).abs() < 1e-14);
    }

    #[test]
    fn initial_state_observables() {
        let spec = ModelConfig::with_bath(2).build().unwrap();
        let ham = OrderedHamiltonian::new(&spec);
        let s = state(vec![vec![c(0.0, 0.0); 3]], vec![c(1.0, 0.0)]);
        let e = energy_breakdown(&s, &ham);
        assert_eq!(e.interaction, 0.0);
        for (eb, w) in e.bath_modes.iter().zip(&spec.bath.frequencies) {
            assert_eq!(*eb, 0.5 * w);
        }
        assert!((e.system() - 0.296875).abs() < 1e-15);
        assert!((norm(&s) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn autocorr_rejects_bath() {
        let s = state(vec![vec![c(0.0, 0.0); 2]], vec![c(1.0, 0.0)]);
        assert!(autocorrelation_1d(&s, &s).is_err());
        let s1 = state(vec![vec![c(0.3, 0.1)]], vec![c(1.0, 0.0)]);
        assert!((autocorrelation_1d(&s1, &s1).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn bare_density_is_wavefunction_modulus() {
        let s = state(
            vec![vec![c(0.2, -0.4)], vec![c(-0.5, 0.3)]],
            vec![c(0.6, 0.1), c(0.3, -0.2)],
        );
        let grid: Vec<f64> = (0..50).map(|i| -3.0 + 0.12 * i as f64).collect();
        let d = reduced_density(&s, 2.0, &grid);
        for (x, r) in grid.iter().zip(&d.values) {
            let psi = s.amplitudes[0] * cs_wavefunction(2.0, s.basis.get(0)[0], *x)
                + s.amplitudes[1] * cs_wavefunction(2.0, s.basis.get(1)[0], *x);
            assert!((psi.norm_sqr() - r).abs() < 1e-10);
        }
    }

    #[test]
    fn density_marginal_preserves_norm() {
        let s = state(
            vec![
                vec![c(0.2, -0.4), c(0.5, 0.5), c(-0.1, 0.0)],
                vec![c(-0.5, 0.3), c(0.0, 0.2), c(0.3, -0.6)],
                vec![c(0.1, 0.1), c(-0.4, 0.1), c(0.2, 0.2)],
            ],
            vec![c(0.6, 0.1), c(0.3, -0.2), c(-0.1, 0.4)],
        );
        let cfg = ObservableConfig::default();
        let x = cfg.grid();
        let d = reduced_density(&s, 2.0, &x);
        assert!((trapezoid(&x, &d.values) - norm(&s)).abs() < 1e-6);
        assert_eq!(d.clamped, 0);
    }

    #[test]
    fn initial_system_autocorr_is_one() {
        let spec = ModelConfig::default().build().unwrap();
        let s = state(vec![vec![c(0.0, 0.0)]], vec![c(1.0, 0.0)]);
        let x = ObservableConfig::default().grid();
        let d = reduced_density(&s, 2.0, &x);
        let cs = system_autocorr(&d.values, &spec.initial_state(), &x);
        assert!((cs - 1.0).abs() < 1e-6);
    }

    #[test]
    fn csv_layout() {
        let mut s = ObservableSeries::new(1, vec![0.0, 1.0]);
        s.push(Record {
            t: 0.0,
            norm: 1.0,
            energy: EnergyRecord {
                kinetic_s: 0.5,
                potential_s: -0.2,
                bath_modes: vec![0.1],
                interaction: 0.0,
                counter: 0.01,
            },
            autocorr: None,
            c_s: 1.0,
            density_integral: 1.0,
            condition: 3.0,
        });
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,norm,e_kinetic_s,e_potential_s,e_system,e_bath_1,e_bath,e_interaction,e_counter,e_total,c_s,density_integral,condition"
        );
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert!((row[9] - 0.41).abs() < 1e-15);
    }

    #[test]
    fn peak_spacing() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = t.iter().map(|t| (2.0 * std::f64::consts::PI * t / 4.0).cos()).collect();
        let p = peak_period(&t, &v, 0.5).unwrap();
        assert!((p - 4.0).abs() < 0.011);
    }
}
