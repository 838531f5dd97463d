//! Executes run configurations and writes their artifacts.
//!
//! Files written to `output_dir`:
//!
//! * `config.resolved.toml`: the configuration with every default spelled out
//! * `ccs_series.csv`, `ccs_metadata.json`, `ccs_basis.txt`, `ccs_final_state.json`
//! * `splitop_series.csv`, `splitop_metadata.json`
//! * `*_density.csv` when density frames are requested
//! * `eigen.csv`, `eigen_report.txt`
//! * `comparison.txt`, `comparison.json` for `engine = "both"`

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::config::{Engine, RunConfig};
use crate::error::{Error, Result};
use crate::hamiltonian::DisplacementVector;
use crate::model::ModelSpec;
use crate::observables::{fmt_float, ObservableSeries};
use crate::propagator::{propagate, CcsState, Method, PropagationOutcome};
use crate::reference::{solve_tise, split_operator_propagate, EigenResult, GridOutcome};
use crate::sampler::{
    project_initial_amplitudes, read_basis, sample_basis, write_basis, Projection, RNG_ALGORITHM,
};

/// Reference values of the lowest five levels: `(E_n, |c_n|²)`.
pub const TABLE_LEVELS: [(f64, f64); 5] = [
    (-0.300, 0.654),
    (0.046, 0.0),
    (1.23, 0.323),
    (2.46, 0.0),
    (3.94, 0.0225),
];
pub const TABLE_ENERGY_TOL: f64 = 0.005;
pub const TABLE_OVERLAP_TOL: f64 = 0.002;
/// Odd states have zero overlap with the even initial Gaussian.
pub const TABLE_ODD_TOL: f64 = 1e-10;

pub struct CcsRun {
    pub basis: Vec<DisplacementVector>,
    pub projection: Projection,
    pub outcome: PropagationOutcome,
    pub wall_seconds: f64,
}

pub struct GridRun {
    pub outcome: GridOutcome,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub quantity: String,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub struct EigenRun {
    pub result: EigenResult,
    pub table: Option<Vec<TableRow>>,
}

impl EigenRun {
    pub fn table_passes(&self) -> bool {
        self.table.as_ref().is_none_or(|rows| rows.iter().all(|r| r.pass))
    }
}

/// Engine-against-engine deviations over the common record times.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub tolerance: f64,
    pub records: usize,
    /// Largest difference of `|c(t)|` between the propagators (f = 0 only).
    pub autocorr_abs: Option<f64>,
    pub ccs_vs_spectral: Option<f64>,
    pub splitop_vs_spectral: Option<f64>,
    pub c_s: f64,
    pub system_energy: f64,
    pub ccs_long_time_average: Option<f64>,
    pub splitop_long_time_average: Option<f64>,
    pub pass: bool,
}

impl Comparison {
    /// The deviation judged against the tolerance.
    pub fn headline(&self) -> (&'static str, f64) {
        match self.autocorr_abs {
            Some(d) => ("|c(t)|", d),
            None => ("c_S(t)", self.c_s),
        }
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_else(|| "n/a".into());
        s.push_str(&format!("records compared            {}\n", self.records));
        s.push_str(&format!("max |c| ccs vs splitop      {}\n", opt(self.autocorr_abs)));
        s.push_str(&format!("max |c| ccs vs spectral     {}\n", opt(self.ccs_vs_spectral)));
        s.push_str(&format!("max |c| splitop vs spectral {}\n", opt(self.splitop_vs_spectral)));
        s.push_str(&format!("max c_S ccs vs splitop      {}\n", fmt_float(self.c_s)));
        s.push_str(&format!("max E_S ccs vs splitop      {}\n", fmt_float(self.system_energy)));
        s.push_str(&format!("<<E>> ccs                   {}\n", opt(self.ccs_long_time_average)));
        s.push_str(&format!("<<E>> splitop               {}\n", opt(self.splitop_long_time_average)));
        let (what, d) = self.headline();
        s.push_str(&format!(
            "{} {what}: {} against tolerance {}\n",
            if self.pass { "PASS" } else { "FAIL" },
            fmt_float(d),
            fmt_float(self.tolerance)
        ));
        s
    }
}

#[derive(Default)]
pub struct RunReport {
    pub ccs: Option<CcsRun>,
    pub splitop: Option<GridRun>,
    pub eigen: Option<EigenRun>,
    pub comparison: Option<Comparison>,
    pub files: Vec<PathBuf>,
}

pub fn run_ccs(cfg: &RunConfig, spec: &ModelSpec) -> Result<CcsRun> {
    let basis = match &cfg.basis_file {
        Some(path) => {
            let b = read_basis(BufReader::new(File::open(path)?))?;
            if b.first().is_some_and(|z| z.len() != spec.dof()) {
                return Err(Error::DimensionMismatch {
                    expected: spec.dof(),
                    found: b[0].len(),
                });
            }
            b
        }
        None => sample_basis(&cfg.sampler_config(), spec)?,
    };
    let projection = project_initial_amplitudes(&basis, spec, cfg.integrator.reg_threshold)?;
    if !projection.is_converged() {
        log::warn!(
            "initial projection norm {:.6} below 0.999: basis under-resolves the initial state",
            projection.norm
        );
    }
    let initial = CcsState::new(0.0, &basis, projection.amplitudes.clone())?;
    let start = Instant::now();
    let mut last_log = Instant::now();
    let mut hook = |s: &CcsState, r: &crate::observables::Record| {
        if last_log.elapsed().as_secs() >= 10 {
            log::info!("ccs t = {:.2} norm = {:.6} E = {:.6}", s.t, r.norm, r.energy.total());
            last_log = Instant::now();
        }
    };
    let outcome = propagate(&initial, &cfg.integrator, spec, &cfg.observables, Some(&mut hook))?;
    Ok(CcsRun {
        basis,
        projection,
        outcome,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_splitop(cfg: &RunConfig, spec: &ModelSpec) -> Result<GridRun> {
    let start = Instant::now();
    let mut so = cfg.splitop.clone();
    so.density_stride = cfg.observables.density_stride;
    let outcome = split_operator_propagate(spec, &so)?;
    Ok(GridRun {
        outcome,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_eigen(cfg: &RunConfig, spec: &ModelSpec) -> Result<EigenRun> {
    let e = &cfg.eigen;
    let result = solve_tise(&spec.well, e.x_min, e.x_max, e.points)?;
    let table = e.check_table.then(|| table_check(&result));
    Ok(EigenRun { result, table })
}

/// Lowest five levels and overlaps against [`TABLE_LEVELS`].
pub fn table_check(r: &EigenResult) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for (n, &(e, c2)) in TABLE_LEVELS.iter().enumerate() {
        let computed = r.energies[n];
        rows.push(TableRow {
            quantity: format!("E_{}", n + 1),
            expected: e,
            computed,
            tolerance: TABLE_ENERGY_TOL,
            pass: (computed - e).abs() <= TABLE_ENERGY_TOL,
        });
        let computed = r.overlap_sq(n);
        let tol = if n % 2 == 1 { TABLE_ODD_TOL } else { TABLE_OVERLAP_TOL };
        rows.push(TableRow {
            quantity: format!("|c_{}|^2", n + 1),
            expected: c2,
            computed,
            tolerance: tol,
            pass: (computed - c2).abs() <= tol,
        });
    }
    rows
}

fn time_key(t: f64) -> i64 {
    (t * 1e6).round() as i64
}

fn max_abs_diff(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Compares the two propagators (and the spectral sum when given) on the
/// record times they share.
pub fn compare(
    ccs: &ObservableSeries,
    grid: &ObservableSeries,
    spectral: Option<&EigenResult>,
    tolerance: f64,
    t_tot: Option<f64>,
) -> Comparison {
    let index: std::collections::HashMap<i64, usize> =
        grid.times.iter().enumerate().map(|(i, t)| (time_key(*t), i)).collect();
    let pairs: Vec<(usize, usize)> = ccs
        .times
        .iter()
        .enumerate()
        .filter_map(|(i, t)| index.get(&time_key(*t)).map(|&j| (i, j)))
        .collect();
    let has_c = !ccs.autocorr.is_empty() && !grid.autocorr.is_empty();
    let autocorr_abs =
        has_c.then(|| max_abs_diff(pairs.iter().map(|&(i, j)| (ccs.autocorr[i].norm(), grid.autocorr[j].norm()))));
    let ccs_vs_spectral = spectral.filter(|_| !ccs.autocorr.is_empty()).map(|e| {
        max_abs_diff(
            ccs.times
                .iter()
                .zip(&ccs.autocorr)
                .map(|(t, c)| (c.norm(), e.spectral_autocorrelation(*t).norm())),
        )
    });
    let splitop_vs_spectral = spectral.filter(|_| !grid.autocorr.is_empty()).map(|e| {
        max_abs_diff(
            grid.times
                .iter()
                .zip(&grid.autocorr)
                .map(|(t, c)| (c.norm(), e.spectral_autocorrelation(*t).norm())),
        )
    });
    let c_s = max_abs_diff(pairs.iter().map(|&(i, j)| (ccs.c_s[i], grid.c_s[j])));
    let (es_a, es_b) = (ccs.system(), grid.system());
    let system_energy = max_abs_diff(pairs.iter().map(|&(i, j)| (es_a[i], es_b[j])));
    let horizon = |s: &ObservableSeries| t_tot.or(s.times.last().copied()).filter(|t| *t > 0.0);
    let mut cmp = Comparison {
        tolerance,
        records: pairs.len(),
        autocorr_abs,
        ccs_vs_spectral,
        splitop_vs_spectral,
        c_s,
        system_energy,
        ccs_long_time_average: horizon(ccs).and_then(|t| ccs.long_time_average(t).ok()),
        splitop_long_time_average: horizon(grid).and_then(|t| grid.long_time_average(t).ok()),
        pass: false,
    };
    let (_, d) = cmp.headline();
    cmp.pass = pairs.len() > 1
        && d <= tolerance
        && ccs_vs_spectral.is_none_or(|v| v <= tolerance)
        && splitop_vs_spectral.is_none_or(|v| v <= tolerance);
    cmp
}

/// Runs every engine of `cfg` without touching the file system. A CCS abort
/// is kept inside the returned outcome.
pub fn execute(cfg: &RunConfig) -> Result<RunReport> {
    let spec = cfg.validate()?;
    let mut report = RunReport::default();
    match cfg.engine {
        Engine::Eigen => report.eigen = Some(run_eigen(cfg, &spec)?),
        Engine::Ccs => report.ccs = Some(run_ccs(cfg, &spec)?),
        Engine::Splitop => report.splitop = Some(run_splitop(cfg, &spec)?),
        Engine::Both => {
            let grid = run_splitop(cfg, &spec)?;
            let ccs = run_ccs(cfg, &spec)?;
            let spectral = if spec.bath.f == 0 {
                let e = &cfg.eigen;
                Some(solve_tise(&spec.well, e.x_min, e.x_max, e.points)?)
            } else {
                None
            };
            report.comparison = Some(compare(
                &ccs.outcome.series,
                &grid.outcome.series,
                spectral.as_ref(),
                cfg.compare.tolerance,
                cfg.observables.t_tot,
            ));
            report.ccs = Some(ccs);
            report.splitop = Some(grid);
        }
    }
    Ok(report)
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(f))
}

fn series_summary(s: &ObservableSeries, t_tot: Option<f64>) -> serde_json::Value {
    let e = s.total();
    let horizon = t_tot.or(s.times.last().copied()).filter(|t| *t > 0.0);
    json!({
        "records": s.len(),
        "t_final": s.times.last(),
        "max_norm_drift": s.max_norm_drift(),
        "max_energy_drift": s.max_energy_drift(),
        "initial_energy": e.first(),
        "final_energy": e.last(),
        "density_clamp_count": s.clamp_count,
        "long_time_average": horizon.and_then(|t| s.long_time_average(t).ok()),
        "long_time_average_window": horizon,
    })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut w = create(dir, name, files)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_series(dir: &Path, prefix: &str, s: &ObservableSeries, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut w = create(dir, &format!("{prefix}_series.csv"), files)?;
    s.write_csv(&mut w)?;
    w.flush()?;
    if !s.density.frames.is_empty() {
        let mut w = create(dir, &format!("{prefix}_density.csv"), files)?;
        s.write_density_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Writes every artifact of `report` into `cfg.output_dir`.
pub fn write_artifacts(cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let spec = cfg.model.build()?;
    let mut files = Vec::new();
    let t_tot = cfg.observables.t_tot;

    if let Some(run) = &report.ccs {
        let out = &run.outcome;
        write_series(dir, "ccs", &out.series, &mut files)?;
        let mut w = create(dir, "ccs_basis.txt", &mut files)?;
        write_basis(&mut w, &run.basis)?;
        w.flush()?;
        let mut w = create(dir, "ccs_final_state.json", &mut files)?;
        w.write_all(out.final_state.to_json()?.as_bytes())?;
        w.flush()?;
        let p = &run.projection;
        let meta = json!({
            "name": cfg.name,
            "engine": "ccs",
            "version": env!("CARGO_PKG_VERSION"),
            "rng": RNG_ALGORITHM,
            "seed": cfg.seed,
            "model": spec,
            "sampler": cfg.sampler,
            "basis_file": cfg.basis_file,
            "integrator": cfg.integrator,
            "integrator_order": match cfg.integrator.method { Method::Rk4 => "4 (classical Runge-Kutta)", Method::DormandPrince => "5(4) (Dormand-Prince, adaptive)" },
            "observables": cfg.observables,
            "projection": {
                "norm": p.norm,
                "norm_defect": p.norm_defect,
                "residual": p.residual,
                "condition": p.condition,
                "full_condition": p.full_condition,
                "rank": p.rank,
                "converged": p.is_converged(),
            },
            "diagnostics": series_summary(&out.series, t_tot),
            "steps": out.steps,
            "rejected_steps": out.rejected_steps,
            "max_condition": out.max_condition,
            "error": out.error.as_ref().map(|e| json!({"kind": e.kind(), "message": e.to_string()})),
            "wall_seconds": run.wall_seconds,
        });
        write_json(dir, "ccs_metadata.json", &meta, &mut files)?;
    }

    if let Some(run) = &report.splitop {
        let out = &run.outcome;
        write_series(dir, "splitop", &out.series, &mut files)?;
        let axes = out.final_state.axes();
        let meta = json!({
            "name": cfg.name,
            "engine": "splitop",
            "version": env!("CARGO_PKG_VERSION"),
            "model": spec,
            "splitop": cfg.splitop,
            "splitting": "Strang, second order",
            "axes": axes,
            "grid_points": out.final_state.len(),
            "steps": out.steps,
            "diagnostics": series_summary(&out.series, t_tot),
            "note": "reduced density and c_S evaluated on the native x grid",
            "wall_seconds": run.wall_seconds,
        });
        write_json(dir, "splitop_metadata.json", &meta, &mut files)?;
    }

    if let Some(run) = &report.eigen {
        let r = &run.result;
        let mut w = create(dir, "eigen.csv", &mut files)?;
        writeln!(w, "n,energy,overlap_sq,parity")?;
        for n in 0..cfg.eigen.report_states.min(r.energies.len()) {
            writeln!(
                w,
                "{},{},{},{}",
                n + 1,
                fmt_float(r.energies[n]),
                fmt_float(r.overlap_sq(n)),
                r.parity(n) as i32
            )?;
        }
        w.flush()?;
        let mut w = create(dir, "eigen_report.txt", &mut files)?;
        writeln!(
            w,
            "finite differences, {} points on [{}, {}]",
            cfg.eigen.points, cfg.eigen.x_min, cfg.eigen.x_max
        )?;
        if let Some(rows) = &run.table {
            writeln!(w, "{:<10} {:>12} {:>24} {:>10}  status", "quantity", "expected", "computed", "tol")?;
            for row in rows {
                writeln!(
                    w,
                    "{:<10} {:>12} {:>24} {:>10.1e}  {}",
                    row.quantity,
                    row.expected,
                    fmt_float(row.computed),
                    row.tolerance,
                    if row.pass { "PASS" } else { "FAIL" }
                )?;
            }
        }
        w.flush()?;
    }

    if let Some(c) = &report.comparison {
        let mut w = create(dir, "comparison.txt", &mut files)?;
        w.write_all(c.report().as_bytes())?;
        w.flush()?;
        write_json(dir, "comparison.json", c, &mut files)?;
    }
    report.files.extend(files);
    Ok(())
}

/// Writes the resolved configuration, runs, and writes the artifacts.
/// A CCS abort, a failed table check or an enforced comparison failure is
/// returned as an error after the partial artifacts have been written.
pub fn run_and_write(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let echo = cfg.output_dir.join("config.resolved.toml");
    fs::write(&echo, cfg.to_toml()?)?;
    let mut report = execute(cfg)?;
    report.files.push(echo);
    write_artifacts(cfg, &mut report)?;
    if let Some(run) = report.ccs.as_mut() {
        if let Some(e) = run.outcome.error.take() {
            return Err(e);
        }
    }
    if let Some(run) = &report.eigen {
        if let Some(bad) = run.table.iter().flatten().find(|r| !r.pass) {
            return Err(Error::ToleranceExceeded {
                quantity: bad.quantity.clone(),
                deviation: (bad.computed - bad.expected).abs(),
                tolerance: bad.tolerance,
            });
        }
    }
    if let Some(c) = &report.comparison {
        if cfg.compare.enforce && !c.pass {
            let (what, d) = c.headline();
            return Err(Error::ToleranceExceeded {
                quantity: what.into(),
                deviation: d,
                tolerance: c.tolerance,
            });
        }
    }
    Ok(report)
}

/// One row of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub f: usize,
    pub multiplicity: usize,
    pub engine: Engine,
    pub status: String,
    pub long_time_average: Option<f64>,
    pub splitop_long_time_average: Option<f64>,
    pub max_norm_drift: Option<f64>,
    pub max_energy_drift: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub const HEADER: &'static str =
        "f,multiplicity,engine,status,long_time_average,splitop_long_time_average,max_norm_drift,max_energy_drift,error";

    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        let engine = serde_json::to_value(self.engine)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},\"{}\"",
            self.f,
            self.multiplicity,
            engine,
            self.status,
            opt(self.long_time_average),
            opt(self.splitop_long_time_average),
            opt(self.max_norm_drift),
            opt(self.max_energy_drift),
            self.error.as_deref().unwrap_or("").replace('"', "'")
        )
    }
}

fn sweep_row(point: &RunConfig, result: Result<RunReport>) -> SweepRow {
    let t_tot = point.observables.t_tot;
    let avg = |s: &ObservableSeries| {
        t_tot
            .or(s.times.last().copied())
            .filter(|t| *t > 0.0)
            .and_then(|t| s.long_time_average(t).ok())
    };
    let mut row = SweepRow {
        f: point.model.f,
        multiplicity: point.sampler.multiplicity,
        engine: point.engine,
        status: "ok".into(),
        long_time_average: None,
        splitop_long_time_average: None,
        max_norm_drift: None,
        max_energy_drift: None,
        error: None,
    };
    match result {
        Ok(r) => {
            let main = r
                .ccs
                .as_ref()
                .map(|c| &c.outcome.series)
                .or(r.splitop.as_ref().map(|g| &g.outcome.series));
            if let Some(s) = main {
                row.long_time_average = avg(s);
                row.max_norm_drift = Some(s.max_norm_drift());
                row.max_energy_drift = Some(s.max_energy_drift());
            }
            row.splitop_long_time_average = r.splitop.as_ref().and_then(|g| avg(&g.outcome.series));
        }
        Err(e) => {
            row.status = "failed".into();
            row.error = Some(format!("{}: {e}", e.kind()));
        }
    }
    row
}

/// Runs every sweep point on up to `workers` threads. Each finished row is
/// appended to `output_dir/sweep.csv` immediately; failures are recorded and
/// the sweep continues. Rows are returned in sweep order.
pub fn sweep(cfg: &RunConfig, workers: usize) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::invalid("sweep", "configuration has no [sweep] section"))?;
    let points: Vec<RunConfig> = (0..sw.f.len()).map(|i| cfg.sweep_point(i)).collect::<Result<_>>()?;
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("config.resolved.toml"), cfg.to_toml()?)?;
    let table = Mutex::new({
        let mut w = BufWriter::new(File::create(cfg.output_dir.join("sweep.csv"))?);
        writeln!(w, "{}", SweepRow::HEADER)?;
        w.flush()?;
        w
    });
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; points.len()]);
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(points.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("sweep queue");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(point) = points.get(i) else { break };
                log::info!("sweep point f = {} (M = {})", point.model.f, point.sampler.multiplicity);
                let row = sweep_row(point, run_and_write(point));
                {
                    let mut w = table.lock().expect("sweep table");
                    let _ = writeln!(w, "{}", row.csv()).and_then(|_| w.flush());
                }
                rows.lock().expect("sweep rows")[i] = Some(row);
            });
        }
    });
    Ok(rows.into_inner().expect("sweep rows").into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::model::ModelConfig;

    #[test]
    fn table_preset_passes() {
        let cfg = preset("table1").unwrap();
        let spec = cfg.validate().unwrap();
        let run = run_eigen(&cfg, &spec).unwrap();
        assert!(run.table_passes(), "{:?}", run.table);
    }

    #[test]
    fn tiny_both_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset("fig2").unwrap();
        cfg.output_dir = dir.path().to_path_buf();
        cfg.sampler.multiplicity = 30;
        cfg.integrator.t_final = 0.5;
        cfg.splitop.t_final = 0.5;
        let report = run_and_write(&cfg).unwrap();
        let cmp = report.comparison.as_ref().unwrap();
        assert!(cmp.records == 6 && cmp.pass, "{}", cmp.report());
        for name in ["config.resolved.toml", "ccs_series.csv", "splitop_series.csv", "comparison.txt", "ccs_metadata.json"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let echo = RunConfig::load(&dir.path().join("config.resolved.toml")).unwrap();
        assert_eq!(echo, cfg);
    }

    #[test]
    fn enforced_comparison_failure_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset("fig2").unwrap();
        cfg.output_dir = dir.path().to_path_buf();
        cfg.sampler.multiplicity = 1;
        cfg.sampler.sigma = 1e-6;
        cfg.integrator.t_final = 2.0;
        cfg.splitop.t_final = 2.0;
        cfg.compare.tolerance = 1e-6;
        assert!(matches!(run_and_write(&cfg), Err(Error::ToleranceExceeded { .. })));
        assert!(dir.path().join("comparison.txt").exists());
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            output_dir: dir.path().to_path_buf(),
            model: ModelConfig::default(),
            sampler: crate::sampler::SamplerConfig {
                multiplicity: 5,
                ..Default::default()
            },
            integrator: crate::propagator::IntegratorConfig {
                t_final: 0.1,
                dt: 0.01,
                ..Default::default()
            },
            sweep: Some(crate::config::SweepConfig {
                // no tabulated cutoff for f = 7 and none configured
                f: vec![0, 7, 2],
                multiplicity: vec![],
            }),
            ..Default::default()
        };
        let rows = sweep(&cfg, 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].status, "ok");
        assert_eq!(rows[1].status, "failed");
        assert_eq!(rows[2].status, "ok");
        let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
}
