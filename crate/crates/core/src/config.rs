//! Run configuration files (TOML) and built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SolverKind;
use crate::model::{tabulated_f_co, ModelConfig, ModelSpec};
use crate::observables::ObservableConfig;
use crate::propagator::IntegratorConfig;
use crate::reference::SplitOpConfig;
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Coupled coherent states.
    Ccs,
    /// Split-operator grid propagation (f ≤ 3).
    Splitop,
    /// Both propagators plus a comparison report.
    Both,
    /// Finite-difference eigenpairs of the bare double well.
    Eigen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    /// Number of eigenpairs written to `eigen.csv`.
    pub report_states: usize,
    /// Compare the lowest five levels against the tabulated reference values.
    pub check_table: bool,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            x_min: -4.0,
            x_max: 4.0,
            points: 256,
            report_states: 10,
            check_table: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Largest allowed deviation of `|c(t)|` (f = 0) or `c_S(t)` between engines.
    pub tolerance: f64,
    /// Fail the run when the tolerance is exceeded.
    pub enforce: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.02,
            enforce: false,
        }
    }
}

/// Sweep over the number of bath oscillators.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub f: Vec<usize>,
    /// Multiplicity per sweep point; empty means `sampler.multiplicity` everywhere.
    pub multiplicity: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub engine: Engine,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Optional basis file (one displacement vector per line, `re im` pairs)
    /// used instead of random sampling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis_file: Option<PathBuf>,
    /// Marks runs too expensive for a workstation; `run` refuses them
    /// without `--confirm-long-run`.
    pub long_run: bool,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    pub integrator: IntegratorConfig,
    pub observables: ObservableConfig,
    pub splitop: SplitOpConfig,
    pub eigen: EigenConfig,
    pub compare: CompareConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            engine: Engine::Ccs,
            seed: 1,
            output_dir: PathBuf::from("out"),
            basis_file: None,
            long_run: false,
            model: ModelConfig::default(),
            sampler: SamplerConfig::default(),
            integrator: IntegratorConfig::default(),
            observables: ObservableConfig::default(),
            splitop: SplitOpConfig::default(),
            eigen: EigenConfig::default(),
            compare: CompareConfig::default(),
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Err(Error::invalid("<config>", "empty configuration"));
        }
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Fully resolved form with every default spelled out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Sampler settings with the run seed applied.
    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            seed: self.seed,
            ..self.sampler.clone()
        }
    }

    /// Checks every section the selected engine needs and returns the model.
    pub fn validate(&self) -> Result<ModelSpec> {
        let spec = self.model.build()?;
        self.observables.validate()?;
        let ccs = matches!(self.engine, Engine::Ccs | Engine::Both);
        let grid = matches!(self.engine, Engine::Splitop | Engine::Both);
        if ccs {
            self.sampler.validate()?;
            self.integrator.validate()?;
        }
        if grid {
            self.splitop.validate(spec.bath.f)?;
        }
        if self.engine == Engine::Both {
            if (self.splitop.t_final - self.integrator.t_final).abs() > 1e-12 {
                return Err(Error::invalid(
                    "splitop.t_final",
                    "must equal integrator.t_final when engine = \"both\"",
                ));
            }
            let a = self.integrator.record_interval();
            let b = self.splitop.dt * self.splitop.record_stride as f64;
            if (a - b).abs() > 1e-9 * a.max(b) {
                return Err(Error::invalid(
                    "splitop.record_stride",
                    format!("record interval {b} differs from the integrator's {a}"),
                ));
            }
        }
        if self.engine == Engine::Eigen {
            if self.eigen.points < 3 {
                return Err(Error::invalid("eigen.points", "need at least 3 points"));
            }
            if !(self.eigen.x_max > self.eigen.x_min) {
                return Err(Error::invalid("eigen.x_max", "must exceed x_min"));
            }
        }
        if !(self.compare.tolerance > 0.0) {
            return Err(Error::invalid("compare.tolerance", "must be positive"));
        }
        if let Some(sw) = &self.sweep {
            if sw.f.is_empty() {
                return Err(Error::invalid("sweep.f", "must list at least one value"));
            }
            if !sw.multiplicity.is_empty() && sw.multiplicity.len() != sw.f.len() {
                return Err(Error::invalid("sweep.multiplicity", "must match the length of sweep.f"));
            }
        }
        Ok(spec)
    }

    /// Configuration of one sweep point with `f` oscillators.
    pub fn sweep_point(&self, index: usize) -> Result<RunConfig> {
        let sw = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::invalid("sweep", "no sweep section"))?;
        let f = *sw
            .f
            .get(index)
            .ok_or_else(|| Error::invalid("sweep.f", "index out of range"))?;
        let mut cfg = self.clone();
        cfg.sweep = None;
        cfg.name = format!("{}-f{f}", self.name);
        cfg.output_dir = self.output_dir.join(format!("f{f}"));
        cfg.model.f = f;
        cfg.model.frequencies = None;
        if f > 0 {
            cfg.model.f_co = tabulated_f_co(f).or(self.model.f_co);
        }
        if let Some(&m) = sw.multiplicity.get(index) {
            cfg.sampler.multiplicity = m;
        }
        if f > 3 && cfg.engine != Engine::Ccs {
            cfg.engine = Engine::Ccs;
        }
        Ok(cfg)
    }
}

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: RunConfig,
}

fn thermalization(name: &str, f: usize, m: usize, t_final: f64) -> RunConfig {
    RunConfig {
        name: name.into(),
        engine: Engine::Ccs,
        output_dir: PathBuf::from(format!("out/{name}")),
        model: ModelConfig::with_bath(f),
        sampler: SamplerConfig {
            multiplicity: m,
            ..Default::default()
        },
        integrator: IntegratorConfig {
            t_final,
            record_stride: 20,
            ..Default::default()
        },
        observables: ObservableConfig {
            density_stride: 10,
            t_tot: Some(t_final),
            ..Default::default()
        },
        splitop: SplitOpConfig {
            t_final,
            ..Default::default()
        },
        long_run: true,
        ..Default::default()
    }
}

/// Desk-scale settings: small bath grids, Cholesky solves, coarser CCS step.
fn desk(name: &str, f: usize, m: usize, t_final: f64) -> RunConfig {
    let mut c = thermalization(name, f, m, t_final);
    c.engine = Engine::Both;
    c.long_run = false;
    c.integrator.dt = 0.02;
    c.integrator.record_stride = 5;
    c.integrator.solver = SolverKind::Tikhonov;
    c.integrator.reg_threshold = 1e-10;
    let (points, half_width) = if f >= 3 { (24, 6.0) } else { (32, 7.0) };
    c.splitop.bath_points = vec![points; f];
    c.splitop.bath_half_width = half_width;
    c.observables.density_stride = 0;
    c
}

pub fn presets() -> Vec<Preset> {
    let table1 = RunConfig {
        name: "table1".into(),
        engine: Engine::Eigen,
        output_dir: PathBuf::from("out/table1"),
        eigen: EigenConfig {
            check_table: true,
            ..Default::default()
        },
        ..Default::default()
    };
    let fig2 = RunConfig {
        name: "fig2".into(),
        engine: Engine::Both,
        output_dir: PathBuf::from("out/fig2"),
        sampler: SamplerConfig {
            multiplicity: 299,
            ..Default::default()
        },
        integrator: IntegratorConfig {
            t_final: 20.0,
            record_stride: 20,
            ..Default::default()
        },
        splitop: SplitOpConfig {
            t_final: 20.0,
            ..Default::default()
        },
        compare: CompareConfig {
            tolerance: 0.02,
            enforce: true,
        },
        ..Default::default()
    };
    let mut fig5 = thermalization("fig5", 0, 299, 300.0);
    fig5.sweep = Some(SweepConfig {
        f: vec![0, 2, 3, 4, 5],
        multiplicity: vec![299, 799, 2999, 5999, 5999],
    });
    let mut desk_sweep = desk("sweep-desk", 0, 299, 100.0);
    desk_sweep.sweep = Some(SweepConfig {
        f: vec![0, 2, 3],
        multiplicity: vec![299, 600, 800],
    });
    let mut smoke = thermalization("smoke-f5", 5, 40, 2.0);
    smoke.long_run = false;
    smoke.integrator.dt = 0.01;
    smoke.integrator.record_stride = 10;
    smoke.integrator.solver = SolverKind::Tikhonov;
    vec![
        Preset {
            name: "table1",
            description: "eigenvalues and overlaps of the bare double well (256 points on [-4, 4])",
            config: table1,
        },
        Preset {
            name: "fig2",
            description: "bare double well |c(t)|: CCS (M = 299) against split-operator, 0.02 band",
            config: fig2,
        },
        Preset {
            name: "fig3-f2",
            description: "c_S(t) for f = 2, M = 799, T = 100",
            config: thermalization("fig3-f2", 2, 799, 100.0),
        },
        Preset {
            name: "fig3-f3",
            description: "c_S(t) for f = 3, M = 2999, T = 100",
            config: thermalization("fig3-f3", 3, 2999, 100.0),
        },
        Preset {
            name: "fig4",
            description: "energy channels for f = 4, M = 5999, T = 300",
            config: thermalization("fig4", 4, 5999, 300.0),
        },
        Preset {
            name: "fig5",
            description: "long-time average double-well energy against f, T_tot = 300 (sweep)",
            config: fig5,
        },
        Preset {
            name: "desk-f2",
            description: "f = 2, M = 600, T = 100, CCS and split-operator",
            config: desk("desk-f2", 2, 600, 100.0),
        },
        Preset {
            name: "desk-f3",
            description: "f = 3, M = 800, T = 100, CCS and split-operator",
            config: desk("desk-f3", 3, 800, 100.0),
        },
        Preset {
            name: "sweep-desk",
            description: "long-time averages for f in {0, 2, 3} at desk-scale multiplicities (sweep)",
            config: desk_sweep,
        },
        Preset {
            name: "smoke-f5",
            description: "short f = 5 run at M = 40 (conservation smoke test)",
            config: smoke,
        },
    ]
}

pub fn preset(name: &str) -> Result<RunConfig> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .map(|p| p.config)
        .ok_or_else(|| Error::invalid("preset", format!("unknown preset `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_echo_round_trips() {
        for p in presets() {
            let text = p.config.to_toml().unwrap();
            let back = RunConfig::from_toml(&text).unwrap();
            assert_eq!(back, p.config, "{}", p.name);
        }
    }

    #[test]
    fn presets_validate() {
        for p in presets() {
            p.config.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn empty_config_is_rejected() {
        assert!(matches!(RunConfig::from_toml("  \n"), Err(Error::Invalid { .. })));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("[model]\nalpha = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn invalid_value_names_key() {
        let cfg = RunConfig::from_toml("[model]\na = -1.0\n").unwrap();
        match cfg.validate() {
            Err(Error::Invalid { key, .. }) => assert_eq!(key, "model.a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn splitop_rejects_large_baths() {
        let cfg = RunConfig::from_toml("engine = \"splitop\"\n[model]\nf = 4\nf_co = 14\n").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn both_requires_matching_records() {
        let mut cfg = preset("fig2").unwrap();
        cfg.splitop.record_stride = 7;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_points_pick_tabulated_cutoffs() {
        let cfg = preset("fig5").unwrap();
        let p = cfg.sweep_point(3).unwrap();
        assert_eq!(p.model.f, 4);
        assert_eq!(p.model.f_co, Some(14));
        assert_eq!(p.sampler.multiplicity, 5999);
        assert!(p.sweep.is_none());
    }
}
