use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ccs_core::config::{preset, presets, RunConfig, SweepConfig};
use ccs_core::runner::{run_and_write, sweep, SweepRow};
use ccs_core::Error;

/// Coupled coherent states dynamics of a double well in a finite harmonic bath.
#[derive(Parser)]
#[command(name = "ccs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        confirm_long_run: bool,
    },
    /// Run the `[sweep]` points of a configuration, one row per f.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Override the swept f values, e.g. `0,2,3`.
        #[arg(long, value_delimiter = ',')]
        f: Vec<usize>,
        /// Override the multiplicities (one per f value).
        #[arg(long, value_delimiter = ',')]
        multiplicity: Vec<usize>,
        /// Concurrent sweep points.
        #[arg(long, env = "CCS_WORKERS", default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        confirm_long_run: bool,
    },
    /// Built-in configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Parse and validate a configuration, then print it fully resolved.
    Validate {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset as TOML.
    Show { name: String },
}

#[derive(Args)]
struct Source {
    /// TOML configuration file.
    config: Option<PathBuf>,
    /// Start from a built-in preset instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => {
                return Err(Error::Invalid {
                    key: "<config>".into(),
                    reason: "give a configuration file or --preset".into(),
                })
            }
        };
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        "validation" | "unsupported" | "confirmation" | "dimension" => 2,
        "tolerance" => 3,
        _ => 1,
    }
}

fn fail(e: &Error, output_dir: Option<&Path>) -> ExitCode {
    let mut report = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    if let Error::Invalid { key, .. } = e {
        report["error"]["key"] = json!(key);
    }
    let text = serde_json::to_string_pretty(&report).unwrap_or_default();
    eprintln!("{text}");
    if let Some(dir) = output_dir {
        if dir.is_dir() {
            let _ = std::fs::write(dir.join("error.json"), format!("{text}\n"));
        }
    }
    ExitCode::from(exit_code(e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Presets { action: PresetAction::List } => {
            for p in presets() {
                let flag = if p.config.long_run { " [long run]" } else { "" };
                println!("{:<12} {}{flag}", p.name, p.description);
            }
            ExitCode::SUCCESS
        }
        Command::Presets { action: PresetAction::Show { name } } => {
            match preset(&name).and_then(|c| c.to_toml()) {
                Ok(t) => {
                    print!("{t}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e, None),
            }
        }
        Command::Validate { source } => {
            let cfg = match source.load() {
                Ok(c) => c,
                Err(e) => return fail(&e, None),
            };
            match cfg.validate().and_then(|_| cfg.to_toml()) {
                Ok(t) => {
                    print!("{t}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e, None),
            }
        }
        Command::Run { source, confirm_long_run } => {
            let cfg = match source.load() {
                Ok(c) => c,
                Err(e) => return fail(&e, None),
            };
            if cfg.long_run && !confirm_long_run {
                return fail(&Error::LongRunNotConfirmed(cfg.name.clone()), None);
            }
            match run_and_write(&cfg) {
                Ok(report) => {
                    if let Some(c) = &report.comparison {
                        print!("{}", c.report());
                    }
                    if let Some(run) = &report.ccs {
                        let s = &run.outcome.series;
                        println!(
                            "ccs: {} records, max norm drift {:.3e}, max energy drift {:.3e}",
                            s.len(),
                            s.max_norm_drift(),
                            s.max_energy_drift()
                        );
                    }
                    if let Some(run) = &report.eigen {
                        for row in run.table.iter().flatten() {
                            println!(
                                "{:<8} expected {:>8} computed {:.6} {}",
                                row.quantity,
                                row.expected,
                                row.computed,
                                if row.pass { "PASS" } else { "FAIL" }
                            );
                        }
                    }
                    println!("artifacts written to {}", cfg.output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e, Some(&cfg.output_dir)),
            }
        }
        Command::Sweep {
            source,
            f,
            multiplicity,
            workers,
            confirm_long_run,
        } => {
            let mut cfg = match source.load() {
                Ok(c) => c,
                Err(e) => return fail(&e, None),
            };
            if !f.is_empty() {
                cfg.sweep = Some(SweepConfig { f, multiplicity });
            } else if !multiplicity.is_empty() {
                if let Some(sw) = cfg.sweep.as_mut() {
                    sw.multiplicity = multiplicity;
                }
            }
            if cfg.long_run && !confirm_long_run {
                return fail(&Error::LongRunNotConfirmed(cfg.name.clone()), None);
            }
            match sweep(&cfg, workers) {
                Ok(rows) => {
                    println!("{}", SweepRow::HEADER);
                    for r in &rows {
                        println!("{}", r.csv());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e, Some(&cfg.output_dir)),
            }
        }
    }
}
