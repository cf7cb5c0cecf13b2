//! `qrc`: run, validate and inspect capacity experiments.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qrc_core::experiment::{self, validate_document, ExperimentKind, Manifest};

/// Memory-capacity experiments on a simulated boson-sampling reservoir.
#[derive(Parser, Debug)]
#[command(name = "qrc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write CSV records plus a manifest.
    Run(Overrides),
    /// Check a config and list every defaulted field.
    Validate(Overrides),
    /// Print the resolved config recorded in a run directory.
    Manifest {
        /// Run directory holding manifest.toml.
        run_dir: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Overrides {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment kind, overriding the config.
    #[arg(long)]
    experiment: Option<String>,
    /// Experiment seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Root for output directories when neither --out nor the config names one.
    #[arg(long, env = "QRC_OUT", default_value = "runs")]
    out_root: PathBuf,
}

impl Overrides {
    /// The config document with flag overrides applied.
    fn document(&self) -> Result<String> {
        let mut table: toml::Table = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?
                .parse()
                .with_context(|| format!("parsing {}", path.display()))?,
            None => toml::Table::new(),
        };
        if let Some(e) = &self.experiment {
            let kind: ExperimentKind = e.parse()?;
            table.insert("experiment".into(), kind.name().into());
        }
        if let Some(s) = self.seed {
            let s = i64::try_from(s).context("--seed must be below 2^63")?;
            table.insert("seed".into(), s.into());
        }
        if let Some(o) = &self.out {
            table.insert("out".into(), o.display().to_string().into());
        }
        if let Some(t) = self.threads {
            table.insert("threads".into(), i64::try_from(t)?.into());
        }
        if !table.contains_key("experiment") {
            bail!("no experiment kind: pass --experiment or set `experiment` in the config");
        }
        Ok(toml::to_string(&table)?)
    }
}

fn run(o: &Overrides) -> Result<()> {
    let report = validate_document(&o.document()?)?;
    let cfg = report.config;
    let out = match &cfg.out {
        Some(dir) => PathBuf::from(dir),
        None => o.out_root.join(format!("{}-seed{}", cfg.experiment, cfg.seed)),
    };
    log::info!("running {} into {}", cfg.experiment, out.display());
    let summary = experiment::run(&cfg, &out)?;
    if let Some(e) = summary.eps_p_bits {
        println!("eps_p = {e:.3} bits");
    }
    if summary.bound_anomalies > 0 {
        log::warn!("{} capacity report(s) exceed their W budget beyond tolerance", summary.bound_anomalies);
    }
    println!("{}", summary.dir.display());
    Ok(())
}

fn manifest(dir: &Path) -> Result<()> {
    let m = Manifest::load(dir)?;
    print!("{}", m.config.to_toml());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(o) => run(&o),
        Command::Validate(o) => {
            print!("{}", validate_document(&o.document()?)?);
            Ok(())
        }
        Command::Manifest { run_dir } => manifest(&run_dir),
    }
}
