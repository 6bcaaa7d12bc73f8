//! Command-line front end: generate a corpus, run one protocol on it, and
//! merge the results of several runs into a report.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Preset, Protocol};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingData(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error(transparent)]
    Core(confbin::Error),
}

impl From<confbin::Error> for CliError {
    fn from(e: confbin::Error) -> Self {
        match e {
            confbin::Error::Config { .. } => CliError::Config(e.to_string()),
            confbin::Error::Invariant { name, detail } => CliError::Invariant(format!("{name}: {detail}")),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingData(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::ManifestMismatch(_) => 5,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "confbin", version, about = "Confidence-binned self-training and active learning experiments")]
pub struct Cli {
    /// Worker threads for pool decoding (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a corpus, its splits and the annotator's labels.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run one protocol on a generated corpus.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        protocol: Option<Protocol>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Merge the profiles of several runs and compute summary statistics.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Print the default configuration as TOML.
    PrintDefaultConfig {
        #[arg(long, value_enum, default_value = "default")]
        preset: Preset,
    },
}

fn load_config(path: Option<&Path>, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed_override {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

/// Executes a parsed command line and returns what it printed.
pub fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Gen {
            config,
            out,
            seed_override,
        } => {
            let cfg = load_config(config.as_deref(), seed_override)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            commands::cmd_gen(&cfg, &out)?;
            Ok(format!("corpus written to {}\n", out.display()))
        }
        Command::Run {
            config,
            data,
            out,
            protocol,
            seed_override,
        } => {
            let cfg = load_config(config.as_deref(), seed_override)?;
            let protocol = protocol.unwrap_or(cfg.protocol);
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir).join(protocol.to_string()));
            let manifest = commands::cmd_run(&cfg, protocol, &data, &out)?;
            let mut text = String::new();
            for s in &manifest.stages {
                text.push_str(&format!(
                    "{:<10} {:<10} fraction {:.3}  wer {:.3}\n",
                    s.protocol, s.stage_label, s.train_fraction, s.wer
                ));
            }
            Ok(text)
        }
        Command::Report { out, runs } => {
            let dirs: Vec<&Path> = runs.iter().map(PathBuf::as_path).collect();
            let summary = commands::cmd_report(&dirs, &out)?;
            let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            let mut text = format!(
                "seed wer      {}\ntopline wer   {}\nbest ssl wer  {}\ngap recovery  {}\n",
                show(summary.seed_wer),
                show(summary.topline_wer),
                show(summary.best_ssl_wer),
                show(summary.gap_recovery)
            );
            if let Some(m) = summary.budgets_match {
                text.push_str(&format!("budgets match {m}\n"));
            }
            Ok(text)
        }
        Command::PrintDefaultConfig { preset } => Ok(ExperimentConfig::preset(preset).to_toml()),
    }
}
