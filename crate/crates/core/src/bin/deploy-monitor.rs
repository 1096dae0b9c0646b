use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use deploy_monitor::bounds::{certify_risk, CertifyInput};
use deploy_monitor::harness::{run_deployment, run_sweep, ExperimentConfig, Overrides, PolicyKind, SweepOptions};
use deploy_monitor::policy::{max_certified_delta, tolerance_constants};
use deploy_monitor::stream::{generate, write_csv, DriftSpec};
use deploy_monitor::{Error, Result};

#[derive(Parser)]
#[command(name = "deploy-monitor", version, about = "Label-efficient accuracy monitoring experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy at one hyperparameter value on one seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Required when the config lists more than one policy.
        #[arg(long)]
        policy: Option<String>,
        /// Sweep value to run; defaults to the first one in the config.
        #[arg(long)]
        value: Option<f64>,
    },
    /// Sweep every configured policy and write frontiers and the summary.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        policy: Option<String>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check the risk-tolerance conditions for a monitoring configuration.
    Certify {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        /// Batch size; derived from epsilon when absent.
        #[arg(long)]
        n: Option<usize>,
        /// Buffer multiplier; derived from epsilon and delta when absent.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        beta_cap: f64,
        /// Read epsilon from the first sweep value of this policy instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        policy: Option<String>,
    },
    /// Write a synthetic stream to CSV.
    Gen {
        /// TOML file with a [drift] table; other keys are ignored.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Deserialize)]
struct DriftOnly {
    drift: DriftSpec,
}

fn load(config: &Path, seed: Option<u64>, policy: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config)?;
    cfg.apply(&Overrides {
        seed,
        policy: policy.map(PolicyKind::parse).transpose()?,
    })?;
    Ok(cfg)
}

fn warn_outside_guarantee(epsilon: f64, delta: f64) {
    if delta > max_certified_delta(epsilon) {
        eprintln!(
            "warning: drift bound {delta} exceeds {:.6e}, the largest value with a proven risk guarantee at epsilon {epsilon}",
            max_certified_delta(epsilon)
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
            policy,
            value,
        } => {
            let cfg = load(&config, seed, policy.as_deref())?;
            if cfg.policies.len() > 1 {
                return Err(Error::Config("several policies configured; choose one with --policy".into()));
            }
            let spec = &cfg.policies[0];
            let value = value.unwrap_or(spec.sweep[0]);
            if matches!(spec.kind, PolicyKind::MldemonEst | PolicyKind::MldemonDec) {
                warn_outside_guarantee(value, spec.assumed_delta(cfg.drift.horizon));
            }
            let tr = run_deployment(&cfg, spec.kind, value, cfg.seeds[0])?;
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                tr.write_csv(dir.join(format!("trajectory_{}_s{}.csv", spec.kind, tr.seed)))?;
            }
            println!("{}", serde_json::to_string_pretty(&tr.reports)?);
            Ok(true)
        }
        Command::Sweep {
            config,
            seed,
            out_dir,
            policy,
            jobs,
        } => {
            let cfg = load(&config, seed, policy.as_deref())?;
            let result = run_sweep(
                &cfg,
                &SweepOptions {
                    out_dir: Some(out_dir.clone()),
                    jobs,
                },
            )?;
            println!("{}", serde_json::to_string_pretty(&result.summary.auc)?);
            eprintln!("wrote {}", out_dir.display());
            Ok(true)
        }
        Command::Certify {
            mut epsilon,
            delta,
            n,
            alpha,
            beta_cap,
            config,
            policy,
        } => {
            if let Some(path) = config {
                let cfg = load(&path, None, policy.as_deref())?;
                epsilon = cfg.policies[0].sweep[0];
            }
            let c = tolerance_constants(epsilon, delta)?;
            let mut input = CertifyInput::periodic(epsilon, delta, n.unwrap_or(c.n), alpha.unwrap_or(c.alpha));
            input.beta_cap = beta_cap;
            warn_outside_guarantee(epsilon, delta);
            let report = certify_risk(input);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.pass)
        }
        Command::Gen { config, seed, out_dir } => {
            let text = std::fs::read_to_string(&config)?;
            let spec = toml::from_str::<DriftOnly>(&text)?.drift.with_seed(seed);
            let events = generate(&spec)?;
            std::fs::create_dir_all(&out_dir)?;
            let path = out_dir.join(format!("stream_s{seed}.csv"));
            write_csv(&path, &events)?;
            eprintln!("wrote {} events to {}", events.len(), path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
