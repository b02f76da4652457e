//! `adaptrain`: train, evaluate and serve the strategy controller.
//!
//! Exit status is 0 on success, 2 for usage errors and 1 for anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use adaptrain_core::bridge;
use adaptrain_core::commands::{self, seed_list, LONGTAIL_PRESETS};
use adaptrain_core::coordinator::AblationMask;
use adaptrain_core::qlearn::PolicyKind;
use adaptrain_core::{Error, Result, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adaptrain", version, about = "Online controller for augmentation, optimizer, LR schedule and loss choices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that builds a run configuration.
#[derive(Args, Clone, Debug, Default)]
struct RunFlags {
    /// Run configuration file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed.
    #[arg(long, env = "MATAGENT_SEED")]
    seed: Option<u64>,
    /// Surrogate preset name or path to a spec file.
    #[arg(long)]
    env: Option<String>,
    /// Cap on decision steps per episode.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Ablation mask, e.g. `no-aug` or `no-aug,no-loss`.
    #[arg(long)]
    mask: Option<String>,
    #[arg(long)]
    w_map: Option<f64>,
    #[arg(long)]
    w_stab: Option<f64>,
    #[arg(long)]
    w_conv: Option<f64>,
    #[arg(long)]
    w_pen: Option<f64>,
    /// Disable the curiosity bonus.
    #[arg(long)]
    no_intrinsic: bool,
    /// eps_greedy_dqn, ucb1 or thompson.
    #[arg(long)]
    policy: Option<String>,
    /// Append a greedy evaluation episode.
    #[arg(long)]
    evaluate: bool,
}

impl RunFlags {
    fn build(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(env) = &self.env {
            if env.ends_with(".json") || Path::new(env).is_file() {
                cfg.env.spec_path = Some(PathBuf::from(env));
            } else {
                cfg.env.preset = env.clone();
                cfg.env.spec_path = None;
            }
        }
        if self.steps.is_some() {
            cfg.steps = self.steps;
        }
        if let Some(e) = self.episodes {
            cfg.episodes = e;
        }
        if let Some(m) = &self.mask {
            cfg.mask = AblationMask::parse(m)?;
        }
        let w = &mut cfg.reward.weights;
        for (flag, slot) in [
            (self.w_map, &mut w.w_map),
            (self.w_stab, &mut w.w_stab),
            (self.w_conv, &mut w.w_conv),
            (self.w_pen, &mut w.w_pen),
        ] {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        if self.no_intrinsic {
            cfg.curiosity.enabled = false;
        }
        if let Some(p) = &self.policy {
            cfg.agent.policy = PolicyKind::parse(p)?;
        }
        if self.evaluate {
            cfg.evaluate = true;
        }
        cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
        cfg.env.load_spec().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Clone, Debug)]
struct Batch {
    /// Number of seeds, counted up from the base seed.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// Worker threads (all cores when absent).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the controller on the surrogate and write its logs.
    Train {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Vary one reward weight over a grid.
    Sweep {
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        batch: Batch,
        /// w_map, w_stab, w_conv or w_pen.
        #[arg(long)]
        param: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// mAP counted as converged.
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
    },
    /// Compare epsilon-greedy DQN, UCB1 and Thompson sampling.
    ComparePolicies {
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        batch: Batch,
        #[arg(long, default_value_t = 100)]
        bandit_seeds: usize,
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[arg(long, default_value = "runs/policies")]
        out: PathBuf,
    },
    /// Head/mid/tail F1 against a static BCE baseline on long-tail presets.
    Longtail {
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        batch: Batch,
        /// Comma-separated presets.
        #[arg(long, value_delimiter = ',')]
        presets: Vec<String>,
        #[arg(long, default_value = "runs/longtail")]
        out: PathBuf,
    },
    /// Freeze agents or disable coordination.
    Ablate {
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        batch: Batch,
        /// Comma-separated variants (mask names or `no-coordination`).
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "full,no-aug,no-opt,no-lrs,no-loss,no-all,no-coordination"
        )]
        variants: Vec<String>,
        #[arg(long, default_value = "runs/ablate")]
        out: PathBuf,
    },
    /// Let an external trainer drive one episode over line-delimited JSON.
    Serve {
        #[command(flatten)]
        run: RunFlags,
        /// TCP address to accept one connection on; stdin/stdout when absent.
        #[arg(long)]
        listen: Option<String>,
        /// Seconds to wait for each peer message.
        #[arg(long, default_value_t = bridge::DEFAULT_TIMEOUT.as_secs())]
        timeout: u64,
    },
    /// Rebuild selection reports from a run directory.
    Report {
        /// Directory written by `train`.
        #[arg(long)]
        run: PathBuf,
        /// Where to write the reports; the run directory when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { run, out } => {
            let cfg = run.build()?;
            let r = commands::cmd_train(&cfg, &out)?;
            println!(
                "{} steps; final mAP {:.4}, rare F1 {:.4}; logs in {}",
                r.steps,
                r.final_metrics.map_val,
                r.final_metrics.rare_f1,
                out.display()
            );
        }
        Command::Sweep {
            run,
            batch,
            param,
            values,
            threshold,
            out,
        } => {
            let cfg = run.build()?;
            let rows = commands::cmd_sweep(&cfg, &param, &values, &seed_list(cfg.seed, batch.seeds), threshold, batch.workers, &out)?;
            print!("{}", commands::sweep_csv(&param, &rows));
        }
        Command::ComparePolicies {
            run,
            batch,
            bandit_seeds,
            threshold,
            out,
        } => {
            let cfg = run.build()?;
            let rows = commands::cmd_compare_policies(
                &cfg,
                &seed_list(cfg.seed, bandit_seeds),
                &seed_list(cfg.seed, batch.seeds),
                threshold,
                batch.workers,
                &out,
            )?;
            print!("{}", commands::policies_csv(&rows));
        }
        Command::Longtail { run, batch, presets, out } => {
            let cfg = run.build()?;
            let presets = if presets.is_empty() {
                LONGTAIL_PRESETS.iter().map(|s| s.to_string()).collect()
            } else {
                presets
            };
            let rows = commands::cmd_longtail(&cfg, &presets, &seed_list(cfg.seed, batch.seeds), batch.workers, &out)?;
            print!("{}", commands::longtail_csv(&rows));
        }
        Command::Ablate { run, batch, variants, out } => {
            let cfg = run.build()?;
            let rows = commands::cmd_ablate(&cfg, &variants, &seed_list(cfg.seed, batch.seeds), batch.workers, &out)?;
            print!("{}", commands::ablation_csv(&rows));
        }
        Command::Serve { run, listen, timeout } => {
            let cfg = run.build()?;
            let catalog = cfg.load_catalog()?;
            let timeout = Duration::from_secs(timeout);
            let outcome = match listen {
                Some(addr) => bridge::serve_tcp(&addr, &cfg, &catalog, timeout)?,
                None => bridge::serve_stdio(&cfg, &catalog, timeout)?,
            };
            if let Some((code, detail)) = outcome.error {
                return Err(Error::protocol(code, detail));
            }
            if let Some(r) = outcome.result {
                log::info!("session finished after {} steps, final mAP {:.4}", r.steps, r.final_metrics.map_val);
            }
        }
        Command::Report { run, out } => {
            let catalog = adaptrain_core::build_default_catalog();
            let out = out.unwrap_or_else(|| run.clone());
            let table = commands::cmd_report(&run, &catalog, &out)?;
            print!("{}", adaptrain_core::coordinator::report::frequency_csv(&table));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adaptrain: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
