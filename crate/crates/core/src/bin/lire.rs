use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use lire::config::ExperimentConfig;
use lire::experiment;

#[derive(Parser)]
#[command(name = "lire", version, about = "Listwise reward-weighted policy training on toy sequence tasks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config's out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs single-threaded.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate candidate pools into OUT/pools.jsonl.
    GenData,
    /// Score a pool file into OUT/scored.jsonl.
    Score {
        #[arg(long)]
        pools: PathBuf,
    },
    /// Train on a pool file; writes OUT/policy.json and OUT/trace.csv.
    Train {
        #[arg(long)]
        pools: PathBuf,
    },
    /// Evaluate a policy against the pool baselines.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        pools: PathBuf,
    },
    /// Train and evaluate every configured method on the same data.
    Compare {
        /// Pool file; generated from the config when omitted.
        #[arg(long)]
        pools: Option<PathBuf>,
    },
    /// Reward–KL frontier over the configured sampling temperatures.
    Frontier {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        pools: PathBuf,
    },
    /// Retrain once per objective temperature.
    SweepTemp {
        #[arg(long)]
        pools: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let mut cfg = match &cli.global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.global.out {
        cfg.out_dir = out;
    }
    let out = cfg.out_dir.clone();

    match cli.command {
        Command::GenData => {
            let path = out.join("pools.jsonl");
            let pools = experiment::cmd_gen_data(&cfg, &path)?;
            println!("wrote {} pools to {}", pools.len(), path.display());
        }
        Command::Score { pools } => {
            let path = out.join("scored.jsonl");
            let scored = experiment::cmd_score(&cfg, &pools, &path)?;
            println!("scored {} pools into {}", scored.len(), path.display());
        }
        Command::Train { pools } => {
            let result = experiment::cmd_train(&cfg, &pools, &out)?;
            if let Some(last) = result.trace.last() {
                println!(
                    "e={} i={} loss={:.6} pool_reward={:.6}",
                    last.evolve, last.iterate, last.mean_loss, last.mean_pool_reward
                );
            }
            println!("wrote {} and {}", result.policy_path.display(), result.trace_path.display());
        }
        Command::Eval { policy, pools } => {
            let r = experiment::cmd_eval(&cfg, &policy, &pools, &out)?;
            println!(
                "reward rm={:.6} rm*={:.6} win rm={:.1}% rm*={:.1}% avg={:.1}% flips={:.1}% kl={:.6}",
                r.mean_reward_rm,
                r.mean_reward_rm_star,
                r.win_rate_rm,
                r.win_rate_rm_star,
                r.win_rate,
                r.negative_flip_rate,
                r.kl
            );
        }
        Command::Compare { pools } => {
            for row in experiment::cmd_compare(&cfg, pools.as_deref(), &out)? {
                println!(
                    "{:<10} reward rm={:.6} win avg={:.1}%",
                    row.method, row.mean_reward_rm, row.win_rate
                );
            }
        }
        Command::Frontier { policy, pools } => {
            for p in experiment::cmd_frontier(&cfg, &policy, &pools, &out)? {
                println!("t={} kl={:.6} win={:.1}%", p.temperature, p.kl, p.win_rate);
            }
        }
        Command::SweepTemp { pools } => {
            for r in experiment::cmd_sweep_temp(&cfg, &pools, &out)? {
                println!("T={} reward={:.6} win={:.1}%", r.temperature, r.mean_reward, r.win_rate);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
