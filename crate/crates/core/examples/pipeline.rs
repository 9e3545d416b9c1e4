//! The file-based workflow behind the `lire` binary: generate pools, rescore
//! them, train, evaluate and read the artifacts back.

use lire::config::ExperimentConfig;
use lire::experiment::{cmd_eval, cmd_gen_data, cmd_score, cmd_train, TRACE_SCHEMA};
use lire::io::{read_csv, read_policy, read_pools};
use lire::training::TraceCell;

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join(format!("lire-pipeline-{}", std::process::id()));
    let mut cfg = ExperimentConfig::default();
    cfg.data.queries = 32;
    cfg.train.pool_size = 3;
    cfg.train.evolve_steps = 2;

    let raw = dir.join("pools.jsonl");
    cmd_gen_data(&cfg, &raw)?;
    let scored = dir.join("scored.jsonl");
    cmd_score(&cfg, &raw, &scored)?;
    let first = std::fs::read_to_string(&scored)?.lines().next().unwrap_or_default().to_string();
    println!("first pool record:\n{first}\n");

    let outcome = cmd_train(&cfg, &scored, &dir)?;
    let report = cmd_eval(&cfg, &outcome.policy_path, &scored, &dir)?;
    println!("win rate {:.2}%, negative flips {:.2}%, KL {:.4}", report.win_rate, report.negative_flip_rate, report.kl);

    let policy = read_policy(&outcome.policy_path)?;
    assert_eq!(policy, outcome.policy);
    let pools = read_pools(&scored, cfg.vocab()?)?;
    let trace: Vec<TraceCell> = read_csv(&outcome.trace_path, TRACE_SCHEMA)?;
    println!("reloaded {} pools, {} trace rows; artifacts in {}", pools.len(), trace.len(), dir.display());
    for entry in std::fs::read_dir(&dir)? {
        println!("  {}", entry?.file_name().to_string_lossy());
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
