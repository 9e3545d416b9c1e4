//! Trains LIRE, PG, DPO and SFT on the same pools and compares them with
//! best-of-n sampling. Pass a config path to override `configs/compare.toml`.

use std::path::PathBuf;

use lire::config::ExperimentConfig;
use lire::experiment::{generate_pools, run_compare};

fn main() -> lire::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/compare.toml"));
    let cfg = ExperimentConfig::load(&path)?;
    let pools = generate_pools(&cfg)?;
    let rows = run_compare(&cfg, &pools)?;

    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!(
        "{:<10} {:>9} {:>9} {:>9} {:>8} {:>8} {:>8}",
        "method", "R", "R*", "E[R]", "win %", "flip %", "KL"
    );
    for r in &rows {
        println!(
            "{:<10} {:>9.4} {:>9.4} {:>9} {:>8.2} {:>8.2} {:>8}",
            r.method,
            r.mean_reward_rm,
            r.mean_reward_rm_star,
            opt(r.expected_reward_rm),
            r.win_rate,
            r.negative_flip_rate,
            opt(r.kl)
        );
    }
    Ok(())
}
