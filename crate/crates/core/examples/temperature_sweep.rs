//! Trains one policy per smoothing temperature of the candidate distribution
//! and reports the reward each reaches.

use lire::config::ExperimentConfig;
use lire::experiment::{generate_pools, run_sweep};
use lire::training::RewardProbe;

fn main() -> lire::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.train.pool_size = 4;
    cfg.train.iterate_steps = 20;
    cfg.train.probe = RewardProbe::None;

    let pools = generate_pools(&cfg)?;
    println!("{:>6} {:>12} {:>9}", "T", "mean reward", "win %");
    for row in run_sweep(&cfg, &pools)? {
        println!("{:>6.1} {:>12.4} {:>9.2}", row.temperature, row.mean_reward, row.win_rate);
    }
    Ok(())
}
