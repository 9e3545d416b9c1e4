//! Evolve/Iterate training on a count-of-pattern task. Each Evolve step
//! resamples the model candidates from the current policy; the trace shows the
//! exact expected reward after every Iterate step.

use lire::config::{ExperimentConfig, RewardSpec, VocabSpec};
use lire::experiment::{generate_pools, train_with};
use lire::optim::OptimizerConfig;
use lire::training::{Method, RewardProbe};

fn main() -> lire::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.vocab = VocabSpec { size: 4, max_len: 4 };
    cfg.rm = RewardSpec::PatternCount {
        targets: vec![vec![0, 1], vec![2]],
        length_penalty: 0.0,
    };
    cfg.data.anchors = false;
    cfg.data.queries = 64;
    cfg.train.pool_size = 4;
    cfg.train.evolve_steps = 3;
    cfg.train.iterate_steps = 3;
    cfg.train.probe = RewardProbe::Exact;
    cfg.train.optimizer = OptimizerConfig::adam(0.05);

    let pools = generate_pools(&cfg)?;
    let out = train_with(&cfg, &pools, &Method::Lire, None)?;
    println!("{:>6} {:>7} {:>10} {:>10} {:>10}", "evolve", "iterate", "loss", "pool R", "E[R]");
    for cell in &out.trace {
        println!(
            "{:>6} {:>7} {:>10.4} {:>10.4} {:>10.4}",
            cell.evolve,
            cell.iterate,
            cell.mean_loss,
            cell.mean_pool_reward,
            cell.policy_reward.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
