//! Trains a policy, then reports win rates under both reward models, the
//! negative-flip rate, exact KL to the initial policy and a reward-KL frontier.

use lire::eval::{evaluate, greedy_answers, reward_kl_frontier};
use lire::experiment::{baseline_answers, generate_pools, train_with};
use lire::kl::{sequence_kl, KlEstimator};
use lire::policy::Query;
use lire::training::{Method, RewardProbe};
use lire::config::ExperimentConfig;

fn main() -> lire::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.train.pool_size = 4;
    cfg.train.iterate_steps = 20;
    cfg.train.probe = RewardProbe::None;

    let pools = generate_pools(&cfg)?;
    let queries: Vec<Query> = pools.iter().map(|p| p.query.clone()).collect();
    let (rm, rm_star) = cfg.reward_models()?;
    let init = cfg.initial_policy()?;
    let trained = train_with(&cfg, &pools, &Method::Lire, None)?.policy;

    let baseline = baseline_answers(&pools);
    let kl = sequence_kl(&trained, &init, &queries, KlEstimator::Exact)?.value;
    let report = evaluate(
        &greedy_answers(&trained, &queries)?,
        &baseline,
        &greedy_answers(&init, &queries)?,
        &rm,
        &rm_star,
        kl,
    )?;
    println!("mean reward      RM {:.4}   RM* {:.4}", report.mean_reward_rm, report.mean_reward_rm_star);
    println!("win rate (%)     RM {:.2}   RM* {:.2}   mean {:.2}", report.win_rate_rm, report.win_rate_rm_star, report.win_rate);
    println!("negative flips   {:.2}%", report.negative_flip_rate);
    println!("KL to init       {:.4}", report.kl);

    let mc = sequence_kl(&trained, &init, &queries, KlEstimator::MonteCarlo { n_samples: 64, seed: 3 })?;
    println!("KL Monte Carlo   {:.4} ± {:.4}", mc.value, mc.std_error);

    println!("\n{:>5} {:>8} {:>9} {:>10}", "T", "KL", "win %", "reward");
    for p in reward_kl_frontier(&trained, &init, &queries, &baseline, &rm, &cfg.eval.frontier_temperatures, KlEstimator::Exact, 1)? {
        println!("{:>5.2} {:>8.4} {:>9.2} {:>10.4}", p.temperature, p.kl, p.win_rate, p.mean_reward);
    }
    Ok(())
}
