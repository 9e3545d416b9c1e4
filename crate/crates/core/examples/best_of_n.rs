//! Best-of-n sampling with its audit log, and how the mean reward of the pick
//! grows with n.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lire::config::ExperimentConfig;
use lire::eval::mean;
use lire::policy::Query;
use lire::training::best_of_n;

fn main() -> lire::Result<()> {
    let cfg = ExperimentConfig::default();
    let policy = cfg.initial_policy()?;
    let (rm, _) = cfg.reward_models()?;
    let query = Query::new(0, 0);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pick = best_of_n(&policy, &query, 4, &rm, 1.0, &mut rng)?;
    for (i, (tokens, reward)) in pick.log.iter().enumerate() {
        let mark = if i == pick.index { "*" } else { " " };
        println!("{mark} {i}  {reward:>9.4}  {tokens:?}");
    }

    for n in [1, 2, 4, 8, 16] {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rewards = (0..200)
            .map(|id| {
                let q = Query::new(id, (id % 2) as usize);
                let pick = best_of_n(&policy, &q, n, &rm, 1.0, &mut rng)?;
                Ok(pick.log[pick.index].1)
            })
            .collect::<lire::Result<Vec<f64>>>()?;
        println!("n = {n:>2}: mean reward of the pick {:.4}", mean(&rewards));
    }
    Ok(())
}
