//! The three programmatic reward models and pool scoring.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lire::policy::{Policy, Query, Response, Source, Vocab};
use lire::pool::CandidatePool;
use lire::rewards::{score_pool, Predicate, RewardModel};

fn main() -> lire::Result<()> {
    let vocab = Vocab::new(4, 5)?;
    let query = Query::new(0, 0);

    let pattern = RewardModel::pattern_count(vocab, vec![vec![1, 2]], 0.1)?;
    println!("pattern [1 2], λ=0.1 on [1 2 1 2]: {}", pattern.score(&query, &[1, 2, 1, 2])?);

    let expert = Policy::random(vocab, 1, 2.0, &mut ChaCha8Rng::seed_from_u64(3));
    let likelihood = RewardModel::expert_likelihood(expert.clone());
    println!(
        "expert log-likelihood of [0 1 3]: {:.4} (= {:.4})",
        likelihood.score(&query, &[0, 1, 3])?,
        expert.seq_log_prob(&query, &[0, 1, 3])?
    );

    let even: Predicate = "even-count:0".parse()?;
    let predicate = RewardModel::predicate(vocab, even);
    println!(
        "even-count:0 on [0 0 1]: {}, on [0 1]: {}",
        predicate.score(&query, &[0, 0, 1])?,
        predicate.score(&query, &[0, 1])?
    );

    let pool = CandidatePool::new(
        query,
        vec![
            Response::new(vec![1, 2, 1, 2, 3], Source::HumanChosen),
            Response::new(vec![0, 0, 3], Source::HumanRejected),
            Response::sample(vec![1, 2, 3]),
        ],
    );
    let scored = score_pool(&pattern, &pool)?;
    println!("raw rewards {:?}", scored.raw_rewards());
    println!("normalized  {:?}", scored.norm_rewards());
    Ok(())
}

