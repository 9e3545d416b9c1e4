//! Analytic gradients of every objective against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lire::gradcheck::{finite_difference_grad, relative_error, DEFAULT_STEP};
use lire::objectives::{dpo_loss, lire_loss, pg_loss, sft_loss, ObjectiveConfig, RewardedSample};
use lire::policy::{Policy, Query, Response, Vocab};
use lire::pool::{CandidatePool, ScoredPool};

fn main() -> lire::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vocab = Vocab::new(5, 4)?;
    let policy = Policy::random(vocab, 2, 1.0, &mut rng);
    let reference = Policy::random(vocab, 2, 1.0, &mut rng);
    let query = Query::new(0, 1);
    let responses = [vec![0, 1, 4], vec![2, 2, 3, 1], vec![4], vec![3, 0, 4]];
    let rewards: Vec<f64> = responses.iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
    let cfg = ObjectiveConfig::default();

    let candidates = responses
        .iter()
        .zip(&rewards)
        .map(|(y, &r)| Response {
            reward: Some(r),
            ..Response::sample(y.clone())
        })
        .collect();
    let pool = ScoredPool::from_pool(CandidatePool::new(query.clone(), candidates))?;
    let samples: Vec<RewardedSample> = responses
        .iter()
        .zip(&rewards)
        .map(|(y, &reward)| RewardedSample {
            query: &query,
            tokens: y,
            reward,
        })
        .collect();

    let checks: Vec<(&str, Box<dyn Fn(&Policy) -> lire::Result<lire::objectives::LossReport>>)> = vec![
        ("lire", Box::new(|p| lire_loss(p, &pool, &cfg))),
        ("pg", Box::new(|p| pg_loss(p, &samples))),
        ("dpo", Box::new(|p| dpo_loss(p, Some(&reference), &query, &responses[0], &responses[1], &cfg))),
        ("sft", Box::new(|p| sft_loss(p, &[(&query, &responses[0][..])]))),
    ];
    for (name, loss) in &checks {
        let analytic = loss(&policy)?.grad;
        let numeric = finite_difference_grad(|p| Ok(loss(p)?.value), &policy, DEFAULT_STEP)?;
        println!(
            "{name:<5} relative error {:.2e}",
            relative_error(analytic.as_slice(), numeric.as_slice())
        );
    }
    Ok(())
}
