//! The listwise objective on one candidate pool, next to its pairwise form and
//! the PG, DPO and SFT baselines.

use lire::objectives::{
    combined_loss, demeaned_rewards, dpo_loss, lire2_grad, lire_loss, pg_loss, sft_loss, ObjectiveConfig,
    RewardedSample,
};
use lire::policy::{ParamTensor, Policy, Query, Response, Source, Vocab};
use lire::pool::{CandidatePool, ScoredPool};

fn scored(query: &Query, items: &[(Vec<usize>, Source, f64)]) -> lire::Result<ScoredPool> {
    let candidates = items
        .iter()
        .map(|(tokens, source, r)| Response {
            tokens: tokens.clone(),
            source: *source,
            reward: Some(*r),
        })
        .collect();
    ScoredPool::from_pool(CandidatePool::new(query.clone(), candidates))
}

fn main() -> lire::Result<()> {
    let vocab = Vocab::new(3, 4)?;
    let logits = vec![0.5, -1.0, 0.2, 1.5, 0.0, -0.5, 0.3, 0.9, -0.2];
    let policy = Policy::from_params(vocab, ParamTensor::from_vec(1, 3, logits)?)?;
    let query = Query::new(0, 0);
    let cfg = ObjectiveConfig {
        temperature: 2.0,
        ..ObjectiveConfig::default()
    };

    let pool = scored(
        &query,
        &[
            (vec![0, 1], Source::HumanChosen, 1.0),
            (vec![1, 2], Source::ModelSample, -0.5),
            (vec![2], Source::HumanRejected, 2.0),
        ],
    )?;
    let report = lire_loss(&policy, &pool, &cfg)?;
    println!("normalized rewards  {:?}", pool.norm_rewards());
    println!("candidate P (T=2)   {:?}", report.per_sample_weights);
    println!("demeaned rewards    {:?}", demeaned_rewards(&report.per_sample_weights, pool.norm_rewards()));
    println!("LIRE loss           {:.6}", report.value);

    let with_sft = combined_loss(
        &policy,
        &pool,
        Some(&pool.responses()[0].tokens),
        &ObjectiveConfig {
            sft_weight: 0.5,
            ..cfg
        },
    )?;
    println!("LIRE + 0.5 SFT      {:.6}", with_sft.value);

    let pair = scored(&query, &[(vec![0, 1], Source::ModelSample, 1.0), (vec![2], Source::ModelSample, 0.0)])?;
    let listwise = lire_loss(&policy, &pair, &cfg)?.grad;
    let pairwise = lire2_grad(&policy, &pair, &cfg)?;
    let gap = listwise
        .as_slice()
        .iter()
        .zip(pairwise.as_slice())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("M=2 listwise vs pairwise gradient: max |diff| = {gap:.2e}");

    let samples: Vec<RewardedSample> = pool
        .responses()
        .iter()
        .zip(pool.raw_rewards())
        .map(|(r, &reward)| RewardedSample {
            query: &query,
            tokens: &r.tokens,
            reward,
        })
        .collect();
    println!("PG loss             {:.6}", pg_loss(&policy, &samples)?.value);
    let reference = Policy::uniform(vocab, 1);
    println!(
        "DPO loss            {:.6}",
        dpo_loss(&policy, Some(&reference), &query, &[2], &[1, 2], &cfg)?.value
    );
    println!("SFT loss            {:.6}", sft_loss(&policy, &[(&query, &[0, 1][..])])?.value);
    Ok(())
}
