//! Reward-model-judged metrics: mean reward, win rate, negative flips,
//! reward–KL frontier and temperature sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decode::{greedy_response, sample_response, DecodeConfig};
use crate::enumerate::response_support;
use crate::error::{LireError, Result};
use crate::kl::{sequence_kl, KlEstimator};
use crate::math::derive_seed;
use crate::policy::{Policy, Query, Token};
use crate::rewards::RewardModel;

/// One response per query, used for paired comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub query: Query,
    pub tokens: Vec<Token>,
}

fn check_paired(a: &[Answer], b: &[Answer]) -> Result<()> {
    if a.len() != b.len() {
        return Err(LireError::Domain(format!(
            "unpaired answer sets: {} vs {} queries",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(LireError::Domain("no queries to compare".into()));
    }
    if let Some((x, y)) = a.iter().zip(b).find(|(x, y)| x.query.id != y.query.id) {
        return Err(LireError::Domain(format!(
            "unpaired query: {} vs {}",
            x.query.id, y.query.id
        )));
    }
    Ok(())
}

pub fn score_answers(rm: &RewardModel, answers: &[Answer]) -> Result<Vec<f64>> {
    answers.iter().map(|a| rm.score(&a.query, &a.tokens)).collect()
}

/// Percentage of wins with ties counted as half a win, as `50 + 50 (W - L) / n`
/// so that `win(a, b) + win(b, a) = 100` holds in floating point.
pub fn win_rate_from_rewards(policy: &[f64], baseline: &[f64]) -> Result<f64> {
    if policy.len() != baseline.len() || policy.is_empty() {
        return Err(LireError::Domain(format!(
            "win rate needs equal, non-empty reward lists ({} vs {})",
            policy.len(),
            baseline.len()
        )));
    }
    let margin: i64 = policy
        .iter()
        .zip(baseline)
        .map(|(p, b)| match p.partial_cmp(b) {
            Some(std::cmp::Ordering::Greater) => 1,
            Some(std::cmp::Ordering::Less) => -1,
            _ => 0,
        })
        .sum();
    Ok(50.0 + 50.0 * margin as f64 / policy.len() as f64)
}

pub fn win_rate(rm: &RewardModel, policy: &[Answer], baseline: &[Answer]) -> Result<f64> {
    check_paired(policy, baseline)?;
    win_rate_from_rewards(&score_answers(rm, policy)?, &score_answers(rm, baseline)?)
}

/// Percentage of queries whose reward dropped from `before` to `after`.
pub fn negative_flip_rate_from_rewards(before: &[f64], after: &[f64]) -> Result<f64> {
    if before.len() != after.len() || before.is_empty() {
        return Err(LireError::Domain("negative flip rate needs paired, non-empty lists".into()));
    }
    let drops = before.iter().zip(after).filter(|(b, a)| a < b).count();
    Ok(100.0 * drops as f64 / before.len() as f64)
}

pub fn negative_flip_rate(rm: &RewardModel, before: &[Answer], after: &[Answer]) -> Result<f64> {
    check_paired(before, after)?;
    negative_flip_rate_from_rewards(&score_answers(rm, before)?, &score_answers(rm, after)?)
}

/// Exact `mean_x Σ_y π(y|x) R(x, y)` over the decoder support.
pub fn expected_reward(policy: &Policy, queries: &[Query], rm: &RewardModel) -> Result<f64> {
    if queries.is_empty() {
        return Err(LireError::Domain("expected reward over no queries".into()));
    }
    let support = response_support(policy.vocab(), policy.vocab().max_len)?;
    let mut total = 0.0;
    for q in queries {
        for y in &support {
            let p = policy.seq_log_prob(q, y)?.exp();
            if p > 0.0 {
                total += p * rm.score(q, y)?;
            }
        }
    }
    Ok(total / queries.len() as f64)
}

pub fn greedy_answers(policy: &Policy, queries: &[Query]) -> Result<Vec<Answer>> {
    queries
        .iter()
        .map(|q| {
            Ok(Answer {
                query: q.clone(),
                tokens: greedy_response(policy, q)?.tokens,
            })
        })
        .collect()
}

/// One temperature-`t` sample per query, seeded per query index.
pub fn sampled_answers(policy: &Policy, queries: &[Query], temperature: f64, seed: u64) -> Result<Vec<Answer>> {
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let cfg = DecodeConfig::sampling(temperature, derive_seed(seed, i as u64), policy.vocab().max_len);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Ok(Answer {
                query: q.clone(),
                tokens: sample_response(policy, q, &cfg, &mut rng)?.tokens,
            })
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub query_id: u64,
    pub query_tag: usize,
    pub tokens: Vec<Token>,
    pub reward_rm: f64,
    pub reward_rm_star: f64,
    pub baseline_reward_rm: f64,
    pub before_reward_rm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_reward_rm: f64,
    pub mean_reward_rm_star: f64,
    pub win_rate_rm: f64,
    pub win_rate_rm_star: f64,
    /// Mean of the two per-RM win rates.
    pub win_rate: f64,
    pub negative_flip_rate: f64,
    pub kl: f64,
    pub rows: Vec<QueryRow>,
}

/// Scores `answers` against a baseline and a `before` set under both reward models.
pub fn evaluate(
    answers: &[Answer],
    baseline: &[Answer],
    before: &[Answer],
    rm: &RewardModel,
    rm_star: &RewardModel,
    kl: f64,
) -> Result<EvalReport> {
    check_paired(answers, baseline)?;
    check_paired(answers, before)?;
    let r = score_answers(rm, answers)?;
    let r_star = score_answers(rm_star, answers)?;
    let base = score_answers(rm, baseline)?;
    let base_star = score_answers(rm_star, baseline)?;
    let prior = score_answers(rm, before)?;
    let win_rm = win_rate_from_rewards(&r, &base)?;
    let win_star = win_rate_from_rewards(&r_star, &base_star)?;
    let rows = answers
        .iter()
        .enumerate()
        .map(|(i, a)| QueryRow {
            query_id: a.query.id,
            query_tag: a.query.tag,
            tokens: a.tokens.clone(),
            reward_rm: r[i],
            reward_rm_star: r_star[i],
            baseline_reward_rm: base[i],
            before_reward_rm: prior[i],
        })
        .collect();
    Ok(EvalReport {
        mean_reward_rm: mean(&r),
        mean_reward_rm_star: mean(&r_star),
        win_rate_rm: win_rm,
        win_rate_rm_star: win_star,
        win_rate: 0.5 * (win_rm + win_star),
        negative_flip_rate: negative_flip_rate_from_rewards(&prior, &r)?,
        kl,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub temperature: f64,
    pub kl: f64,
    pub win_rate: f64,
    pub mean_reward: f64,
}

/// One (KL, win rate) point per sampling temperature. KL is that of the
/// tempered sampling distribution from `reference`.
#[allow(clippy::too_many_arguments)]
pub fn reward_kl_frontier(
    policy: &Policy,
    reference: &Policy,
    queries: &[Query],
    baseline: &[Answer],
    rm: &RewardModel,
    temperatures: &[f64],
    estimator: KlEstimator,
    seed: u64,
) -> Result<Vec<FrontierPoint>> {
    if let Some(t) = temperatures.iter().find(|t| !(**t > 0.0)) {
        return Err(LireError::Config(format!("frontier temperature {t} must be positive")));
    }
    let base = score_answers(rm, baseline)?;
    temperatures
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let answers = sampled_answers(policy, queries, t, derive_seed(seed, k as u64))?;
            check_paired(&answers, baseline)?;
            let rewards = score_answers(rm, &answers)?;
            let kl = sequence_kl(&policy.with_temperature(t), reference, queries, estimator)?.value;
            Ok(FrontierPoint {
                temperature: t,
                kl,
                win_rate: win_rate_from_rewards(&rewards, &base)?,
                mean_reward: mean(&rewards),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub temperature: f64,
    pub mean_reward: f64,
    pub win_rate: f64,
}

/// Runs `train_and_score` once per objective temperature.
pub fn temperature_sweep<F>(temperatures: &[f64], mut train_and_score: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    temperatures
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(LireError::Config(format!("sweep temperature {t} must be positive")));
            }
            let (mean_reward, win_rate) = train_and_score(t)?;
            Ok(SweepRow {
                temperature: t,
                mean_reward,
                win_rate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Vocab;

    fn answers(tokens: &[&[Token]]) -> Vec<Answer> {
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| Answer {
                query: Query::new(i as u64, 0),
                tokens: t.to_vec(),
            })
            .collect()
    }

    fn counting_rm() -> RewardModel {
        RewardModel::pattern_count(Vocab::new(3, 4).unwrap(), vec![vec![0]], 0.0).unwrap()
    }

    #[test]
    fn win_rate_examples() {
        let rm = counting_rm();
        let a = answers(&[&[0, 0], &[0], &[0, 2]]);
        assert_eq!(win_rate(&rm, &a, &a).unwrap(), 50.0);
        let worse = answers(&[&[1], &[], &[1, 2]]);
        assert_eq!(win_rate(&rm, &a, &worse).unwrap(), 100.0);
        // rewards (2 > 1), (1 < 2), (1 = 1)
        assert_eq!(win_rate_from_rewards(&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.0]).unwrap(), 50.0);
    }

    #[test]
    fn unpaired_sets_are_rejected() {
        let rm = counting_rm();
        let a = answers(&[&[0], &[1]]);
        let mut b = answers(&[&[0], &[1]]);
        b[1].query.id = 7;
        assert!(matches!(win_rate(&rm, &a, &b), Err(LireError::Domain(_))));
        assert!(win_rate(&rm, &a, &a[..1]).is_err());
        assert!(negative_flip_rate(&rm, &a, &b).is_err());
    }

    #[test]
    fn negative_flip_examples() {
        let rm = counting_rm();
        let a = answers(&[&[0, 0], &[0]]);
        assert_eq!(negative_flip_rate(&rm, &a, &a).unwrap(), 0.0);
        let worse = answers(&[&[0], &[1]]);
        assert_eq!(negative_flip_rate(&rm, &a, &worse).unwrap(), 100.0);
    }

    #[test]
    fn expected_reward_of_uniform_policy_on_single_step_space() {
        // V=2 (one content token), max_len=1: support {[EOS], [0]}, each 1/2.
        let v = Vocab::new(2, 1).unwrap();
        let rm = RewardModel::pattern_count(v, vec![vec![0]], 0.0).unwrap();
        let r = expected_reward(&Policy::uniform(v, 1), &[Query::new(0, 0)], &rm).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sweep_rejects_non_positive_temperatures() {
        assert!(temperature_sweep(&[1.0, 0.0], |_| Ok((0.0, 0.0))).is_err());
        assert_eq!(temperature_sweep(&[1.0, 2.0], |t| Ok((t, 50.0))).unwrap().len(), 2);
    }

    #[test]
    fn frontier_kl_is_a_divergence_of_the_sampling_distribution() {
        use rand::SeedableRng;
        let v = Vocab::new(3, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let policy = Policy::random(v, 1, 1.5, &mut rng);
        let reference = Policy::random(v, 1, 1.5, &mut rng);
        let queries: Vec<Query> = (0..4).map(|i| Query::new(i, 0)).collect();
        let baseline = greedy_answers(&reference, &queries).unwrap();
        let rm = RewardModel::pattern_count(v, vec![vec![0]], 0.0).unwrap();
        let temps = [0.25, 0.5, 1.0, 2.0];
        let points = reward_kl_frontier(&policy, &reference, &queries, &baseline, &rm, &temps, KlEstimator::Exact, 0)
            .unwrap();
        assert_eq!(points.len(), temps.len());
        assert!(points.iter().all(|p| p.kl >= 0.0));
        let plain = sequence_kl(&policy, &reference, &queries, KlEstimator::Exact).unwrap().value;
        assert_eq!(points[2].kl, sequence_kl(&policy.with_temperature(1.0), &reference, &queries, KlEstimator::Exact).unwrap().value);
        assert!((points[2].kl - plain).abs() < 1e-12);
        let same = reward_kl_frontier(&reference, &reference, &queries, &baseline, &rm, &[1.0], KlEstimator::Exact, 0)
            .unwrap();
        assert_eq!(same[0].kl, 0.0);
    }
}
