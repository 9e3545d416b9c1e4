//! Single-stage training, the Evolve/Iterate self-enhancement loop, pool
//! refresh and best-of-n sampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::{sample_response, DecodeConfig};
use crate::error::{LireError, Result};
use crate::eval::{expected_reward, greedy_answers, mean, score_answers};
use crate::math::derive_seed;
use crate::objectives::{
    candidate_distribution, combined_loss, dpo_loss, mean_reports, pg_loss, sft_loss, LossReport,
    ObjectiveConfig, RewardedSample,
};
use crate::optim::{apply_update, OptimizerConfig, OptimizerState};
use crate::policy::{Policy, Query, Response, Source, Token};
use crate::pool::{CandidatePool, ScoredPool};
use crate::rewards::{score_pool, RewardModel};

pub const DEFAULT_BATCH_SIZE: usize = 16;

/// Training objective applied to each pool.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Listwise loss plus the optional SFT term.
    Lire,
    /// Reward-weighted log-likelihood over every candidate.
    Pg,
    /// Pairwise loss on the preference pair against a frozen reference.
    Dpo { reference: Policy },
    /// Likelihood of the chosen candidate only.
    Sft,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Lire => "lire",
            Method::Pg => "pg",
            Method::Dpo { .. } => "dpo",
            Method::Sft => "sft",
        }
    }
}

/// Loss and gradient of `method` on one scored pool.
pub fn pool_loss(
    policy: &Policy,
    pool: &ScoredPool,
    method: &Method,
    cfg: &ObjectiveConfig,
) -> Result<LossReport> {
    let query = pool.query();
    let responses = pool.responses();
    match method {
        Method::Lire => {
            let chosen = &responses[pool.sft_target()].tokens;
            combined_loss(policy, pool, Some(chosen), cfg)
        }
        Method::Pg => {
            let batch: Vec<RewardedSample<'_>> = responses
                .iter()
                .zip(pool.raw_rewards())
                .map(|(r, &reward)| RewardedSample {
                    query,
                    tokens: &r.tokens,
                    reward,
                })
                .collect();
            pg_loss(policy, &batch)
        }
        Method::Dpo { reference } => match pool.preference_pair() {
            Some((w, l)) => dpo_loss(
                policy,
                Some(reference),
                query,
                &responses[w].tokens,
                &responses[l].tokens,
                cfg,
            ),
            None => Ok(LossReport::zero(policy)),
        },
        Method::Sft => {
            let target: &[Token] = &responses[pool.sft_target()].tokens;
            sft_loss(policy, &[(query, target)])
        }
    }
}

/// `Σ_j P_j R_j` with `P` the temperature-`T` candidate distribution and raw rewards.
pub fn pool_reward(policy: &Policy, pool: &ScoredPool, temperature: f64) -> Result<f64> {
    let log_probs = pool
        .responses()
        .iter()
        .map(|r| policy.seq_log_prob(pool.query(), &r.tokens))
        .collect::<Result<Vec<_>>>()?;
    let probs = candidate_distribution(&log_probs, temperature)?;
    Ok(probs.iter().zip(pool.raw_rewards()).map(|(p, r)| p * r).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// Mean pool loss, each evaluated just before its mini-batch update.
    pub mean_loss: f64,
    /// Mean of `Σ_j P_j R_j` over pools, at the same parameters as `mean_loss`.
    pub mean_pool_reward: f64,
    pub steps: usize,
}

/// One pass over `pools` in a seeded shuffled order with one optimizer step per
/// mini-batch. `batch_size = 0` means full batch.
pub fn train_epoch<R: Rng + ?Sized>(
    policy: &mut Policy,
    pools: &[ScoredPool],
    method: &Method,
    cfg: &ObjectiveConfig,
    batch_size: usize,
    opt: &mut OptimizerState,
    rng: &mut R,
) -> Result<EpochMetrics> {
    cfg.validate()?;
    if pools.is_empty() {
        return Err(LireError::Domain("training epoch over no pools".into()));
    }
    let mut order: Vec<usize> = (0..pools.len()).collect();
    order.shuffle(rng);
    let chunk = if batch_size == 0 { pools.len() } else { batch_size };

    let mut loss_sum = 0.0;
    let mut reward_sum = 0.0;
    let mut steps = 0;
    for batch in order.chunks(chunk) {
        let current: &Policy = policy;
        let per_pool = batch
            .par_iter()
            .map(|&i| {
                let report = pool_loss(current, &pools[i], method, cfg)?;
                let reward = pool_reward(current, &pools[i], cfg.temperature)?;
                Ok((report, reward))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut reports = Vec::with_capacity(per_pool.len());
        for (report, reward) in per_pool {
            loss_sum += report.value;
            reward_sum += reward;
            reports.push(report);
        }
        let batch_report = mean_reports(policy, reports)?;
        apply_update(policy, &batch_report.grad, opt)?;
        steps += 1;
    }
    let n = pools.len() as f64;
    Ok(EpochMetrics {
        mean_loss: loss_sum / n,
        mean_pool_reward: reward_sum / n,
        steps,
    })
}

/// Replaces model-sample entries in order with `fresh`, keeps human entries
/// untouched and clears every reward.
pub fn refresh_pool(pool: &CandidatePool, fresh: Vec<Vec<Token>>) -> Result<CandidatePool> {
    let slots = pool.model_sample_count();
    if fresh.len() != slots {
        return Err(LireError::Domain(format!(
            "query {}: {} fresh samples for {} model-sample slots",
            pool.query.id,
            fresh.len(),
            slots
        )));
    }
    if slots == 0 {
        return Ok(pool.clone());
    }
    let mut out = pool.clone();
    let mut fresh = fresh.into_iter();
    for c in out.candidates.iter_mut() {
        if c.source == Source::ModelSample {
            c.tokens = fresh.next().expect("count checked above");
        }
    }
    out.clear_rewards();
    Ok(out)
}

/// `count` temperature samples for `query`, from a dedicated stream of `seed`.
pub fn sample_many(
    policy: &Policy,
    query: &Query,
    count: usize,
    temperature: f64,
    seed: u64,
) -> Result<Vec<Vec<Token>>> {
    let cfg = DecodeConfig::sampling(temperature, seed, policy.vocab().max_len);
    let mut rng = cfg.rng();
    (0..count)
        .map(|_| Ok(sample_response(policy, query, &cfg, &mut rng)?.tokens))
        .collect()
}

/// Unscored pools of `m` model samples per query.
pub fn sample_pools(
    policy: &Policy,
    queries: &[Query],
    m: usize,
    temperature: f64,
    seed: u64,
) -> Result<Vec<CandidatePool>> {
    if m == 0 {
        return Err(LireError::Config("pool size must be positive".into()));
    }
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let tokens = sample_many(policy, q, m, temperature, derive_seed(seed, i as u64))?;
            Ok(CandidatePool::new(q.clone(), tokens.into_iter().map(Response::sample).collect()))
        })
        .collect()
}

/// How the trace measures the policy after each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardProbe {
    /// Exact expected reward by enumeration of the response space.
    #[default]
    Exact,
    /// Mean reward of greedy responses.
    Greedy,
    /// Only the pool reward from training.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainPlan {
    pub evolve_steps: usize,
    pub iterate_steps: usize,
    pub pool_size: usize,
    pub objective: ObjectiveConfig,
    /// Pools per optimizer step; 0 means full batch.
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub sample_temperature: f64,
    pub seed: u64,
    pub probe: RewardProbe,
}

impl Default for TrainPlan {
    fn default() -> Self {
        TrainPlan {
            evolve_steps: 1,
            iterate_steps: 3,
            pool_size: 2,
            objective: ObjectiveConfig::default(),
            batch_size: DEFAULT_BATCH_SIZE,
            optimizer: OptimizerConfig::default(),
            sample_temperature: 1.0,
            seed: 0,
            probe: RewardProbe::Exact,
        }
    }
}

const SAMPLE_STREAM: u64 = 0x5a4d_504c;
const EPOCH_STREAM: u64 = 0x4550_4f43;

impl TrainPlan {
    pub fn validate(&self) -> Result<()> {
        if self.evolve_steps == 0 || self.iterate_steps == 0 || self.pool_size == 0 {
            return Err(LireError::Config(format!(
                "evolve_steps, iterate_steps and pool_size must be positive (got {}, {}, {})",
                self.evolve_steps, self.iterate_steps, self.pool_size
            )));
        }
        if !(self.sample_temperature > 0.0) || !self.sample_temperature.is_finite() {
            return Err(LireError::Config(format!(
                "sample_temperature must be positive, got {}",
                self.sample_temperature
            )));
        }
        self.objective.validate()?;
        self.optimizer.validate()
    }

    /// Shuffle seed of iterate step `i` within evolve step `e` (both 1-based).
    pub fn epoch_seed(&self, e: usize, i: usize) -> u64 {
        derive_seed(derive_seed(self.seed, EPOCH_STREAM), ((e as u64) << 32) | i as u64)
    }

    /// Sampling seed for the pools of evolve step `e`.
    pub fn sample_seed(&self, e: usize) -> u64 {
        derive_seed(derive_seed(self.seed, SAMPLE_STREAM), e as u64)
    }
}

/// Metrics after one (evolve, iterate) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCell {
    pub evolve: usize,
    pub iterate: usize,
    pub mean_loss: f64,
    pub mean_pool_reward: f64,
    /// Reward of the policy after the cell, per the plan's probe.
    pub policy_reward: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SelfEnhanceOutput {
    pub policy: Policy,
    pub trace: Vec<TraceCell>,
    pub final_pools: Vec<ScoredPool>,
}

fn probe_reward(policy: &Policy, queries: &[Query], rm: &RewardModel, probe: RewardProbe) -> Result<Option<f64>> {
    match probe {
        RewardProbe::Exact => expected_reward(policy, queries, rm).map(Some),
        RewardProbe::Greedy => Ok(Some(mean(&score_answers(rm, &greedy_answers(policy, queries)?)?))),
        RewardProbe::None => Ok(None),
    }
}

fn score_all(rm: &RewardModel, pools: &[CandidatePool]) -> Result<Vec<ScoredPool>> {
    pools.iter().map(|p| score_pool(rm, p)).collect()
}

/// Evolve/Iterate loop. Evolve step 1 trains on `pools` as given (scoring any
/// unscored pool); later steps refresh the model-sample entries from the
/// current policy and rescore. Adam moments restart at every evolve step.
/// `on_cell` sees every cell in order together with the policy after it.
pub fn self_enhance<F>(
    initial: &Policy,
    pools: &[CandidatePool],
    rm: &RewardModel,
    method: &Method,
    plan: &TrainPlan,
    mut on_cell: F,
) -> Result<SelfEnhanceOutput>
where
    F: FnMut(&TraceCell, &Policy) -> Result<()>,
{
    plan.validate()?;
    if pools.is_empty() {
        return Err(LireError::Domain("self-enhancement over no pools".into()));
    }
    let queries: Vec<Query> = pools.iter().map(|p| p.query.clone()).collect();
    let mut policy = initial.clone();
    let mut current: Vec<CandidatePool> = pools.to_vec();
    let mut scored = Vec::new();
    let mut trace = Vec::with_capacity(plan.evolve_steps * plan.iterate_steps);

    for e in 1..=plan.evolve_steps {
        if e > 1 {
            let seed = plan.sample_seed(e);
            current = current
                .iter()
                .enumerate()
                .map(|(k, pool)| {
                    let fresh = sample_many(
                        &policy,
                        &pool.query,
                        pool.model_sample_count(),
                        plan.sample_temperature,
                        derive_seed(seed, k as u64),
                    )?;
                    refresh_pool(pool, fresh)
                })
                .collect::<Result<_>>()?;
        }
        scored = score_all(rm, &current)?;
        let mut opt = OptimizerState::for_policy(plan.optimizer, &policy)?;
        for i in 1..=plan.iterate_steps {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.epoch_seed(e, i));
            let m = train_epoch(
                &mut policy,
                &scored,
                method,
                &plan.objective,
                plan.batch_size,
                &mut opt,
                &mut rng,
            )?;
            let cell = TraceCell {
                evolve: e,
                iterate: i,
                mean_loss: m.mean_loss,
                mean_pool_reward: m.mean_pool_reward,
                policy_reward: probe_reward(&policy, &queries, rm, plan.probe)?,
            };
            on_cell(&cell, &policy)?;
            trace.push(cell);
        }
    }
    Ok(SelfEnhanceOutput {
        policy,
        trace,
        final_pools: scored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestOfN {
    pub response: Response,
    pub index: usize,
    /// Every drawn sample with its raw reward, in draw order.
    pub log: Vec<(Vec<Token>, f64)>,
}

/// Draws `n` temperature samples and keeps the highest raw reward, ties to the
/// lowest sample index.
pub fn best_of_n<R: Rng + ?Sized>(
    policy: &Policy,
    query: &Query,
    n: usize,
    rm: &RewardModel,
    temperature: f64,
    rng: &mut R,
) -> Result<BestOfN> {
    if n == 0 {
        return Err(LireError::Domain("best-of-n needs n >= 1".into()));
    }
    let cfg = DecodeConfig::sampling(temperature, 0, policy.vocab().max_len);
    let mut log = Vec::with_capacity(n);
    let mut best = 0;
    for k in 0..n {
        let tokens = sample_response(policy, query, &cfg, rng)?.tokens;
        let r = rm.score(query, &tokens)?;
        if r > log.get(best).map_or(f64::NEG_INFINITY, |b: &(Vec<Token>, f64)| b.1) {
            best = k;
        }
        log.push((tokens, r));
    }
    let (tokens, reward) = log[best].clone();
    Ok(BestOfN {
        response: Response {
            tokens,
            source: Source::ModelSample,
            reward: Some(reward),
        },
        index: best,
        log,
    })
}
