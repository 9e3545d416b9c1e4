//! Commands that tie data generation, training and evaluation to files on disk.
//! Every command is a pure function of its config and inputs.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{random_policy, ExperimentConfig, DATA_STREAM, EVAL_STREAM};
use crate::error::{LireError, Result};
use crate::eval::{
    evaluate, expected_reward, greedy_answers, reward_kl_frontier, score_answers, temperature_sweep,
    win_rate_from_rewards, Answer, EvalReport, FrontierPoint, SweepRow,
};
use crate::io::{read_policy, read_pools, write_csv, write_json, write_policy, write_pools};
use crate::kl::sequence_kl;
use crate::math::derive_seed;
use crate::policy::{Policy, Query, Response, Source};
use crate::pool::CandidatePool;
use crate::rewards::{score_pool, RewardModel};
use crate::training::{best_of_n, sample_many, self_enhance, Method, SelfEnhanceOutput, TraceCell};

pub const TRACE_SCHEMA: &str = "lire-trace/v1";
pub const EVAL_ROWS_SCHEMA: &str = "lire-eval-rows/v1";
pub const FRONTIER_SCHEMA: &str = "lire-frontier/v1";
pub const SWEEP_SCHEMA: &str = "lire-sweep/v1";
pub const COMPARE_SCHEMA: &str = "lire-compare/v1";

/// Queries with tags drawn uniformly, then one pool per query: optional
/// chosen/rejected anchors followed by samples from the initial policy.
pub fn generate_pools(cfg: &ExperimentConfig) -> Result<Vec<CandidatePool>> {
    cfg.validate()?;
    let vocab = cfg.vocab()?;
    let q_classes = cfg.policy.query_classes;
    let init = cfg.initial_policy()?;
    let expert = cfg.expert_policy()?;
    let uniform = random_policy(vocab, q_classes, 0.0, 0);
    let (rm, _) = cfg.reward_models()?;
    let data_seed = derive_seed(cfg.seed, DATA_STREAM);
    let mut tag_rng = ChaCha8Rng::seed_from_u64(data_seed);
    let m = cfg.train.pool_size;
    let n_anchor = if cfg.data.anchors { 2 } else { 0 };
    let temp = cfg.data.sample_temperature;

    (0..cfg.data.queries)
        .map(|i| {
            let tag = rand::Rng::gen_range(&mut tag_rng, 0..q_classes);
            let query = Query::new(i as u64, tag);
            let seed = derive_seed(data_seed, i as u64 + 1);
            let mut candidates = Vec::with_capacity(m);
            if cfg.data.anchors {
                let k = cfg.data.anchor_samples;
                let chosen = best_of_n(&expert, &query, k, &rm, temp, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0)))?;
                candidates.push(Response::new(chosen.response.tokens, Source::HumanChosen));
                let draws = sample_many(&uniform, &query, k, 1.0, derive_seed(seed, 1))?;
                let mut worst = 0;
                let mut worst_r = f64::INFINITY;
                for (j, y) in draws.iter().enumerate() {
                    let r = rm.score(&query, y)?;
                    if r < worst_r {
                        worst = j;
                        worst_r = r;
                    }
                }
                candidates.push(Response::new(draws[worst].clone(), Source::HumanRejected));
            }
            for y in sample_many(&init, &query, m - n_anchor, temp, derive_seed(seed, 2))? {
                candidates.push(Response::sample(y));
            }
            Ok(CandidatePool::new(query, candidates))
        })
        .collect()
}

pub fn cmd_gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<CandidatePool>> {
    let pools = generate_pools(cfg)?;
    write_pools(out, &pools)?;
    Ok(pools)
}

/// Scores every candidate of every pool with `rm`, overwriting old rewards.
pub fn score_pools(rm: &RewardModel, pools: &[CandidatePool]) -> Result<Vec<CandidatePool>> {
    pools.iter().map(|p| Ok(score_pool(rm, p)?.into_pool())).collect()
}

pub fn cmd_score(cfg: &ExperimentConfig, input: &Path, out: &Path) -> Result<Vec<CandidatePool>> {
    let (rm, _) = cfg.reward_models()?;
    let scored = score_pools(&rm, &read_pools(input, cfg.vocab()?)?)?;
    write_pools(out, &scored)?;
    Ok(scored)
}

/// Runs the configured plan with `method` from the initial policy.
pub fn train_with(
    cfg: &ExperimentConfig,
    pools: &[CandidatePool],
    method: &Method,
    checkpoint_dir: Option<&Path>,
) -> Result<SelfEnhanceOutput> {
    let init = cfg.initial_policy()?;
    let (rm, _) = cfg.reward_models()?;
    self_enhance(&init, pools, &rm, method, &cfg.train_plan(), |cell, policy| match checkpoint_dir {
        Some(dir) => write_policy(&dir.join(format!("policy_e{}_i{}.json", cell.evolve, cell.iterate)), policy),
        None => Ok(()),
    })
}

fn require_pools(pools: &[CandidatePool], path: &Path) -> Result<()> {
    if pools.is_empty() {
        return Err(LireError::Domain(format!("{} holds no pools", path.display())));
    }
    Ok(())
}

pub struct TrainOutcome {
    pub policy: Policy,
    pub trace: Vec<TraceCell>,
    pub policy_path: PathBuf,
    pub trace_path: PathBuf,
}

/// Trains with `train.method`, writing `policy.json`, `trace.csv` and optional
/// per-cell checkpoints under `out`.
pub fn cmd_train(cfg: &ExperimentConfig, pools_path: &Path, out: &Path) -> Result<TrainOutcome> {
    let pools = read_pools(pools_path, cfg.vocab()?)?;
    require_pools(&pools, pools_path)?;
    let init = cfg.initial_policy()?;
    let method = cfg.train.method.training_method(&init).ok_or_else(|| {
        LireError::Config("train.method best_of_n does not train; use compare".into())
    })?;
    let ckpt = out.join("checkpoints");
    let result = train_with(cfg, &pools, &method, cfg.train.checkpoints.then_some(ckpt.as_path()))?;
    let policy_path = out.join("policy.json");
    let trace_path = out.join("trace.csv");
    write_policy(&policy_path, &result.policy)?;
    write_csv(&trace_path, TRACE_SCHEMA, &result.trace)?;
    Ok(TrainOutcome {
        policy: result.policy,
        trace: result.trace,
        policy_path,
        trace_path,
    })
}

/// Human-chosen response of each pool, else its first candidate.
pub fn baseline_answers(pools: &[CandidatePool]) -> Vec<Answer> {
    pools
        .iter()
        .map(|p| {
            let pick = p
                .candidates
                .iter()
                .find(|c| c.source == Source::HumanChosen)
                .or_else(|| p.candidates.first());
            Answer {
                query: p.query.clone(),
                tokens: pick.map(|c| c.tokens.clone()).unwrap_or_default(),
            }
        })
        .collect()
}

fn queries_of(pools: &[CandidatePool]) -> Vec<Query> {
    pools.iter().map(|p| p.query.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct EvalRowCsv {
    query_id: u64,
    query_tag: usize,
    response: String,
    reward_rm: f64,
    reward_rm_star: f64,
    baseline_reward_rm: f64,
    before_reward_rm: f64,
}

fn tokens_field(tokens: &[usize]) -> String {
    tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

fn frontier(cfg: &ExperimentConfig, policy: &Policy, pools: &[CandidatePool]) -> Result<Vec<FrontierPoint>> {
    let (rm, _) = cfg.reward_models()?;
    reward_kl_frontier(
        policy,
        &cfg.initial_policy()?,
        &queries_of(pools),
        &baseline_answers(pools),
        &rm,
        &cfg.eval.frontier_temperatures,
        cfg.kl_estimator(),
        derive_seed(cfg.seed, EVAL_STREAM),
    )
}

/// Greedy answers of the policy judged against the pool baselines and the
/// initial policy's greedy answers, plus the reward–KL frontier.
pub fn cmd_eval(cfg: &ExperimentConfig, policy_path: &Path, pools_path: &Path, out: &Path) -> Result<EvalReport> {
    let policy = read_policy(policy_path)?;
    let pools = read_pools(pools_path, cfg.vocab()?)?;
    require_pools(&pools, pools_path)?;
    let init = cfg.initial_policy()?;
    if !policy.same_shape(&init) {
        return Err(LireError::Config(format!(
            "{} does not match the configured vocabulary and query classes",
            policy_path.display()
        )));
    }
    let (rm, rm_star) = cfg.reward_models()?;
    let queries = queries_of(&pools);
    let answers = greedy_answers(&policy, &queries)?;
    let before = greedy_answers(&init, &queries)?;
    let kl = sequence_kl(&policy, &init, &queries, cfg.kl_estimator())?.value;
    let report = evaluate(&answers, &baseline_answers(&pools), &before, &rm, &rm_star, kl)?;
    write_json(&out.join("eval.json"), &report)?;
    let rows: Vec<EvalRowCsv> = report
        .rows
        .iter()
        .map(|r| EvalRowCsv {
            query_id: r.query_id,
            query_tag: r.query_tag,
            response: tokens_field(&r.tokens),
            reward_rm: r.reward_rm,
            reward_rm_star: r.reward_rm_star,
            baseline_reward_rm: r.baseline_reward_rm,
            before_reward_rm: r.before_reward_rm,
        })
        .collect();
    write_csv(&out.join("eval_rows.csv"), EVAL_ROWS_SCHEMA, &rows)?;
    write_csv(&out.join("frontier.csv"), FRONTIER_SCHEMA, &frontier(cfg, &policy, &pools)?)?;
    Ok(report)
}

pub fn cmd_frontier(cfg: &ExperimentConfig, policy_path: &Path, pools_path: &Path, out: &Path) -> Result<Vec<FrontierPoint>> {
    let policy = read_policy(policy_path)?;
    let pools = read_pools(pools_path, cfg.vocab()?)?;
    require_pools(&pools, pools_path)?;
    let points = frontier(cfg, &policy, &pools)?;
    write_csv(&out.join("frontier.csv"), FRONTIER_SCHEMA, &points)?;
    Ok(points)
}

/// Trains LIRE once per objective temperature on identical data and seeds.
/// Reports exact expected reward and greedy win rate against the baselines.
pub fn run_sweep(cfg: &ExperimentConfig, pools: &[CandidatePool]) -> Result<Vec<SweepRow>> {
    let (rm, _) = cfg.reward_models()?;
    let queries = queries_of(pools);
    let baseline = score_answers(&rm, &baseline_answers(pools))?;
    temperature_sweep(&cfg.eval.sweep_temperatures, |t| {
        let mut local = cfg.clone();
        local.train.objective.temperature = t;
        let out = train_with(&local, pools, &Method::Lire, None)?;
        let reward = expected_reward(&out.policy, &queries, &rm)?;
        let greedy = score_answers(&rm, &greedy_answers(&out.policy, &queries)?)?;
        Ok((reward, win_rate_from_rewards(&greedy, &baseline)?))
    })
}

pub fn cmd_sweep_temp(cfg: &ExperimentConfig, pools_path: &Path, out: &Path) -> Result<Vec<SweepRow>> {
    let pools = read_pools(pools_path, cfg.vocab()?)?;
    require_pools(&pools, pools_path)?;
    let rows = run_sweep(cfg, &pools)?;
    write_csv(&out.join("sweep.csv"), SWEEP_SCHEMA, &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: String,
    /// Mean reward of the evaluated responses (greedy for trained policies).
    pub mean_reward_rm: f64,
    pub mean_reward_rm_star: f64,
    /// Exact expected reward of the trained policy; empty for best-of-n.
    pub expected_reward_rm: Option<f64>,
    pub expected_reward_rm_star: Option<f64>,
    pub win_rate_rm: f64,
    pub win_rate_rm_star: f64,
    pub win_rate: f64,
    pub negative_flip_rate: f64,
    pub kl: Option<f64>,
}

/// Trains every listed method on the same pools and seeds and scores each
/// against the pool baselines.
pub fn run_compare(cfg: &ExperimentConfig, pools: &[CandidatePool]) -> Result<Vec<CompareRow>> {
    let methods = &cfg.compare.methods;
    if methods.len() < 2 {
        return Err(LireError::Config(format!(
            "compare needs at least 2 methods, got {}",
            methods.len()
        )));
    }
    let init = cfg.initial_policy()?;
    let (rm, rm_star) = cfg.reward_models()?;
    let queries = queries_of(pools);
    let baseline = baseline_answers(pools);
    let before = greedy_answers(&init, &queries)?;
    methods
        .iter()
        .map(|&name| {
            let (answers, expected, kl) = match name.training_method(&init) {
                Some(method) => {
                    let policy = train_with(cfg, pools, &method, None)?.policy;
                    let expected = (
                        expected_reward(&policy, &queries, &rm)?,
                        expected_reward(&policy, &queries, &rm_star)?,
                    );
                    let kl = sequence_kl(&policy, &init, &queries, cfg.kl_estimator())?.value;
                    (greedy_answers(&policy, &queries)?, Some(expected), Some(kl))
                }
                None => {
                    let seed = derive_seed(cfg.seed, EVAL_STREAM);
                    let answers = queries
                        .iter()
                        .enumerate()
                        .map(|(i, q)| {
                            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                            let best = best_of_n(&init, q, cfg.eval.best_of_n, &rm, cfg.train.sample_temperature, &mut rng)?;
                            Ok(Answer {
                                query: q.clone(),
                                tokens: best.response.tokens,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (answers, None, None)
                }
            };
            let report = evaluate(&answers, &baseline, &before, &rm, &rm_star, kl.unwrap_or(f64::NAN))?;
            Ok(CompareRow {
                method: name.as_str().to_string(),
                mean_reward_rm: report.mean_reward_rm,
                mean_reward_rm_star: report.mean_reward_rm_star,
                expected_reward_rm: expected.map(|e| e.0),
                expected_reward_rm_star: expected.map(|e| e.1),
                win_rate_rm: report.win_rate_rm,
                win_rate_rm_star: report.win_rate_rm_star,
                win_rate: report.win_rate,
                negative_flip_rate: report.negative_flip_rate,
                kl,
            })
        })
        .collect()
}

/// Reads pools from `pools_path` when given, else generates and scores them.
pub fn cmd_compare(cfg: &ExperimentConfig, pools_path: Option<&Path>, out: &Path) -> Result<Vec<CompareRow>> {
    let pools = match pools_path {
        Some(p) => {
            let pools = read_pools(p, cfg.vocab()?)?;
            require_pools(&pools, p)?;
            pools
        }
        None => generate_pools(cfg)?,
    };
    let rows = run_compare(cfg, &pools)?;
    write_csv(&out.join("compare.csv"), COMPARE_SCHEMA, &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{MethodName, RewardSpec};

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.vocab.size = 3;
        cfg.vocab.max_len = 3;
        cfg.data.queries = 12;
        cfg.train.pool_size = 4;
        cfg.train.iterate_steps = 2;
        cfg
    }

    #[test]
    fn anchors_then_model_samples() {
        let cfg = small_config();
        let pools = generate_pools(&cfg).unwrap();
        assert_eq!(pools.len(), 12);
        for p in &pools {
            let sources: Vec<Source> = p.candidates.iter().map(|c| c.source).collect();
            assert_eq!(
                sources,
                vec![Source::HumanChosen, Source::HumanRejected, Source::ModelSample, Source::ModelSample]
            );
            assert!(!p.is_scored());
        }
        let mut pairwise = cfg.clone();
        pairwise.train.pool_size = 2;
        for p in generate_pools(&pairwise).unwrap() {
            assert_eq!(p.model_sample_count(), 0);
            assert_eq!(p.len(), 2);
        }
        assert_eq!(generate_pools(&cfg).unwrap(), pools);
    }

    #[test]
    fn chosen_anchor_outscores_rejected_on_average() {
        let mut cfg = small_config();
        cfg.data.queries = 100;
        let (rm, _) = cfg.reward_models().unwrap();
        let pools = score_pools(&rm, &generate_pools(&cfg).unwrap()).unwrap();
        let gap: f64 = pools
            .iter()
            .map(|p| p.candidates[0].reward.unwrap() - p.candidates[1].reward.unwrap())
            .sum::<f64>()
            / pools.len() as f64;
        assert!(gap > 0.0, "{gap}");
    }

    #[test]
    fn scoring_is_idempotent_and_overwrites() {
        let mut cfg = small_config();
        cfg.rm = RewardSpec::PatternCount {
            targets: vec![vec![0]],
            length_penalty: 0.0,
        };
        let (rm, _) = cfg.reward_models().unwrap();
        let once = score_pools(&rm, &generate_pools(&cfg).unwrap()).unwrap();
        let twice = score_pools(&rm, &once).unwrap();
        assert_eq!(once, twice);
        for p in &once {
            for c in &p.candidates {
                let zeros = c.tokens.iter().filter(|&&t| t == 0).count() as f64;
                assert_eq!(c.reward, Some(zeros));
            }
        }
    }

    #[test]
    fn compare_has_one_row_per_method() {
        let mut cfg = small_config();
        cfg.compare.methods = vec![MethodName::Lire, MethodName::Pg, MethodName::Dpo, MethodName::Sft, MethodName::BestOfN];
        let pools = generate_pools(&cfg).unwrap();
        let rows = run_compare(&cfg, &pools).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(names, vec!["lire", "pg", "dpo", "sft", "best_of_n"]);
        assert!(rows[4].kl.is_none() && rows[0].kl.unwrap() > 0.0);
        cfg.compare.methods.truncate(1);
        assert!(run_compare(&cfg, &pools).is_err());
    }
}
