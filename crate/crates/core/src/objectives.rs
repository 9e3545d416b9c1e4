//! Listwise reward-weighted loss (LIRE) and the PG, DPO and SFT baselines.
//!
//! Every objective returns a [`LossReport`] with the loss value and its exact
//! gradient with respect to the policy logits. Losses are minimized.
//!
//! For one pool with candidates `y_1..y_M`, sequence log-probabilities `ℓ_j`
//! and softmax-normalized rewards `r_j`:
//!
//! ```text
//! P_j  = softmax(ℓ / T)_j
//! J    = -Σ_j P_j r_j
//! ∇J   = -(1/T) Σ_j P_j (r_j - Σ_k P_k r_k) ∇ℓ_j
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{LireError, Result};
use crate::math::{sigmoid, softmax, softplus};
use crate::policy::{ParamTensor, Policy, Query, Token};
use crate::pool::ScoredPool;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    /// Smoothing temperature of the candidate distribution.
    pub temperature: f64,
    /// Weight of the supervised term in the combined loss.
    pub sft_weight: f64,
    /// DPO inverse temperature.
    pub dpo_beta: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            temperature: 1.0,
            sft_weight: 0.0,
            dpo_beta: 0.1,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(LireError::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.sft_weight >= 0.0 && self.sft_weight.is_finite()) {
            return Err(LireError::Config(format!(
                "sft_weight must be non-negative, got {}",
                self.sft_weight
            )));
        }
        if !(self.dpo_beta > 0.0 && self.dpo_beta.is_finite()) {
            return Err(LireError::Config(format!(
                "dpo_beta must be positive, got {}",
                self.dpo_beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub grad: ParamTensor,
    /// Per-candidate diagnostic weights; for LIRE, the candidate distribution.
    pub per_sample_weights: Vec<f64>,
}

impl LossReport {
    pub(crate) fn zero(policy: &Policy) -> Self {
        LossReport {
            value: 0.0,
            grad: ParamTensor::zeros(policy.query_classes(), policy.vocab().size),
            per_sample_weights: Vec::new(),
        }
    }
}

/// Per-query softmax of raw rewards.
pub fn normalize_rewards(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(LireError::Domain("cannot normalize an empty reward list".into()));
    }
    if let Some(bad) = raw.iter().find(|r| !r.is_finite()) {
        return Err(LireError::Domain(format!("reward {bad} is not finite")));
    }
    Ok(softmax(raw))
}

/// `P_j = exp(ℓ_j / T) / Σ_k exp(ℓ_k / T)`.
pub fn candidate_distribution(log_probs: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(LireError::Config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if log_probs.is_empty() {
        return Err(LireError::Domain("candidate distribution over an empty pool".into()));
    }
    let scaled: Vec<f64> = log_probs.iter().map(|l| l / temperature).collect();
    Ok(softmax(&scaled))
}

/// `Σ_k P_k (r_j - r_k)`, i.e. `r_j` minus the P-weighted mean reward,
/// written so that equal rewards give exactly zero.
pub fn demeaned_rewards(probs: &[f64], rewards: &[f64]) -> Vec<f64> {
    rewards
        .iter()
        .map(|&rj| probs.iter().zip(rewards).map(|(pk, rk)| pk * (rj - rk)).sum())
        .collect()
}

/// Representative index for each candidate: the first candidate with the same tokens.
fn duplicate_groups(tokens: &[&[Token]]) -> Vec<usize> {
    (0..tokens.len())
        .map(|j| (0..=j).find(|&k| tokens[k] == tokens[j]).unwrap_or(j))
        .collect()
}

/// Gradient weight per distinct response, `W_g = Σ_{j∈g} Σ_{k∉g} P_j P_k (r_j - r_k)`.
///
/// Token-identical candidates share one gradient, and the pairs inside a
/// group cancel, so they are left out of the sum. For distinct responses
/// this equals `P_j (r_j - r̄)`.
fn group_weights(probs: &[f64], rewards: &[f64], groups: &[usize]) -> Vec<f64> {
    let m = probs.len();
    let mut weights = vec![0.0; m];
    for j in 0..m {
        let mut w = 0.0;
        for k in 0..m {
            if groups[k] != groups[j] {
                w += probs[j] * probs[k] * (rewards[j] - rewards[k]);
            }
        }
        weights[groups[j]] += w;
    }
    weights
}

fn pool_log_probs(policy: &Policy, pool: &ScoredPool) -> Result<Vec<f64>> {
    pool.responses()
        .iter()
        .map(|r| policy.seq_log_prob(pool.query(), &r.tokens))
        .collect()
}

/// Listwise loss for one pool with its analytic gradient.
pub fn lire_loss(policy: &Policy, pool: &ScoredPool, cfg: &ObjectiveConfig) -> Result<LossReport> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(LireError::Domain("LIRE loss over an empty pool".into()));
    }
    let log_probs = pool_log_probs(policy, pool)?;
    let probs = candidate_distribution(&log_probs, cfg.temperature)?;
    let rewards = pool.norm_rewards();
    let value = -probs.iter().zip(rewards).map(|(p, r)| p * r).sum::<f64>();

    let tokens: Vec<&[Token]> = pool.responses().iter().map(|r| r.tokens.as_slice()).collect();
    let groups = duplicate_groups(&tokens);
    let weights = group_weights(&probs, rewards, &groups);

    let mut grad = ParamTensor::zeros(policy.query_classes(), policy.vocab().size);
    for (j, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            policy.accumulate_log_prob_grad(pool.query(), tokens[j], -w / cfg.temperature, &mut grad)?;
        }
    }
    Ok(LossReport {
        value,
        grad,
        per_sample_weights: probs,
    })
}

pub fn lire_grad(policy: &Policy, pool: &ScoredPool, cfg: &ObjectiveConfig) -> Result<ParamTensor> {
    Ok(lire_loss(policy, pool, cfg)?.grad)
}

/// Closed-form pairwise weight
/// `π_1^{1/T} π_2^{1/T} / (π_1^{1/T} + π_2^{1/T})^2 · (r_1 - r_2)`, in log space.
pub fn lire2_weight(log_p1: f64, log_p2: f64, r1: f64, r2: f64, temperature: f64) -> f64 {
    let a = log_p1 / temperature;
    let b = log_p2 / temperature;
    let hi = a.max(b);
    let lse = hi + ((a - hi).exp() + (b - hi).exp()).ln();
    (a + b - 2.0 * lse).exp() * (r1 - r2)
}

/// Pairwise gradient `-(1/T) [P̃ ∇ℓ_1 - P̃ ∇ℓ_2]` for a two-candidate pool.
pub fn lire2_grad(policy: &Policy, pool: &ScoredPool, cfg: &ObjectiveConfig) -> Result<ParamTensor> {
    cfg.validate()?;
    if pool.len() != 2 {
        return Err(LireError::Domain(format!(
            "pairwise form needs exactly 2 candidates, got {}",
            pool.len()
        )));
    }
    let lp = pool_log_probs(policy, pool)?;
    let r = pool.norm_rewards();
    let w = lire2_weight(lp[0], lp[1], r[0], r[1], cfg.temperature);
    let q = pool.query();
    let mut grad = ParamTensor::zeros(policy.query_classes(), policy.vocab().size);
    let (y1, y2) = (&pool.responses()[0].tokens, &pool.responses()[1].tokens);
    if y1 != y2 {
        policy.accumulate_log_prob_grad(q, y1, -w / cfg.temperature, &mut grad)?;
        policy.accumulate_log_prob_grad(q, y2, w / cfg.temperature, &mut grad)?;
    }
    Ok(grad)
}

/// One (query, response, raw reward) triple for the policy-gradient baseline.
#[derive(Debug, Clone, Copy)]
pub struct RewardedSample<'a> {
    pub query: &'a Query,
    pub tokens: &'a [Token],
    pub reward: f64,
}

/// `-(1/m) Σ_i R_i log π(y_i | x_i)`, with raw rewards.
pub fn pg_loss(policy: &Policy, batch: &[RewardedSample<'_>]) -> Result<LossReport> {
    if batch.is_empty() {
        return Err(LireError::Domain("policy-gradient loss over an empty batch".into()));
    }
    let m = batch.len() as f64;
    let mut report = LossReport::zero(policy);
    for s in batch {
        if !s.reward.is_finite() {
            return Err(LireError::Domain(format!("reward {} is not finite", s.reward)));
        }
        report.value -= s.reward * policy.seq_log_prob(s.query, s.tokens)? / m;
        policy.accumulate_log_prob_grad(s.query, s.tokens, -s.reward / m, &mut report.grad)?;
        report.per_sample_weights.push(s.reward / m);
    }
    Ok(report)
}

/// `-log σ(β [(ℓ_w - ℓ^ref_w) - (ℓ_l - ℓ^ref_l)])` and its gradient
/// `-β P̃ (∇ℓ_w - ∇ℓ_l)` with `P̃ = σ(r̂_l - r̂_w)`.
pub fn dpo_loss(
    policy: &Policy,
    reference: Option<&Policy>,
    query: &Query,
    chosen: &[Token],
    rejected: &[Token],
    cfg: &ObjectiveConfig,
) -> Result<LossReport> {
    cfg.validate()?;
    let reference =
        reference.ok_or_else(|| LireError::Config("DPO requires a reference policy".into()))?;
    if !policy.same_shape(reference) {
        return Err(LireError::Config("reference policy shape differs from the policy".into()));
    }
    let beta = cfg.dpo_beta;
    let implicit_w = beta * (policy.seq_log_prob(query, chosen)? - reference.seq_log_prob(query, chosen)?);
    let implicit_l =
        beta * (policy.seq_log_prob(query, rejected)? - reference.seq_log_prob(query, rejected)?);
    let margin = implicit_w - implicit_l;
    let weight = sigmoid(-margin);
    let mut report = LossReport::zero(policy);
    report.value = softplus(-margin);
    if chosen != rejected {
        policy.accumulate_log_prob_grad(query, chosen, -beta * weight, &mut report.grad)?;
        policy.accumulate_log_prob_grad(query, rejected, beta * weight, &mut report.grad)?;
    }
    report.per_sample_weights = vec![weight, -weight];
    Ok(report)
}

/// Mean negative log-likelihood of the supervised targets.
pub fn sft_loss(policy: &Policy, batch: &[(&Query, &[Token])]) -> Result<LossReport> {
    if batch.is_empty() {
        return Err(LireError::Domain("SFT loss over an empty batch".into()));
    }
    let m = batch.len() as f64;
    let mut report = LossReport::zero(policy);
    for (q, y) in batch {
        report.value -= policy.seq_log_prob(q, y)? / m;
        policy.accumulate_log_prob_grad(q, y, -1.0 / m, &mut report.grad)?;
    }
    report.per_sample_weights = vec![1.0 / m; batch.len()];
    Ok(report)
}

/// `J + α L_SFT` on one pool.
pub fn combined_loss(
    policy: &Policy,
    pool: &ScoredPool,
    chosen: Option<&[Token]>,
    cfg: &ObjectiveConfig,
) -> Result<LossReport> {
    let mut report = lire_loss(policy, pool, cfg)?;
    if cfg.sft_weight == 0.0 {
        return Ok(report);
    }
    let chosen = chosen.ok_or_else(|| {
        LireError::Config(format!(
            "sft_weight {} > 0 but query {} has no chosen response",
            cfg.sft_weight,
            pool.query().id
        ))
    })?;
    let sft = sft_loss(policy, &[(pool.query(), chosen)])?;
    report.value += cfg.sft_weight * sft.value;
    report.grad.axpy(cfg.sft_weight, &sft.grad);
    Ok(report)
}

/// Arithmetic mean of per-query reports; weights are concatenated.
pub fn mean_reports(policy: &Policy, reports: Vec<LossReport>) -> Result<LossReport> {
    if reports.is_empty() {
        return Err(LireError::Domain("cannot average an empty batch".into()));
    }
    let m = reports.len() as f64;
    let mut out = LossReport::zero(policy);
    for r in reports {
        out.value += r.value / m;
        out.grad.axpy(1.0 / m, &r.grad);
        out.per_sample_weights.extend(r.per_sample_weights);
    }
    Ok(out)
}

/// Mean LIRE loss over a batch of pools.
pub fn lire_batch_loss(
    policy: &Policy,
    pools: &[ScoredPool],
    cfg: &ObjectiveConfig,
) -> Result<LossReport> {
    let reports = pools
        .iter()
        .map(|p| lire_loss(policy, p, cfg))
        .collect::<Result<Vec<_>>>()?;
    mean_reports(policy, reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Response, Source, Vocab};
    use crate::pool::CandidatePool;

    fn fixed_policy() -> Policy {
        let data = vec![0.5, -1.0, 0.2, 1.5, 0.0, -0.5, 0.3, 0.9, -0.2];
        Policy::from_params(Vocab::new(3, 4).unwrap(), ParamTensor::from_vec(1, 3, data).unwrap())
            .unwrap()
    }

    fn pool(seqs: &[&[Token]], raw: &[f64]) -> ScoredPool {
        let candidates = seqs
            .iter()
            .zip(raw)
            .map(|(s, &r)| Response {
                tokens: s.to_vec(),
                source: Source::ModelSample,
                reward: Some(r),
            })
            .collect();
        ScoredPool::from_pool(CandidatePool::new(Query::new(0, 0), candidates)).unwrap()
    }

    #[test]
    fn normalize_rewards_examples() {
        let u = normalize_rewards(&[5.0, 5.0, 5.0]).unwrap();
        assert!(u.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(normalize_rewards(&[0.0, 1.0]).unwrap(), normalize_rewards(&[100.0, 101.0]).unwrap());
        let r = normalize_rewards(&[0.0, 3f64.ln()]).unwrap();
        assert!((r[0] - 0.25).abs() < 1e-15 && (r[1] - 0.75).abs() < 1e-15);
        assert!(normalize_rewards(&[]).is_err());
        assert!(normalize_rewards(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn candidate_distribution_examples() {
        let u = candidate_distribution(&[-2.0, -2.0, -2.0, -2.0], 3.0).unwrap();
        assert!(u.iter().all(|&x| x == 0.25));
        let p = candidate_distribution(&[0.1f64.ln(), 0.3f64.ln()], 1.0).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let p = candidate_distribution(&[0.1f64.ln(), 0.3f64.ln()], 0.5).unwrap();
        assert!((p[0] - 0.1).abs() < 1e-15 && (p[1] - 0.9).abs() < 1e-15);
        assert!(matches!(candidate_distribution(&[0.0], 0.0), Err(LireError::Config(_))));
        assert!(candidate_distribution(&[0.0], -1.0).is_err());
    }

    #[test]
    fn temperature_limits() {
        let lp = [-3.0, -1.0, -7.5, -2.0];
        let hot = candidate_distribution(&lp, 1e6).unwrap();
        assert!(hot.iter().all(|&p| (p - 0.25).abs() < 1e-4));
        let cold = candidate_distribution(&lp, 1e-3).unwrap();
        assert!((cold[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_pool_loss_is_minus_one() {
        let p = fixed_policy();
        let r = lire_loss(&p, &pool(&[&[0, 1]], &[-4.0]), &ObjectiveConfig::default()).unwrap();
        assert_eq!(r.value, -1.0);
        assert!(r.grad.is_zero());
    }

    #[test]
    fn identical_pair_loss_is_minus_half() {
        let p = fixed_policy();
        let r = lire_loss(&p, &pool(&[&[1, 0], &[1, 0]], &[0.3, 0.3]), &ObjectiveConfig::default())
            .unwrap();
        assert_eq!(r.value, -0.5);
        assert!(r.grad.is_zero());
    }

    #[test]
    fn brute_force_value() {
        // Independent mpmath evaluation of the listwise loss, 30 digits.
        let cfg = ObjectiveConfig {
            temperature: 2.0,
            ..Default::default()
        };
        let r = lire_loss(&fixed_policy(), &pool(&[&[0, 1], &[1, 2], &[2]], &[1.0, -0.5, 2.0]), &cfg)
            .unwrap();
        assert!((r.value - -0.419_447_146_158_785_4).abs() < 1e-12, "{}", r.value);
        let expected_p = [0.218_600_357_231_612_8, 0.276_316_187_601_808_2, 0.505_083_455_166_579_1];
        for (a, b) in r.per_sample_weights.iter().zip(expected_p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_rewards_zero_gradient_even_with_distinct_responses() {
        let r = lire_grad(
            &fixed_policy(),
            &pool(&[&[0, 1], &[1, 2], &[2]], &[0.7, 0.7, 0.7]),
            &ObjectiveConfig::default(),
        )
        .unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn demeaned_sign_follows_reward_ordering() {
        let probs = [0.2, 0.5, 0.3];
        let rewards = [0.1, 0.3, 0.6];
        let mean: f64 = probs.iter().zip(&rewards).map(|(p, r)| p * r).sum();
        for (d, r) in demeaned_rewards(&probs, &rewards).iter().zip(rewards) {
            assert_eq!(*d > 0.0, r > mean);
            assert!((d - (r - mean)).abs() < 1e-15);
        }
    }

    #[test]
    fn lire2_weight_examples() {
        assert_eq!(lire2_weight(-1.0, -3.0, 0.4, 0.4, 1.0), 0.0);
        let w = lire2_weight(-2.5, -2.5, 0.9, 0.1, 3.0);
        assert!((w - 0.25 * 0.8).abs() < 1e-15);
        // Stays finite when both sequence probabilities underflow.
        assert!(lire2_weight(-900.0, -905.0, 1.0, 0.0, 1.0).is_finite());
    }

    #[test]
    fn pg_examples() {
        let p = fixed_policy();
        let q = Query::new(0, 0);
        let y: &[Token] = &[1, 0, 2];
        let zero = pg_loss(&p, &[RewardedSample { query: &q, tokens: y, reward: 0.0 }]).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(zero.grad.is_zero());
        let one = pg_loss(&p, &[RewardedSample { query: &q, tokens: y, reward: 1.0 }]).unwrap();
        let mut neg = p.seq_log_prob_grad(&q, y).unwrap();
        neg.scale(-1.0);
        assert_eq!(one.grad, neg);
        assert!(pg_loss(&p, &[]).is_err());
    }

    #[test]
    fn dpo_at_reference_is_ln2_and_antisymmetric() {
        let p = fixed_policy();
        let q = Query::new(0, 0);
        let cfg = ObjectiveConfig::default();
        let a = dpo_loss(&p, Some(&p), &q, &[0, 1], &[1, 2], &cfg).unwrap();
        assert!((a.value - 2f64.ln()).abs() < 1e-15);
        assert_eq!(a.per_sample_weights, vec![0.5, -0.5]);
        let b = dpo_loss(&p, Some(&p), &q, &[1, 2], &[0, 1], &cfg).unwrap();
        let mut neg = b.grad.clone();
        neg.scale(-1.0);
        assert!(a.grad.as_slice().iter().zip(neg.as_slice()).all(|(x, y)| (x - y).abs() < 1e-15));
        assert!(matches!(
            dpo_loss(&p, None, &q, &[0], &[1], &cfg),
            Err(LireError::Config(_))
        ));
    }

    #[test]
    fn sft_examples() {
        let vocab = Vocab::new(4, 5).unwrap();
        let q = Query::new(0, 0);
        let uniform = Policy::uniform(vocab, 1);
        let r = sft_loss(&uniform, &[(&q, &[0, 1, 2][..])]).unwrap();
        assert!((r.value - 3.0 * 4f64.ln()).abs() < 1e-12);

        let mut t = ParamTensor::zeros(1, 4);
        t.row_mut(0, 3)[2] = 800.0;
        t.row_mut(0, 2)[3] = 800.0;
        let peaked = Policy::from_params(vocab, t).unwrap();
        assert_eq!(sft_loss(&peaked, &[(&q, &[2, 3][..])]).unwrap().value, 0.0);
    }

    #[test]
    fn combined_loss_behaviour() {
        let p = fixed_policy();
        let pl = pool(&[&[0, 1], &[1, 2], &[2]], &[1.0, -0.5, 2.0]);
        let base = ObjectiveConfig::default();
        assert_eq!(
            combined_loss(&p, &pl, None, &base).unwrap(),
            lire_loss(&p, &pl, &base).unwrap()
        );
        let with = ObjectiveConfig { sft_weight: 0.02, ..base };
        assert!(matches!(combined_loss(&p, &pl, None, &with), Err(LireError::Config(_))));

        let chosen: &[Token] = &[2];
        let c = 0.37;
        let one = combined_loss(&p, &pl, Some(chosen), &ObjectiveConfig { sft_weight: c, ..base }).unwrap();
        let two =
            combined_loss(&p, &pl, Some(chosen), &ObjectiveConfig { sft_weight: 2.0 * c, ..base }).unwrap();
        let sft = sft_loss(&p, &[(pl.query(), chosen)]).unwrap();
        assert!((two.value - one.value - c * sft.value).abs() < 1e-12);
    }
}
