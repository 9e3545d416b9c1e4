//! Candidate pools: one query with M responses, scored or awaiting a score.

use serde::{Deserialize, Serialize};

use crate::error::{LireError, Result};
use crate::objectives::normalize_rewards;
use crate::policy::{Query, Response, Source};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub query: Query,
    pub candidates: Vec<Response>,
}

impl CandidatePool {
    pub fn new(query: Query, candidates: Vec<Response>) -> Self {
        CandidatePool { query, candidates }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn is_scored(&self) -> bool {
        !self.candidates.is_empty() && self.candidates.iter().all(|c| c.reward.is_some())
    }

    pub fn model_sample_count(&self) -> usize {
        self.candidates
            .iter()
            .filter(|c| c.source == Source::ModelSample)
            .count()
    }

    pub fn clear_rewards(&mut self) {
        for c in &mut self.candidates {
            c.reward = None;
        }
    }
}

/// A pool whose every candidate carries a raw reward, plus the per-query
/// softmax of those rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPool {
    query: Query,
    responses: Vec<Response>,
    raw_rewards: Vec<f64>,
    norm_rewards: Vec<f64>,
}

impl ScoredPool {
    pub fn from_pool(pool: CandidatePool) -> Result<Self> {
        if pool.candidates.is_empty() {
            return Err(LireError::Domain(format!("pool for query {} is empty", pool.query.id)));
        }
        let raw_rewards = pool
            .candidates
            .iter()
            .enumerate()
            .map(|(j, c)| {
                c.reward.ok_or_else(|| {
                    LireError::Domain(format!(
                        "candidate {j} of query {} has no reward; score the pool first",
                        pool.query.id
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let norm_rewards = normalize_rewards(&raw_rewards)?;
        Ok(ScoredPool {
            query: pool.query,
            responses: pool.candidates,
            raw_rewards,
            norm_rewards,
        })
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn responses(&self) -> &[Response] {
        &self.responses
    }

    pub fn raw_rewards(&self) -> &[f64] {
        &self.raw_rewards
    }

    pub fn norm_rewards(&self) -> &[f64] {
        &self.norm_rewards
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn into_pool(self) -> CandidatePool {
        CandidatePool {
            query: self.query,
            candidates: self.responses,
        }
    }

    fn first_with_source(&self, source: Source) -> Option<usize> {
        self.responses.iter().position(|r| r.source == source)
    }

    fn best_index(&self) -> usize {
        crate::math::argmax(&self.raw_rewards)
    }

    fn worst_index(&self) -> usize {
        let mut worst = 0;
        for (i, &r) in self.raw_rewards.iter().enumerate().skip(1) {
            if r < self.raw_rewards[worst] {
                worst = i;
            }
        }
        worst
    }

    /// Supervised target: the human-chosen candidate, else the best raw reward.
    pub fn sft_target(&self) -> usize {
        self.first_with_source(Source::HumanChosen)
            .unwrap_or_else(|| self.best_index())
    }

    /// `(chosen, rejected)` indices for pairwise objectives. Source labels win;
    /// otherwise the highest and lowest raw rewards (ties to the lower index).
    /// `None` when both resolve to the same candidate.
    pub fn preference_pair(&self) -> Option<(usize, usize)> {
        let chosen = self.sft_target();
        let rejected = self
            .first_with_source(Source::HumanRejected)
            .unwrap_or_else(|| self.worst_index());
        (chosen != rejected).then_some((chosen, rejected))
    }
}
