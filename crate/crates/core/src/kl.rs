//! Sequence-level KL divergence between two policies, exact or Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decode::{sample_response, DecodeConfig};
use crate::enumerate::response_support;
use crate::error::{LireError, Result};
use crate::math::derive_seed;
use crate::policy::{Policy, Query};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlEstimator {
    /// Sum over the full decoder support.
    Exact,
    /// `n_samples` draws per query.
    MonteCarlo { n_samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEstimate {
    pub value: f64,
    /// Standard error of the mean; zero in exact mode.
    pub std_error: f64,
}

/// `E_x E_{y~π}[log π(y|x) − log π_ref(y|x)]`, averaged over `queries`.
pub fn sequence_kl(
    policy: &Policy,
    reference: &Policy,
    queries: &[Query],
    estimator: KlEstimator,
) -> Result<KlEstimate> {
    if !policy.same_shape(reference) {
        return Err(LireError::Config(
            "policy and reference must share vocabulary, max_len and query classes".into(),
        ));
    }
    if queries.is_empty() {
        return Err(LireError::Domain("KL needs at least one query".into()));
    }
    let max_len = policy.vocab().max_len;
    match estimator {
        KlEstimator::Exact => {
            let support = response_support(policy.vocab(), max_len)?;
            let mut total = 0.0;
            for q in queries {
                let mut per_query = 0.0;
                for y in &support {
                    let log_p = policy.seq_log_prob(q, y)?;
                    let weight = log_p.exp();
                    if weight == 0.0 {
                        continue;
                    }
                    per_query += weight * (log_p - reference.seq_log_prob(q, y)?);
                }
                total += per_query;
            }
            Ok(KlEstimate {
                value: total / queries.len() as f64,
                std_error: 0.0,
            })
        }
        KlEstimator::MonteCarlo { n_samples, seed } => {
            if n_samples == 0 {
                return Err(LireError::Config("Monte Carlo KL needs n_samples > 0".into()));
            }
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut n = 0usize;
            for (i, q) in queries.iter().enumerate() {
                let cfg = DecodeConfig::sampling(1.0, derive_seed(seed, i as u64), max_len);
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                for _ in 0..n_samples {
                    let y = sample_response(policy, q, &cfg, &mut rng)?;
                    let d = policy.seq_log_prob(q, &y.tokens)? - reference.seq_log_prob(q, &y.tokens)?;
                    sum += d;
                    sum_sq += d * d;
                    n += 1;
                }
            }
            let mean = sum / n as f64;
            let var = if n > 1 {
                ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0)
            } else {
                0.0
            };
            Ok(KlEstimate {
                value: mean,
                std_error: (var / n as f64).sqrt(),
            })
        }
    }
}
