//! Greedy and temperature decoding from the BOS context.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LireError, Result};
use crate::math::{argmax, softmax};
use crate::policy::{Policy, Query, Response, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeMode {
    Greedy,
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub sampling_temperature: f64,
    pub seed: u64,
    /// Content-token limit; must not exceed the vocabulary's `max_len`.
    pub max_len: usize,
}

impl DecodeConfig {
    pub fn greedy(max_len: usize) -> Self {
        DecodeConfig {
            mode: DecodeMode::Greedy,
            sampling_temperature: 1.0,
            seed: 0,
            max_len,
        }
    }

    pub fn sampling(temperature: f64, seed: u64, max_len: usize) -> Self {
        DecodeConfig {
            mode: DecodeMode::Temperature,
            sampling_temperature: temperature,
            seed,
            max_len,
        }
    }

    pub fn validate(&self, policy: &Policy) -> Result<()> {
        if !(self.sampling_temperature > 0.0) || !self.sampling_temperature.is_finite() {
            return Err(LireError::Config(format!(
                "sampling temperature must be positive and finite, got {}",
                self.sampling_temperature
            )));
        }
        if self.max_len > policy.vocab().max_len {
            return Err(LireError::Config(format!(
                "decode max_len {} exceeds vocabulary max_len {}",
                self.max_len,
                policy.vocab().max_len
            )));
        }
        Ok(())
    }

    /// Fresh generator seeded from `self.seed`.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Draws an index from a probability vector using one uniform variate.
pub(crate) fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Generates one response. Stops after EOS or after `cfg.max_len` content tokens.
pub fn sample_response<R: Rng + ?Sized>(
    policy: &Policy,
    query: &Query,
    cfg: &DecodeConfig,
    rng: &mut R,
) -> Result<Response> {
    cfg.validate(policy)?;
    if query.tag >= policy.query_classes() {
        return Err(LireError::Domain(format!(
            "query {} has tag {} outside the policy's {} classes",
            query.id,
            query.tag,
            policy.query_classes()
        )));
    }
    let eos = policy.vocab().eos();
    let mut tokens: Vec<Token> = Vec::with_capacity(cfg.max_len + 1);
    let mut prev = eos;
    while tokens.len() < cfg.max_len {
        let row = policy.params().row(query.tag, prev);
        let next = match cfg.mode {
            DecodeMode::Greedy => argmax(row),
            DecodeMode::Temperature => {
                let scaled: Vec<f64> = row.iter().map(|l| l / cfg.sampling_temperature).collect();
                draw(&softmax(&scaled), rng)
            }
        };
        tokens.push(next);
        if next == eos {
            break;
        }
        prev = next;
    }
    Ok(Response::sample(tokens))
}

/// Greedy decode at the vocabulary's full length.
pub fn greedy_response(policy: &Policy, query: &Query) -> Result<Response> {
    let cfg = DecodeConfig::greedy(policy.vocab().max_len);
    sample_response(policy, query, &cfg, &mut cfg.rng())
}
