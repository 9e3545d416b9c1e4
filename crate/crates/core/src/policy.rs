//! Tokens, responses, and the query-conditioned tabular autoregressive policy.
//!
//! The policy keeps one logit row per (query tag, previous token). Position 0
//! reads the row whose previous-token index is the EOS id, which doubles as
//! the BOS context. A response's probability is the product of the per-step
//! softmax probabilities of its tokens; a response that reaches the length
//! limit without EOS is complete and its probability is the prefix product.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LireError, Result};
use crate::math::logsumexp;

pub type Token = usize;

/// Vocabulary size (EOS included, as the largest id) and content-length limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub size: usize,
    pub max_len: usize,
}

impl Vocab {
    pub fn new(size: usize, max_len: usize) -> Result<Self> {
        if size < 2 {
            return Err(LireError::Config(format!(
                "vocabulary size must be at least 2 (one content token plus EOS), got {size}"
            )));
        }
        if max_len < 1 {
            return Err(LireError::Config("max_len must be at least 1".into()));
        }
        Ok(Vocab { size, max_len })
    }

    pub fn eos(&self) -> Token {
        self.size - 1
    }

    /// Checks ids, EOS placement, and the content-length limit.
    pub fn validate(&self, tokens: &[Token]) -> Result<()> {
        for (i, &t) in tokens.iter().enumerate() {
            if t >= self.size {
                return Err(LireError::InvalidToken {
                    token: t,
                    vocab_size: self.size,
                });
            }
            if t == self.eos() && i + 1 != tokens.len() {
                return Err(LireError::InvalidResponse(format!(
                    "EOS at position {i} is not the final token"
                )));
            }
        }
        let content = content_len(tokens, self.eos());
        if content > self.max_len {
            return Err(LireError::InvalidResponse(format!(
                "{content} content tokens exceed max_len {}",
                self.max_len
            )));
        }
        Ok(())
    }
}

/// Number of tokens before a trailing EOS.
pub fn content_len(tokens: &[Token], eos: Token) -> usize {
    match tokens.last() {
        Some(&t) if t == eos => tokens.len() - 1,
        _ => tokens.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: u64,
    pub tag: usize,
    /// Display only; conditioning goes through `tag`.
    #[serde(default)]
    pub tokens: Vec<Token>,
}

impl Query {
    pub fn new(id: u64, tag: usize) -> Self {
        Query {
            id,
            tag,
            tokens: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    HumanChosen,
    HumanRejected,
    ModelSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub tokens: Vec<Token>,
    pub source: Source,
    /// Raw, unbounded reward; `None` until scored.
    #[serde(rename = "raw_reward")]
    pub reward: Option<f64>,
}

impl Response {
    pub fn new(tokens: Vec<Token>, source: Source) -> Self {
        Response {
            tokens,
            source,
            reward: None,
        }
    }

    pub fn sample(tokens: Vec<Token>) -> Self {
        Response::new(tokens, Source::ModelSample)
    }
}

/// Dense `[Q][V][V]` tensor of logits or logit gradients, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    query_classes: usize,
    vocab_size: usize,
    data: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(query_classes: usize, vocab_size: usize) -> Self {
        ParamTensor {
            query_classes,
            vocab_size,
            data: vec![0.0; query_classes * vocab_size * vocab_size],
        }
    }

    pub fn from_vec(query_classes: usize, vocab_size: usize, data: Vec<f64>) -> Result<Self> {
        let expected = query_classes * vocab_size * vocab_size;
        if data.len() != expected {
            return Err(LireError::Shape(format!(
                "expected {expected} parameters for Q={query_classes}, V={vocab_size}, got {}",
                data.len()
            )));
        }
        Ok(ParamTensor {
            query_classes,
            vocab_size,
            data,
        })
    }

    pub fn query_classes(&self) -> usize {
        self.query_classes
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    fn row_start(&self, tag: usize, prev: Token) -> usize {
        (tag * self.vocab_size + prev) * self.vocab_size
    }

    pub fn row(&self, tag: usize, prev: Token) -> &[f64] {
        let s = self.row_start(tag, prev);
        &self.data[s..s + self.vocab_size]
    }

    pub fn row_mut(&mut self, tag: usize, prev: Token) -> &mut [f64] {
        let s = self.row_start(tag, prev);
        let v = self.vocab_size;
        &mut self.data[s..s + v]
    }

    pub fn same_shape(&self, other: &ParamTensor) -> bool {
        self.query_classes == other.query_classes && self.vocab_size == other.vocab_size
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ParamTensor) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Query-tag-conditioned bigram policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    vocab: Vocab,
    params: ParamTensor,
}

impl Policy {
    pub fn from_params(vocab: Vocab, params: ParamTensor) -> Result<Self> {
        if params.vocab_size() != vocab.size {
            return Err(LireError::Shape(format!(
                "parameter tensor has V={} but vocabulary has V={}",
                params.vocab_size(),
                vocab.size
            )));
        }
        if params.query_classes() == 0 {
            return Err(LireError::Shape("policy needs at least one query class".into()));
        }
        if !params.is_finite() {
            return Err(LireError::NonFinite("policy parameters".into()));
        }
        Ok(Policy { vocab, params })
    }

    /// All logits zero: every context is uniform over the vocabulary.
    pub fn uniform(vocab: Vocab, query_classes: usize) -> Self {
        Policy {
            vocab,
            params: ParamTensor::zeros(query_classes, vocab.size),
        }
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(
        vocab: Vocab,
        query_classes: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut params = ParamTensor::zeros(query_classes, vocab.size);
        if scale > 0.0 {
            for p in params.as_mut_slice() {
                *p = rng.gen_range(-scale..=scale);
            }
        }
        Policy { vocab, params }
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn query_classes(&self) -> usize {
        self.params.query_classes()
    }

    pub fn params(&self) -> &ParamTensor {
        &self.params
    }

    /// Mutable access for optimizers and perturbation oracles.
    pub fn params_mut(&mut self) -> &mut ParamTensor {
        &mut self.params
    }

    pub fn same_shape(&self, other: &Policy) -> bool {
        self.vocab == other.vocab && self.params.same_shape(&other.params)
    }

    /// Logits scaled by `1 / temperature`.
    pub fn with_temperature(&self, temperature: f64) -> Policy {
        let mut out = self.clone();
        out.params.scale(1.0 / temperature);
        out
    }

    /// Softmax of the row for (tag, prev).
    pub fn next_token_probs(&self, tag: usize, prev: Token) -> Vec<f64> {
        crate::math::softmax(self.params.row(tag, prev))
    }

    fn check_query(&self, query: &Query) -> Result<()> {
        if query.tag >= self.query_classes() {
            return Err(LireError::Domain(format!(
                "query {} has tag {} but the policy has {} query classes",
                query.id,
                query.tag,
                self.query_classes()
            )));
        }
        Ok(())
    }

    /// `log π(y | x) = Σ_k log P(y_k | tag, y_{k-1})`.
    pub fn seq_log_prob(&self, query: &Query, tokens: &[Token]) -> Result<f64> {
        self.check_query(query)?;
        self.vocab.validate(tokens)?;
        Ok(self.log_prob_unchecked(query.tag, tokens))
    }

    pub(crate) fn log_prob_unchecked(&self, tag: usize, tokens: &[Token]) -> f64 {
        let mut prev = self.vocab.eos();
        let mut total = 0.0;
        for &t in tokens {
            let row = self.params.row(tag, prev);
            total += row[t] - logsumexp(row);
            prev = t;
        }
        total
    }

    /// `∇_θ log π(y | x)`: each visited row gets `onehot(next) - softmax(row)`.
    pub fn seq_log_prob_grad(&self, query: &Query, tokens: &[Token]) -> Result<ParamTensor> {
        let mut grad = ParamTensor::zeros(self.query_classes(), self.vocab.size);
        self.accumulate_log_prob_grad(query, tokens, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// `grad += weight * ∇_θ log π(y | x)` without allocating.
    pub fn accumulate_log_prob_grad(
        &self,
        query: &Query,
        tokens: &[Token],
        weight: f64,
        grad: &mut ParamTensor,
    ) -> Result<()> {
        self.check_query(query)?;
        self.vocab.validate(tokens)?;
        if !grad.same_shape(&self.params) {
            return Err(LireError::Shape("gradient tensor does not match policy".into()));
        }
        if weight == 0.0 {
            return Ok(());
        }
        let mut prev = self.vocab.eos();
        for &t in tokens {
            let probs = self.next_token_probs(query.tag, prev);
            let row = grad.row_mut(query.tag, prev);
            for (g, p) in row.iter_mut().zip(&probs) {
                *g -= weight * p;
            }
            row[t] += weight;
            prev = t;
        }
        Ok(())
    }
}
