//! Programmatic reward models and pool scoring.

use std::fmt;
use std::str::FromStr;

use crate::error::{LireError, Result};
use crate::policy::{content_len, Policy, Query, Token, Vocab};
use crate::pool::{CandidatePool, ScoredPool};

/// Boolean properties of a response, scored as 1.0 / 0.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predicate {
    /// Token occurs an even number of times (zero counts as even).
    EvenCount(Token),
    Contains(Token),
    EndsWithEos,
    /// At most this many content tokens.
    MaxLen(usize),
}

impl Predicate {
    fn holds(&self, tokens: &[Token], eos: Token) -> bool {
        match *self {
            Predicate::EvenCount(t) => tokens.iter().filter(|&&x| x == t).count() % 2 == 0,
            Predicate::Contains(t) => tokens.contains(&t),
            Predicate::EndsWithEos => tokens.last() == Some(&eos),
            Predicate::MaxLen(n) => content_len(tokens, eos) <= n,
        }
    }
}

impl FromStr for Predicate {
    type Err = LireError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<usize> {
            a.ok_or_else(|| LireError::Config(format!("predicate `{s}` needs an argument")))?
                .parse()
                .map_err(|_| LireError::Config(format!("predicate `{s}` has a non-integer argument")))
        };
        match name {
            "even-count" => Ok(Predicate::EvenCount(num(arg)?)),
            "contains" => Ok(Predicate::Contains(num(arg)?)),
            "ends-with-eos" => Ok(Predicate::EndsWithEos),
            "max-len" => Ok(Predicate::MaxLen(num(arg)?)),
            _ => Err(LireError::Config(format!("unknown predicate `{s}`"))),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::EvenCount(t) => write!(f, "even-count:{t}"),
            Predicate::Contains(t) => write!(f, "contains:{t}"),
            Predicate::EndsWithEos => write!(f, "ends-with-eos"),
            Predicate::MaxLen(n) => write!(f, "max-len:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardKind {
    /// Overlapping occurrences of the tag's target n-gram minus `λ · content length`.
    /// Targets are indexed by `tag % targets.len()`.
    PatternCount {
        targets: Vec<Vec<Token>>,
        length_penalty: f64,
    },
    /// Sequence log-probability under a hidden expert policy.
    ExpertLikelihood { expert: Policy },
    Predicate(Predicate),
}

/// A deterministic scorer over responses from one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    vocab: Vocab,
    kind: RewardKind,
}

impl RewardModel {
    pub fn new(vocab: Vocab, kind: RewardKind) -> Result<Self> {
        match &kind {
            RewardKind::PatternCount {
                targets,
                length_penalty,
            } => {
                if targets.is_empty() || targets.iter().any(|t| t.is_empty()) {
                    return Err(LireError::Config(
                        "pattern-count needs at least one non-empty target".into(),
                    ));
                }
                if let Some(&t) = targets.iter().flatten().find(|&&t| t >= vocab.eos()) {
                    return Err(LireError::Config(format!(
                        "pattern-count target token {t} must be a non-EOS id below {}",
                        vocab.eos()
                    )));
                }
                if !length_penalty.is_finite() {
                    return Err(LireError::Config("length penalty must be finite".into()));
                }
            }
            RewardKind::ExpertLikelihood { expert } => {
                if expert.vocab() != vocab {
                    return Err(LireError::Config(
                        "expert policy vocabulary differs from the reward model's".into(),
                    ));
                }
            }
            RewardKind::Predicate(_) => {}
        }
        Ok(RewardModel { vocab, kind })
    }

    pub fn pattern_count(vocab: Vocab, targets: Vec<Vec<Token>>, length_penalty: f64) -> Result<Self> {
        RewardModel::new(
            vocab,
            RewardKind::PatternCount {
                targets,
                length_penalty,
            },
        )
    }

    pub fn expert_likelihood(expert: Policy) -> Self {
        RewardModel {
            vocab: expert.vocab(),
            kind: RewardKind::ExpertLikelihood { expert },
        }
    }

    pub fn predicate(vocab: Vocab, predicate: Predicate) -> Self {
        RewardModel {
            vocab,
            kind: RewardKind::Predicate(predicate),
        }
    }

    pub fn kind(&self) -> &RewardKind {
        &self.kind
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn score(&self, query: &Query, tokens: &[Token]) -> Result<f64> {
        self.vocab.validate(tokens)?;
        let eos = self.vocab.eos();
        match &self.kind {
            RewardKind::PatternCount {
                targets,
                length_penalty,
            } => {
                let target = &targets[query.tag % targets.len()];
                let content = &tokens[..content_len(tokens, eos)];
                let hits = content.windows(target.len()).filter(|w| *w == target.as_slice()).count();
                Ok(hits as f64 - length_penalty * content.len() as f64)
            }
            RewardKind::ExpertLikelihood { expert } => expert.seq_log_prob(query, tokens),
            RewardKind::Predicate(p) => Ok(if p.holds(tokens, eos) { 1.0 } else { 0.0 }),
        }
    }
}

/// Scores every candidate, overwriting stale rewards, and normalizes.
pub fn score_pool(rm: &RewardModel, pool: &CandidatePool) -> Result<ScoredPool> {
    let mut scored = pool.clone();
    for c in &mut scored.candidates {
        c.reward = Some(rm.score(&scored.query, &c.tokens)?);
    }
    ScoredPool::from_pool(scored)
}
