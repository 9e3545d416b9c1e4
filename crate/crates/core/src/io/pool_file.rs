use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LireError, Result};
use crate::policy::{Query, Response, Source, Token, Vocab};
use crate::pool::CandidatePool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub tokens: Vec<Token>,
    pub source: Source,
    pub raw_reward: Option<f64>,
}

/// One line of a pool file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolRecord {
    pub query_id: u64,
    pub query_tag: usize,
    #[serde(default)]
    pub query_tokens: Vec<Token>,
    pub candidates: Vec<CandidateRecord>,
}

impl From<&CandidatePool> for PoolRecord {
    fn from(pool: &CandidatePool) -> Self {
        PoolRecord {
            query_id: pool.query.id,
            query_tag: pool.query.tag,
            query_tokens: pool.query.tokens.clone(),
            candidates: pool
                .candidates
                .iter()
                .map(|c| CandidateRecord {
                    tokens: c.tokens.clone(),
                    source: c.source,
                    raw_reward: c.reward,
                })
                .collect(),
        }
    }
}

impl From<PoolRecord> for CandidatePool {
    fn from(rec: PoolRecord) -> Self {
        let query = Query {
            id: rec.query_id,
            tag: rec.query_tag,
            tokens: rec.query_tokens,
        };
        let candidates = rec
            .candidates
            .into_iter()
            .map(|c| Response {
                tokens: c.tokens,
                source: c.source,
                reward: c.raw_reward,
            })
            .collect();
        CandidatePool::new(query, candidates)
    }
}

pub fn pools_to_string(pools: &[CandidatePool]) -> Result<String> {
    let mut out = String::new();
    for pool in pools {
        let line = serde_json::to_string(&PoolRecord::from(pool))
            .map_err(|e| LireError::Domain(format!("query {}: {e}", pool.query.id)))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Parses a pool file. Blank lines are skipped; every other line must hold one
/// record with valid token ids and the same candidate count as the first.
pub fn pools_from_str(text: &str, vocab: Vocab, path: &Path) -> Result<Vec<CandidatePool>> {
    let mut pools = Vec::new();
    let mut expected_m: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| LireError::Parse {
            path: PathBuf::from(path),
            line: idx + 1,
            message,
        };
        let rec: PoolRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let m = rec.candidates.len();
        if m == 0 {
            return Err(err(format!("query {} has no candidates", rec.query_id)));
        }
        match expected_m {
            None => expected_m = Some(m),
            Some(first) if first != m => {
                return Err(err(format!("query {} has {m} candidates, earlier lines have {first}", rec.query_id)));
            }
            _ => {}
        }
        for (j, c) in rec.candidates.iter().enumerate() {
            vocab
                .validate(&c.tokens)
                .map_err(|e| err(format!("query {} candidate {j}: {e}", rec.query_id)))?;
            if let Some(r) = c.raw_reward.filter(|r| !r.is_finite()) {
                return Err(err(format!("query {} candidate {j}: reward {r} is not finite", rec.query_id)));
            }
        }
        if let Some(&t) = rec.query_tokens.iter().find(|&&t| t >= vocab.size) {
            return Err(err(format!("query {} token {t} is out of range", rec.query_id)));
        }
        pools.push(rec.into());
    }
    Ok(pools)
}

pub fn write_pools(path: &Path, pools: &[CandidatePool]) -> Result<()> {
    super::write_file(path, &pools_to_string(pools)?)
}

pub fn read_pools(path: &Path, vocab: Vocab) -> Result<Vec<CandidatePool>> {
    pools_from_str(&super::read_file(path)?, vocab, path)
}
