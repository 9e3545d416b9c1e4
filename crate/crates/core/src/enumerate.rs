//! Exhaustive enumeration of the response space for exact oracles.

use crate::error::{LireError, Result};
use crate::policy::{Token, Vocab};

/// Guard on `V^max_len`.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

fn check_guard(vocab: Vocab, max_len: usize) -> Result<()> {
    let mut count: u128 = 1;
    for _ in 0..max_len {
        count = count.saturating_mul(vocab.size as u128);
        if count > ENUMERATION_LIMIT {
            return Err(LireError::EnumerationTooLarge {
                count,
                limit: ENUMERATION_LIMIT,
            });
        }
    }
    Ok(())
}

/// `Σ_{k=0..max_len} (V-1)^k`, the size of either enumeration below.
pub fn response_count(vocab: Vocab, max_len: usize) -> u128 {
    let base = (vocab.size - 1) as u128;
    (0..=max_len as u32).map(|k| base.pow(k)).sum()
}

/// Every EOS-terminated sequence with 0..=max_len content tokens, in
/// lexicographic order (EOS is the largest id).
pub fn enumerate_responses(vocab: Vocab, max_len: usize) -> Result<Vec<Vec<Token>>> {
    check_guard(vocab, max_len)?;
    let mut out = Vec::with_capacity(response_count(vocab, max_len) as usize);
    let mut prefix = Vec::with_capacity(max_len + 1);
    walk(vocab, max_len, &mut prefix, &mut out, true);
    Ok(out)
}

/// The decoder's complete support at `max_len`: sequences that end in EOS
/// before the limit, plus every length-`max_len` sequence without EOS.
/// Probabilities over this set sum to one.
pub fn response_support(vocab: Vocab, max_len: usize) -> Result<Vec<Vec<Token>>> {
    check_guard(vocab, max_len)?;
    let mut out = Vec::with_capacity(response_count(vocab, max_len) as usize);
    let mut prefix = Vec::with_capacity(max_len + 1);
    walk(vocab, max_len, &mut prefix, &mut out, false);
    Ok(out)
}

fn walk(
    vocab: Vocab,
    max_len: usize,
    prefix: &mut Vec<Token>,
    out: &mut Vec<Vec<Token>>,
    terminate_at_limit: bool,
) {
    let eos = vocab.eos();
    if prefix.len() == max_len {
        let mut seq = prefix.clone();
        if terminate_at_limit {
            seq.push(eos);
        }
        out.push(seq);
        return;
    }
    for t in 0..vocab.size {
        if t == eos {
            let mut seq = prefix.clone();
            seq.push(eos);
            out.push(seq);
        } else {
            prefix.push(t);
            walk(vocab, max_len, prefix, out, terminate_at_limit);
            prefix.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(enumerate_responses(Vocab::new(2, 3).unwrap(), 3).unwrap().len(), 4);
        let v3 = Vocab::new(3, 2).unwrap();
        let all = enumerate_responses(v3, 2).unwrap();
        assert_eq!(all.len(), 7);
        assert_eq!(response_support(v3, 2).unwrap().len(), 7);
        assert_eq!(response_count(v3, 2), 7);
    }

    #[test]
    fn lexicographic_order() {
        let all = enumerate_responses(Vocab::new(3, 2).unwrap(), 2).unwrap();
        assert_eq!(
            all,
            vec![
                vec![0, 0, 2],
                vec![0, 1, 2],
                vec![0, 2],
                vec![1, 0, 2],
                vec![1, 1, 2],
                vec![1, 2],
                vec![2],
            ]
        );
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn support_truncates_at_limit() {
        let s = response_support(Vocab::new(3, 2).unwrap(), 2).unwrap();
        assert!(s.contains(&vec![1, 0]));
        assert!(!s.contains(&vec![1, 0, 2]));
    }

    #[test]
    fn guard() {
        let v = Vocab::new(10, 7).unwrap();
        assert!(matches!(
            enumerate_responses(v, 7),
            Err(LireError::EnumerationTooLarge { .. })
        ));
        assert!(enumerate_responses(v, 6).is_ok());
    }
}
