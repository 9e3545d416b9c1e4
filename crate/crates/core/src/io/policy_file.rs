use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{LireError, Result};
use crate::policy::{ParamTensor, Policy, Vocab};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDoc {
    format: String,
    vocab_size: usize,
    query_classes: usize,
    max_len: usize,
    params: Vec<f64>,
}

const FORMAT: &str = "lire-policy/v1";

/// JSON document with the header and row-major `[tag][prev][next]` logits,
/// each printed with 17 significant digits.
pub fn policy_to_string(policy: &Policy) -> String {
    let v = policy.vocab();
    let mut out = String::new();
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"format\": \"{FORMAT}\",");
    let _ = writeln!(out, "  \"vocab_size\": {},", v.size);
    let _ = writeln!(out, "  \"query_classes\": {},", policy.query_classes());
    let _ = writeln!(out, "  \"max_len\": {},", v.max_len);
    let _ = writeln!(out, "  \"params\": [");
    let data = policy.params().as_slice();
    for (row_idx, row) in data.chunks(v.size).enumerate() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        let sep = if (row_idx + 1) * v.size < data.len() { "," } else { "" };
        let _ = writeln!(out, "    {}{sep}", cells.join(", "));
    }
    let _ = writeln!(out, "  ]");
    let _ = writeln!(out, "}}");
    out
}

pub fn policy_from_str(text: &str, path: &Path) -> Result<Policy> {
    let parse_err = |line: usize, message: String| LireError::Parse {
        path: PathBuf::from(path),
        line,
        message,
    };
    let doc: PolicyDoc = serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))?;
    if doc.format != FORMAT {
        return Err(parse_err(1, format!("unsupported policy format {:?}, expected {FORMAT:?}", doc.format)));
    }
    let vocab = Vocab::new(doc.vocab_size, doc.max_len).map_err(|e| parse_err(1, e.to_string()))?;
    let params = ParamTensor::from_vec(doc.query_classes, doc.vocab_size, doc.params)
        .map_err(|e| parse_err(1, e.to_string()))?;
    Policy::from_params(vocab, params).map_err(|e| parse_err(1, e.to_string()))
}

pub fn write_policy(path: &Path, policy: &Policy) -> Result<()> {
    super::write_file(path, &policy_to_string(policy))
}

pub fn read_policy(path: &Path) -> Result<Policy> {
    policy_from_str(&super::read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut policy = Policy::random(Vocab::new(4, 5).unwrap(), 3, 7.0, &mut rng);
        policy.params_mut().as_mut_slice()[0] = 1e-300;
        policy.params_mut().as_mut_slice()[1] = -0.1;
        let text = policy_to_string(&policy);
        let back = policy_from_str(&text, Path::new("p.json")).unwrap();
        assert_eq!(back, policy);
        assert_eq!(policy_to_string(&back), text);
    }

    #[test]
    fn bad_documents_report_position() {
        let err = policy_from_str("{\n  \"format\": 3\n}", Path::new("p.json")).unwrap_err();
        assert!(matches!(err, LireError::Parse { line: 2, .. }), "{err}");
        let text = policy_to_string(&Policy::uniform(Vocab::new(3, 2).unwrap(), 1))
            .replace("\"query_classes\": 1", "\"query_classes\": 2");
        assert!(policy_from_str(&text, Path::new("p.json")).is_err());
    }
}
