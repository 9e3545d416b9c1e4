//! A tabular bigram policy: decoding, sequence log-probabilities and exact
//! enumeration of the response space.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lire::decode::{greedy_response, sample_response, DecodeConfig};
use lire::enumerate::{response_count, response_support};
use lire::policy::{Policy, Query, Vocab};

fn main() -> lire::Result<()> {
    // Three content tokens plus EOS (id 3); responses hold at most 4 content tokens.
    let vocab = Vocab::new(4, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let policy = Policy::random(vocab, 2, 1.5, &mut rng);
    let query = Query::new(0, 1);

    let greedy = greedy_response(&policy, &query)?;
    println!("greedy   {:?}  log p = {:.4}", greedy.tokens, policy.seq_log_prob(&query, &greedy.tokens)?);

    let cfg = DecodeConfig::sampling(1.0, 7, vocab.max_len);
    let mut sampler = cfg.rng();
    for _ in 0..3 {
        let y = sample_response(&policy, &query, &cfg, &mut sampler)?;
        println!("sample   {:?}  log p = {:.4}", y.tokens, policy.seq_log_prob(&query, &y.tokens)?);
    }

    let support = response_support(vocab, vocab.max_len)?;
    let total: f64 = support
        .iter()
        .map(|y| policy.seq_log_prob(&query, y).map(f64::exp))
        .sum::<lire::Result<f64>>()?;
    println!(
        "{} responses in the support ({} by formula), total probability {total:.15}",
        support.len(),
        response_count(vocab, vocab.max_len)
    );

    let grad = policy.seq_log_prob_grad(&query, &greedy.tokens)?;
    println!("gradient of log p(greedy): max |entry| = {:.4}", grad.max_abs());
    Ok(())
}
