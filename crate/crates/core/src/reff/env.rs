use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ReffError, ToyPolicy};

pub const OPEN: u8 = 0;
pub const CLOSE: u8 = 1;
pub const PAD: u8 = 2;

const TARGET_SEED: u64 = 0x5EED_7A26;

/// Which query pool feeds the training loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuerySource {
    /// Held-out queries; the policy only ever sees its own samples.
    Tst,
    /// Training queries, which also carry target strings for warm starts.
    Trn,
}

impl std::str::FromStr for QuerySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tst" => Ok(QuerySource::Tst),
            "trn" => Ok(QuerySource::Trn),
            other => Err(format!("unknown query source {other:?}; expected `tst` or `trn`")),
        }
    }
}

impl std::fmt::Display for QuerySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QuerySource::Tst => "tst",
            QuerySource::Trn => "trn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyQuery {
    pub id: String,
    /// A well-formed answer, used only by warm starts.
    pub target: Vec<u8>,
}

/// A synthetic tag-wrapping task over sequences of `vocab` symbols.
///
/// Symbol 0 opens a tag, 1 closes it, 2 is padding and the rest are content.
/// A sequence is well formed when it starts with the open tag, ends with the
/// close tag, and everything in between is padding or content with at least
/// one content symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyFormatEnv {
    seq_len: usize,
    vocab: usize,
    pool_size: usize,
}

impl Default for ToyFormatEnv {
    fn default() -> Self {
        ToyFormatEnv {
            seq_len: 6,
            vocab: 8,
            pool_size: 32_000,
        }
    }
}

impl ToyFormatEnv {
    pub fn new(seq_len: usize, vocab: usize, pool_size: usize) -> Result<Self, ReffError> {
        if seq_len < 3 || !(4..=256).contains(&vocab) || pool_size == 0 {
            return Err(ReffError::InvalidConfig(format!(
                "toy task needs seq_len >= 3, 4 <= vocab <= 256 and a nonempty pool, got {seq_len}, {vocab}, {pool_size}"
            )));
        }
        Ok(ToyFormatEnv { seq_len, vocab, pool_size })
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn accepts(&self, sequence: &[u8]) -> bool {
        let n = sequence.len();
        if n != self.seq_len || sequence[0] != OPEN || sequence[n - 1] != CLOSE {
            return false;
        }
        let inner = &sequence[1..n - 1];
        inner.iter().all(|&s| s >= PAD && (s as usize) < self.vocab) && inner.iter().any(|&s| s > PAD)
    }

    /// Checker score: 1 for a well-formed sequence, -1 otherwise.
    pub fn score(&self, sequence: &[u8]) -> f64 {
        if self.accepts(sequence) {
            1.0
        } else {
            -1.0
        }
    }

    /// Probability that `policy` emits a well-formed sequence, by enumerating
    /// every sequence of the policy's shape.
    pub fn exact_ffr(&self, policy: &ToyPolicy) -> Result<f64, ReffError> {
        if policy.seq_len() != self.seq_len || policy.vocab() != self.vocab {
            return Err(ReffError::ShapeMismatch {
                expected: self.seq_len * self.vocab,
                found: policy.logits().len(),
            });
        }
        let table = policy.prob_table();
        let mut seq = vec![0u8; self.seq_len];
        let mut total = 0.0;
        self.enumerate(&table, 0, 1.0, &mut seq, &mut total);
        Ok(total)
    }

    fn enumerate(&self, table: &[Vec<f64>], t: usize, mass: f64, seq: &mut [u8], total: &mut f64) {
        if t == seq.len() {
            if self.accepts(seq) {
                *total += mass;
            }
            return;
        }
        for v in 0..self.vocab {
            seq[t] = v as u8;
            self.enumerate(table, t + 1, mass * table[t][v], seq, total);
        }
    }

    /// The query pool for `source`. Targets are generated from a fixed seed,
    /// so pools are identical across runs.
    pub fn queries(&self, source: QuerySource) -> Vec<ToyQuery> {
        let mut rng = ChaCha8Rng::seed_from_u64(TARGET_SEED ^ source as u64);
        (0..self.pool_size)
            .map(|i| ToyQuery {
                id: format!("{source}-{i:05}"),
                target: self.random_target(&mut rng),
            })
            .collect()
    }

    fn random_target(&self, rng: &mut ChaCha8Rng) -> Vec<u8> {
        loop {
            let mut seq = vec![OPEN; self.seq_len];
            seq[self.seq_len - 1] = CLOSE;
            for s in &mut seq[1..self.seq_len - 1] {
                *s = rng.random_range(PAD..self.vocab as u8);
            }
            if self.accepts(&seq) {
                return seq;
            }
        }
    }
}
