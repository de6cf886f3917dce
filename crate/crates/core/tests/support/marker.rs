// Synthetic marker-token task: label 1 iff token MARKER appears somewhere in
// the sequence. Filler tokens are drawn uniformly from 2..vocab.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stocktweet::dataset::{Dataset, LabeledSequence};
use stocktweet::embed::EmbeddingMatrix;

pub const MARKER: u32 = 1;

pub fn dataset(n: usize, len: usize, vocab: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let day = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
    let sequences = (0..n)
        .map(|i| {
            let label = u8::from(i % 2 == 0);
            let mut indices: Vec<u32> = (0..len).map(|_| rng.gen_range(2..vocab as u32)).collect();
            if label == 1 {
                let at = rng.gen_range(0..len);
                indices[at] = MARKER;
            }
            LabeledSequence {
                date: day,
                subset: i,
                label,
                indices,
            }
        })
        .collect();
    Dataset {
        padded_len: len,
        vocab_size: vocab,
        sequences,
    }
}

/// Rows uniform in (-scale, scale); row 0 stays zero.
pub fn embedding(vocab: usize, dim: usize, scale: f64, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![0.0; dim]];
    for _ in 1..vocab {
        rows.push((0..dim).map(|_| rng.gen_range(-scale..scale)).collect());
    }
    EmbeddingMatrix::from_rows(rows).unwrap()
}
