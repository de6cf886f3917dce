//! Trainable word-embedding matrix seeded from GloVe vectors.
//!
//! Row 0 is the padding row: it is always zero and never receives updates.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::textprep::{Vocabulary, PAD_INDEX};
use crate::{Error, Result};

pub const GLOVE_DIM: usize = 200;
/// Range of the uniform initialiser for tokens missing from the GloVe file.
pub const OOV_INIT_RANGE: f64 = 0.05;

/// Row-sparse gradient: row index to gradient vector. Never contains row 0.
pub type RowGrads = BTreeMap<u32, Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab_size: usize,
    dim: usize,
    values: Vec<f64>,
    /// When false, SGD leaves the matrix untouched.
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Vocabulary tokens (excluding padding) found in the file.
    pub found: usize,
    pub total: usize,
    pub ratio: f64,
}

impl EmbeddingMatrix {
    /// Uniform random rows in `[-OOV_INIT_RANGE, OOV_INIT_RANGE]`, padding row zero.
    pub fn random(vocab_size: usize, dim: usize, seed: u64) -> Result<Self> {
        if vocab_size < 1 || dim < 1 {
            return Err(Error::InvalidArgument(
                "embedding needs V >= 1 and p >= 1".into(),
            ));
        }
        let mut rng = seed::rng(seed, "embedding-oov");
        let mut values: Vec<f64> = (0..vocab_size * dim)
            .map(|_| rng.gen_range(-OOV_INIT_RANGE..=OOV_INIT_RANGE))
            .collect();
        values[..dim].fill(0.0);
        Ok(Self {
            vocab_size,
            dim,
            values,
            trainable: true,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension(
                "embedding rows must be non-empty and equal length".into(),
            ));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding entry".into()));
        }
        let vocab_size = rows.len();
        let mut values: Vec<f64> = rows.into_iter().flatten().collect();
        values[..dim].fill(0.0);
        Ok(Self {
            vocab_size,
            dim,
            values,
            trainable: true,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, index: u32) -> &[f64] {
        let i = index as usize;
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, index: u32) -> &mut [f64] {
        let i = index as usize;
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lookup(&self, indices: &[u32]) -> Result<Vec<&[f64]>> {
        indices
            .iter()
            .map(|&i| {
                if (i as usize) < self.vocab_size {
                    Ok(self.row(i))
                } else {
                    Err(Error::Dimension(format!(
                        "index {i} out of range for vocabulary of size {}",
                        self.vocab_size
                    )))
                }
            })
            .collect()
    }

    /// `row -= learning_rate * grad` for each touched row. Row 0 is skipped.
    pub fn apply(&mut self, grads: &RowGrads, learning_rate: f64) {
        if !self.trainable {
            return;
        }
        for (&index, g) in grads {
            if index == PAD_INDEX {
                continue;
            }
            for (w, d) in self.row_mut(index).iter_mut().zip(g) {
                *w -= learning_rate * d;
            }
        }
    }

    /// Binary layout: `u64 V`, `u64 p` (little-endian), then `V*p` row-major
    /// little-endian `f64`.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&(self.vocab_size as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> std::io::Result<Self> {
        let vocab_size = read_u64(r)? as usize;
        let dim = read_u64(r)? as usize;
        let mut values = vec![0.0; vocab_size * dim];
        for v in &mut values {
            *v = read_f64(r)?;
        }
        Ok(Self {
            vocab_size,
            dim,
            values,
            trainable: true,
        })
    }
}

pub(crate) fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Build the embedding matrix for `vocab` from a GloVe text file
/// (`token v1 ... vp` per line).
///
/// Every row is first drawn from the seeded uniform initialiser in index
/// order, then rows for tokens present in the file are overwritten with the
/// pretrained vector (first occurrence wins). Every line of the file must
/// carry exactly `dim` values, whether or not its token is in the vocabulary.
pub fn load_glove(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<(EmbeddingMatrix, Coverage)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut emb = EmbeddingMatrix::random(vocab.len(), dim, seed)?;
    let mut found: HashSet<u32> = HashSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = lineno as u64 + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or_default();
        let index = vocab.get(token).filter(|i| !found.contains(i));
        match index {
            None => {
                let n = fields.filter(|f| !f.is_empty()).count();
                if n != dim {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("expected {dim} values, found {n}"),
                    ));
                }
            }
            Some(i) => {
                let parsed: Vec<f64> = fields
                    .filter(|f| !f.is_empty())
                    .map(|f| {
                        f.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| Error::parse(path, lineno, format!("bad value `{f}`")))
                    })
                    .collect::<Result<_>>()?;
                if parsed.len() != dim {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("expected {dim} values, found {}", parsed.len()),
                    ));
                }
                emb.row_mut(i).copy_from_slice(&parsed);
                found.insert(i);
            }
        }
    }
    let total = vocab.len().saturating_sub(1);
    let coverage = Coverage {
        found: found.len(),
        total,
        ratio: if total == 0 {
            0.0
        } else {
            found.len() as f64 / total as f64
        },
    };
    Ok((emb, coverage))
}

/// Sum per-step input gradients into per-row gradients; repeated indices
/// accumulate and the padding row is dropped.
pub fn accumulate_embedding_grads(indices: &[u32], step_grads: &[Vec<f64>]) -> Result<RowGrads> {
    if indices.len() != step_grads.len() {
        return Err(Error::Dimension(format!(
            "{} indices but {} gradient vectors",
            indices.len(),
            step_grads.len()
        )));
    }
    let mut out = RowGrads::new();
    for (&i, g) in indices.iter().zip(step_grads) {
        accumulate_row(&mut out, i, g);
    }
    Ok(out)
}

pub(crate) fn accumulate_row(out: &mut RowGrads, index: u32, grad: &[f64]) {
    if index == PAD_INDEX {
        return;
    }
    let row = out.entry(index).or_insert_with(|| vec![0.0; grad.len()]);
    for (r, g) in row.iter_mut().zip(grad) {
        *r += g;
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write as _;

    use super::*;
    use crate::textprep::{Vocabulary, PAD_TOKEN};

    fn vocab(tokens: &[&str]) -> Vocabulary {
        let mut all = vec![PAD_TOKEN.to_string()];
        all.extend(tokens.iter().map(|t| t.to_string()));
        Vocabulary::from_tokens(all).unwrap()
    }

    fn glove_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn found_tokens_get_file_vectors() {
        let f = glove_file("apple 0.1 0.2 0.3\nbanana 1 2 3\nzebra 4 5 6\n");
        let v = vocab(&["apple", "kiwi"]);
        let (e, cov) = load_glove(f.path(), &v, 3, 11).unwrap();
        assert_eq!(e.row(1), &[0.1, 0.2, 0.3]);
        assert!(e.row(0).iter().all(|&x| x == 0.0));
        assert!(e.row(2).iter().all(|x| x.abs() <= OOV_INIT_RANGE));
        assert_eq!(cov.found, 1);
        assert_eq!(cov.total, 2);

        let (again, _) = load_glove(f.path(), &v, 3, 11).unwrap();
        assert_eq!(again.row(2), e.row(2));
        let (other, _) = load_glove(f.path(), &v, 3, 12).unwrap();
        assert_ne!(other.row(2), e.row(2));
    }

    #[test]
    fn short_rows_are_rejected_with_line() {
        let f = glove_file("apple 0.1 0.2 0.3\nkiwi 1 2\n");
        let err = load_glove(f.path(), &vocab(&["apple"]), 3, 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(load_glove("/no/such/glove.txt", &vocab(&["a"]), 3, 0).is_err());
    }

    #[test]
    fn lookup_rows() {
        let e = EmbeddingMatrix::from_rows(vec![vec![9.0, 9.0], vec![1.0, 2.0], vec![3.0, 4.0]])
            .unwrap();
        let rows = e.lookup(&[0, 0, 0]).unwrap();
        assert!(rows.iter().all(|r| r == &[0.0, 0.0]));
        assert_eq!(e.lookup(&[2]).unwrap()[0], &[3.0, 4.0]);
        assert_eq!(e.lookup(&[1, 2, 0]).unwrap().concat().len(), 3 * e.dim());
        assert!(e.lookup(&[3]).is_err());
    }

    #[test]
    fn accumulation() {
        let g = accumulate_embedding_grads(
            &[2, 0, 2],
            &[vec![1.0, 1.0], vec![5.0, 5.0], vec![0.5, -1.0]],
        )
        .unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[&2], vec![1.5, 0.0]);
        let g = accumulate_embedding_grads(&[0, 0], &[vec![1.0], vec![2.0]]).unwrap();
        assert!(g.is_empty());
        assert!(accumulate_embedding_grads(&[1], &[]).is_err());
    }

    #[test]
    fn apply_never_touches_padding() {
        let mut e = EmbeddingMatrix::random(4, 3, 1).unwrap();
        let grads = RowGrads::from([(0, vec![1.0; 3]), (1, vec![1.0; 3])]);
        let before = e.row(1).to_vec();
        for _ in 0..50 {
            e.apply(&grads, 0.1);
        }
        assert!(e.row(0).iter().all(|&x| x == 0.0));
        assert!((e.row(1)[0] - (before[0] - 5.0)).abs() < 1e-12);

        e.trainable = false;
        let frozen = e.clone();
        e.apply(&grads, 0.1);
        assert_eq!(e, frozen);
    }

    #[test]
    fn binary_round_trip() {
        let e = EmbeddingMatrix::random(5, 4, 3).unwrap();
        let mut buf = Vec::new();
        e.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 5 * 4 * 8);
        let back = EmbeddingMatrix::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, e);
    }
}
