//! Encoded, labeled, padded sequence datasets and their JSON-lines file format.
//!
//! File layout: the first line is a header object
//! `{"kind":"header","padded_len":n,"vocab_size":V,"sequences":m,"seed":s}`,
//! followed by one object per sequence:
//! `{"date":"YYYY-MM-DD","subset":i,"label":0|1,"indices":[...]}`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::textprep::{self, TokenStream, Vocabulary, PAD_INDEX};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub date: NaiveDate,
    pub subset: usize,
    pub label: u8,
    pub indices: Vec<u32>,
}

impl LabeledSequence {
    /// Length before padding.
    pub fn unpadded_len(&self) -> usize {
        self.indices
            .iter()
            .rposition(|&i| i != PAD_INDEX)
            .map_or(0, |p| p + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub kind: String,
    pub padded_len: usize,
    pub vocab_size: usize,
    pub sequences: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub padded_len: usize,
    pub vocab_size: usize,
    pub sequences: Vec<LabeledSequence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub days: usize,
    /// Days that had no label and were left out.
    pub unlabeled_days: usize,
    /// Sum over days of subsets that could not be formed (days shorter than k).
    pub subset_shortfall: usize,
}

/// Split every labeled day stream into `k` subsets, encode each subset and
/// post-pad all of them to the longest encoded length. Every subset carries
/// its day's label.
pub fn build(
    streams: &[TokenStream],
    labels: &BTreeMap<NaiveDate, u8>,
    k: usize,
    vocab: &Vocabulary,
) -> Result<(Dataset, BuildReport)> {
    let mut encoded = Vec::new();
    let mut report = BuildReport {
        days: 0,
        unlabeled_days: 0,
        subset_shortfall: 0,
    };
    for stream in streams {
        let Some(&label) = labels.get(&stream.date) else {
            report.unlabeled_days += 1;
            continue;
        };
        report.days += 1;
        let subsets = textprep::split_into_subsets(stream, k)?;
        report.subset_shortfall += subsets.shortfall;
        for (subset, part) in subsets.parts.iter().enumerate() {
            let indices: Vec<u32> = part.iter().filter_map(|t| vocab.get(t)).collect();
            if indices.is_empty() {
                continue;
            }
            encoded.push(LabeledSequence {
                date: stream.date,
                subset,
                label,
                indices,
            });
        }
    }
    if encoded.is_empty() {
        return Err(Error::Degenerate("no labeled sequences".into()));
    }
    let padded_len = encoded.iter().map(|s| s.indices.len()).max().unwrap_or(0);
    for s in &mut encoded {
        s.indices.resize(padded_len, PAD_INDEX);
    }
    Ok((
        Dataset {
            padded_len,
            vocab_size: vocab.len(),
            sequences: encoded,
        },
        report,
    ))
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn with_sequences(&self, sequences: Vec<LabeledSequence>) -> Dataset {
        Dataset {
            padded_len: self.padded_len,
            vocab_size: self.vocab_size,
            sequences,
        }
    }

    pub fn labels(&self) -> Vec<u8> {
        self.sequences.iter().map(|s| s.label).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.sequences.iter().enumerate() {
            if s.indices.len() != self.padded_len {
                return Err(Error::Dimension(format!(
                    "sequence {i} has length {}, expected {}",
                    s.indices.len(),
                    self.padded_len
                )));
            }
            if let Some(&bad) = s.indices.iter().find(|&&x| x as usize >= self.vocab_size) {
                return Err(Error::Dimension(format!(
                    "sequence {i} has index {bad} outside vocabulary of size {}",
                    self.vocab_size
                )));
            }
            if s.label > 1 {
                return Err(Error::InvalidArgument(format!(
                    "sequence {i} has label {}",
                    s.label
                )));
            }
        }
        Ok(())
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>, seed: Option<u64>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = DatasetHeader {
            kind: "header".into(),
            padded_len: self.padded_len,
            vocab_size: self.vocab_size,
            sequences: self.sequences.len(),
            seed,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        for s in &self.sequences {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<(Dataset, DatasetHeader)> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty dataset file"))?
            .map_err(|e| Error::io(path, e))?;
        let header: DatasetHeader = serde_json::from_str(&first)
            .map_err(|e| Error::parse(path, 1, format!("bad header: {e}")))?;
        if header.kind != "header" {
            return Err(Error::parse(
                path,
                1,
                "first line must be the header object",
            ));
        }
        let mut sequences = Vec::with_capacity(header.sequences);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let seq: LabeledSequence = serde_json::from_str(&line)
                .map_err(|e| Error::parse(path, i as u64 + 2, e.to_string()))?;
            sequences.push(seq);
        }
        if sequences.len() != header.sequences {
            return Err(Error::parse(
                path,
                0,
                format!(
                    "header declares {} sequences, found {}",
                    header.sequences,
                    sequences.len()
                ),
            ));
        }
        let ds = Dataset {
            padded_len: header.padded_len,
            vocab_size: header.vocab_size,
            sequences,
        };
        ds.validate()?;
        Ok((ds, header))
    }
}
