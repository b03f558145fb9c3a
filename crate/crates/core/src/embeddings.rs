//! Externally produced document embeddings.
//!
//! File format (JSON Lines, UTF-8): a header `{"dim": D, "provider": "..."}`
//! followed by one `{"id": "...", "v": [...]}` object per tweet.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::FeatureMatrix;
use crate::corpus::TokenizedTweet;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    provider: String,
}

#[derive(Serialize, Deserialize)]
struct Row {
    id: String,
    v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    provider: String,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, provider: impl Into<String>) -> Self {
        EmbeddingTable {
            dim,
            provider: provider.into(),
            ids: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(col) = vector.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: self.ids.len(),
                col,
            });
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().map(String::as_str).zip(self.vectors.iter().map(Vec::as_slice))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let context = path.display().to_string();
        let parse_err = |line: usize, message: String| Error::Parse {
            context: context.clone(),
            line,
            message,
        };
        let mut lines = BufReader::new(file).lines().enumerate();
        let header: Header = loop {
            match lines.next() {
                None => return Err(parse_err(1, "missing header".into())),
                Some((i, line)) => {
                    let line = line.map_err(|e| Error::io(path, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line).map_err(|e| parse_err(i + 1, format!("malformed header: {e}")))?;
                }
            }
        };
        if header.dim == 0 {
            return Err(parse_err(1, "header dim must be positive".into()));
        }
        let mut table = EmbeddingTable::new(header.dim, header.provider);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            table.insert(row.id, row.v).map_err(|e| match e {
                Error::DuplicateId(_) | Error::DimensionMismatch { .. } | Error::NonFinite { .. } => {
                    parse_err(i + 1, e.to_string())
                }
                other => other,
            })?;
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let header = Header {
            dim: self.dim,
            provider: self.provider.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        for (id, v) in self.iter() {
            serde_json::to_writer(&mut out, &Row { id: id.to_owned(), v: v.to_vec() })?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinMode {
    /// Any missing id is an error.
    Strict,
    /// Missing ids are dropped and counted.
    Lenient,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JoinReport {
    pub missing: usize,
    pub missing_ids: Vec<String>,
}

/// Looks up each tweet's vector in input order. `labels`, when given, must
/// align with `tweets` and are carried over for kept rows.
pub fn join_features(
    table: &EmbeddingTable,
    tweets: &[TokenizedTweet],
    labels: Option<&[u8]>,
    mode: JoinMode,
) -> Result<(FeatureMatrix, JoinReport)> {
    if let Some(labels) = labels {
        if labels.len() != tweets.len() {
            return Err(Error::DimensionMismatch {
                expected: tweets.len(),
                found: labels.len(),
            });
        }
    }
    let mut values = Vec::with_capacity(tweets.len() * table.dim);
    let mut kept_labels = labels.map(|_| Vec::with_capacity(tweets.len()));
    let mut report = JoinReport::default();
    for (i, tweet) in tweets.iter().enumerate() {
        match table.get(&tweet.tweet_id) {
            Some(v) => {
                values.extend_from_slice(v);
                if let (Some(kept), Some(labels)) = (kept_labels.as_mut(), labels) {
                    kept.push(labels[i]);
                }
            }
            None if mode == JoinMode::Strict => return Err(Error::MissingEmbedding(tweet.tweet_id.clone())),
            None => {
                report.missing += 1;
                report.missing_ids.push(tweet.tweet_id.clone());
            }
        }
    }
    let matrix = FeatureMatrix::new(table.dim, values, kept_labels)?;
    Ok((matrix, report))
}
