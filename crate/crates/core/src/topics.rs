//! LDA topic model trained by collapsed Gibbs sampling.
//!
//! Per-tweet topic distributions inferred against a frozen model are used as
//! classifier features.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::{seeded, Rng};
use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub topics: usize,
    /// Document-topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: 500,
            alpha: None,
            beta: 0.01,
            iterations: 200,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics < 1 {
            return Err(Error::InvalidConfig("topic count must be at least 1".into()));
        }
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha.is_finite() && self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig("alpha and beta must be positive".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopicWire", into = "TopicWire")]
pub struct TopicModel {
    topics: usize,
    alpha: f64,
    beta: f64,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// Row-major `|vocab| x topics`.
    word_topic_counts: Vec<u32>,
    topic_totals: Vec<u32>,
    seed: u64,
}

/// A probability vector over topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDistribution {
    pub weights: Vec<f64>,
}

impl TopicDistribution {
    pub fn argmax(&self) -> usize {
        self.weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i)
    }
}

fn columns_match(word_topic: &[u32], totals: &[u32]) -> bool {
    let k_count = totals.len();
    let mut sums = vec![0u64; k_count];
    for row in word_topic.chunks(k_count) {
        for (s, &c) in sums.iter_mut().zip(row) {
            *s += c as u64;
        }
    }
    sums.iter().zip(totals).all(|(&s, &t)| s == t as u64)
}

/// Draws an index with probability proportional to `weights`.
fn draw(rng: &mut Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return k;
        }
    }
    weights.len() - 1
}

impl TopicModel {
    pub fn train<D: AsRef<[String]>>(corpus: &[D], cfg: &LdaConfig) -> Result<Self> {
        cfg.validate()?;
        if corpus.iter().all(|d| d.as_ref().is_empty()) {
            return Err(Error::Empty("topic model corpus"));
        }
        let k_count = cfg.topics;
        let alpha = cfg.alpha();
        let beta = cfg.beta;

        let mut vocab = Vec::new();
        let mut index = HashMap::new();
        let docs: Vec<Vec<u32>> = corpus
            .iter()
            .map(|d| {
                d.as_ref()
                    .iter()
                    .map(|t| {
                        *index.entry(t.clone()).or_insert_with(|| {
                            vocab.push(t.clone());
                            (vocab.len() - 1) as u32
                        })
                    })
                    .collect()
            })
            .collect();
        let v = vocab.len();
        let v_beta = v as f64 * beta;

        let mut rng = seeded(cfg.seed);
        let mut word_topic = vec![0u32; v * k_count];
        let mut totals = vec![0u32; k_count];
        let mut doc_topic: Vec<Vec<u32>> = vec![vec![0; k_count]; docs.len()];
        let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let z: Vec<usize> = doc
                .iter()
                .map(|&w| {
                    let k = rng.random_range(0..k_count);
                    word_topic[w as usize * k_count + k] += 1;
                    totals[k] += 1;
                    doc_topic[d][k] += 1;
                    k
                })
                .collect();
            assignments.push(z);
        }

        let mut weights = vec![0.0; k_count];
        for _ in 0..cfg.iterations {
            for (d, doc) in docs.iter().enumerate() {
                for (i, &w) in doc.iter().enumerate() {
                    let w = w as usize;
                    let old = assignments[d][i];
                    word_topic[w * k_count + old] -= 1;
                    totals[old] -= 1;
                    doc_topic[d][old] -= 1;
                    for (k, weight) in weights.iter_mut().enumerate() {
                        *weight = (doc_topic[d][k] as f64 + alpha) * (word_topic[w * k_count + k] as f64 + beta)
                            / (totals[k] as f64 + v_beta);
                    }
                    let new = draw(&mut rng, &weights);
                    word_topic[w * k_count + new] += 1;
                    totals[new] += 1;
                    doc_topic[d][new] += 1;
                    assignments[d][i] = new;
                }
            }
            debug_assert!(columns_match(&word_topic, &totals));
        }

        let model = TopicModel {
            topics: k_count,
            alpha,
            beta,
            vocab,
            index,
            word_topic_counts: word_topic,
            topic_totals: totals,
            seed: cfg.seed,
        };
        debug_assert!(model.counts_consistent());
        Ok(model)
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn topic_totals(&self) -> &[u32] {
        &self.topic_totals
    }

    /// Per-topic counts for one word; `None` if the word is unseen.
    pub fn word_counts(&self, word: &str) -> Option<&[u32]> {
        let w = *self.index.get(word)? as usize;
        Some(&self.word_topic_counts[w * self.topics..(w + 1) * self.topics])
    }

    /// `topic_totals[k] == Σ_w word_topic_counts[w][k]` for every topic.
    pub fn counts_consistent(&self) -> bool {
        columns_match(&self.word_topic_counts, &self.topic_totals)
    }

    /// Gibbs sampling over one held-out document with the model frozen.
    /// Returns `(n_dk + alpha) / (len + K alpha)` averaged over the final
    /// quarter of sweeps. Unseen tokens are skipped; a document with no known
    /// tokens gets the uniform prior.
    pub fn infer<S: AsRef<str>>(&self, tokens: &[S], iterations: usize, seed: u64) -> TopicDistribution {
        let k_count = self.topics;
        let words: Vec<usize> = tokens
            .iter()
            .filter_map(|t| self.index.get(t.as_ref()).map(|&w| w as usize))
            .collect();
        if words.is_empty() || k_count == 1 {
            return TopicDistribution {
                weights: vec![1.0 / k_count as f64; k_count],
            };
        }
        let iterations = iterations.max(1);
        let v_beta = self.vocab.len() as f64 * self.beta;
        let mut rng = seeded(seed);
        let mut doc_topic = vec![0u32; k_count];
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let k = rng.random_range(0..k_count);
                doc_topic[k] += 1;
                k
            })
            .collect();

        let averaged = (iterations / 4).max(1);
        let denom = words.len() as f64 + k_count as f64 * self.alpha;
        let mut acc = vec![0.0; k_count];
        let mut weights = vec![0.0; k_count];
        for sweep in 0..iterations {
            for (i, &w) in words.iter().enumerate() {
                doc_topic[z[i]] -= 1;
                let row = &self.word_topic_counts[w * k_count..(w + 1) * k_count];
                for (k, weight) in weights.iter_mut().enumerate() {
                    *weight = (doc_topic[k] as f64 + self.alpha) * (row[k] as f64 + self.beta)
                        / (self.topic_totals[k] as f64 + v_beta);
                }
                z[i] = draw(&mut rng, &weights);
                doc_topic[z[i]] += 1;
            }
            if sweep >= iterations - averaged {
                for (a, &c) in acc.iter_mut().zip(&doc_topic) {
                    *a += (c as f64 + self.alpha) / denom;
                }
            }
        }
        for a in &mut acc {
            *a /= averaged as f64;
        }
        TopicDistribution { weights: acc }
    }
}

#[derive(Serialize, Deserialize)]
struct TopicWire {
    version: u32,
    topics: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    vocab: Vec<String>,
    word_topic_counts: Vec<u32>,
    topic_totals: Vec<u32>,
}

impl From<TopicModel> for TopicWire {
    fn from(m: TopicModel) -> Self {
        TopicWire {
            version: FORMAT_VERSION,
            topics: m.topics,
            alpha: m.alpha,
            beta: m.beta,
            seed: m.seed,
            vocab: m.vocab,
            word_topic_counts: m.word_topic_counts,
            topic_totals: m.topic_totals,
        }
    }
}

impl TryFrom<TopicWire> for TopicModel {
    type Error = Error;

    fn try_from(w: TopicWire) -> Result<Self> {
        if w.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported topic model version {}", w.version)));
        }
        if w.topics < 1
            || w.topic_totals.len() != w.topics
            || w.word_topic_counts.len() != w.vocab.len() * w.topics
        {
            return Err(Error::Format("topic model table shapes are inconsistent".into()));
        }
        let mut index = HashMap::new();
        for (i, token) in w.vocab.iter().enumerate() {
            if index.insert(token.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocab entry `{token}`")));
            }
        }
        let model = TopicModel {
            topics: w.topics,
            alpha: w.alpha,
            beta: w.beta,
            vocab: w.vocab,
            index,
            word_topic_counts: w.word_topic_counts,
            topic_totals: w.topic_totals,
            seed: w.seed,
        };
        if !model.counts_consistent() {
            return Err(Error::Format("topic totals do not match word-topic counts".into()));
        }
        Ok(model)
    }
}
