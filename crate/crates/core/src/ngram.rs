//! Unigram and bigram frequency models with add-one smoothing.
//!
//! Bigram estimates back off to the unigram estimate when the context word
//! was never seen. Both class models of an author share one smoothing
//! denominator `V* = |vocab_pos ∪ vocab_neg|` so their probabilities are
//! comparable.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

const FORMAT_VERSION: u32 = 1;

/// How per-position probabilities are combined into a tweet probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NgramWire", into = "NgramWire")]
pub struct NgramModel {
    order: usize,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    unigram_counts: Vec<u64>,
    bigram_counts: HashMap<(u32, u32), u64>,
    total_tokens: u64,
}

impl NgramModel {
    /// Counts n-grams within each tweet; no n-gram spans two tweets and no
    /// boundary markers are added.
    pub fn build<D: AsRef<[String]>>(train: &[D], order: usize) -> Result<Self> {
        check_order(order)?;
        if train.iter().all(|d| d.as_ref().is_empty()) {
            return Err(Error::Empty("n-gram training set"));
        }
        let mut model = NgramModel {
            order,
            vocab: Vec::new(),
            index: HashMap::new(),
            unigram_counts: Vec::new(),
            bigram_counts: HashMap::new(),
            total_tokens: 0,
        };
        for doc in train {
            let ids: Vec<u32> = doc.as_ref().iter().map(|t| model.intern(t)).collect();
            for &id in &ids {
                model.unigram_counts[id as usize] += 1;
            }
            model.total_tokens += ids.len() as u64;
            if order == 2 {
                for pair in ids.windows(2) {
                    *model.bigram_counts.entry((pair[0], pair[1])).or_default() += 1;
                }
            }
        }
        Ok(model)
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.vocab.len() as u32;
        self.index.insert(token.to_owned(), id);
        self.vocab.push(token.to_owned());
        self.unigram_counts.push(0);
        id
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn unigram_count(&self, token: &str) -> u64 {
        self.index.get(token).map_or(0, |&i| self.unigram_counts[i as usize])
    }

    pub fn bigram_count(&self, first: &str, second: &str) -> u64 {
        match (self.index.get(first), self.index.get(second)) {
            (Some(&a), Some(&b)) => self.bigram_counts.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Add-one estimate of `token` after `context` (empty for unigrams).
    pub fn token_prob<S: AsRef<str>>(&self, context: &[S], token: &str, shared_vocab: usize) -> f64 {
        let v = shared_vocab as f64;
        if let [ctx] = context {
            let ctx = ctx.as_ref();
            let ctx_count = self.unigram_count(ctx);
            if ctx_count > 0 {
                return (self.bigram_count(ctx, token) as f64 + 1.0) / (ctx_count as f64 + v);
            }
        }
        (self.unigram_count(token) as f64 + 1.0) / (self.total_tokens as f64 + v)
    }

    /// Mean probability over every n-gram position of the tweet.
    pub fn avg_prob<S: AsRef<str>>(&self, tokens: &[S], shared_vocab: usize, averaging: Averaging) -> Result<f64> {
        if tokens.len() < self.order {
            return Err(Error::TooShort {
                len: tokens.len(),
                required: self.order,
            });
        }
        if tokens.is_empty() {
            return Err(Error::TooShort { len: 0, required: 1 });
        }
        let probs = tokens
            .windows(self.order)
            .map(|w| self.token_prob(&w[..self.order - 1], w[self.order - 1].as_ref(), shared_vocab));
        let n = (tokens.len() + 1 - self.order) as f64;
        Ok(match averaging {
            Averaging::Arithmetic => probs.sum::<f64>() / n,
            Averaging::Geometric => (probs.map(f64::ln).sum::<f64>() / n).exp(),
        })
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 1 || order == 2 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("n-gram order must be 1 or 2, got {order}")))
    }
}

/// `|vocab_a ∪ vocab_b|`, at least 1.
pub fn shared_vocab_size(a: &NgramModel, b: &NgramModel) -> usize {
    let union: HashSet<&str> = a.vocab.iter().chain(&b.vocab).map(String::as_str).collect();
    union.len().max(1)
}

/// Positive and negative models for one author.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramPair {
    pub positive: NgramModel,
    pub negative: NgramModel,
    pub shared_vocab: usize,
    #[serde(default)]
    pub averaging: Averaging,
}

impl NgramPair {
    pub fn new(positive: NgramModel, negative: NgramModel) -> Result<Self> {
        if positive.order != negative.order {
            return Err(Error::InvalidConfig(format!(
                "order mismatch: {} vs {}",
                positive.order, negative.order
            )));
        }
        let shared_vocab = shared_vocab_size(&positive, &negative);
        Ok(NgramPair {
            positive,
            negative,
            shared_vocab,
            averaging: Averaging::Arithmetic,
        })
    }

    pub fn train<D: AsRef<[String]>>(train_pos: &[D], train_neg: &[D], order: usize) -> Result<Self> {
        NgramPair::new(NgramModel::build(train_pos, order)?, NgramModel::build(train_neg, order)?)
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn order(&self) -> usize {
        self.positive.order
    }

    /// Characterization score: average probability under the author's model.
    pub fn score<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        self.positive.avg_prob(tokens, self.shared_vocab, self.averaging)
    }

    /// Positive iff the author's model gives a strictly higher average probability.
    pub fn classify<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Label> {
        let pos = self.positive.avg_prob(tokens, self.shared_vocab, self.averaging)?;
        let neg = self.negative.avg_prob(tokens, self.shared_vocab, self.averaging)?;
        Ok(Label::from_bool(pos > neg))
    }
}

#[derive(Serialize, Deserialize)]
struct NgramWire {
    version: u32,
    order: usize,
    vocab: Vec<String>,
    unigram_counts: Vec<u64>,
    /// `[first index, second index, count]`, sorted.
    bigram_counts: Vec<[u64; 3]>,
}

impl From<NgramModel> for NgramWire {
    fn from(model: NgramModel) -> Self {
        let mut bigram_counts: Vec<[u64; 3]> = model
            .bigram_counts
            .iter()
            .map(|(&(a, b), &c)| [a as u64, b as u64, c])
            .collect();
        bigram_counts.sort_unstable();
        NgramWire {
            version: FORMAT_VERSION,
            order: model.order,
            vocab: model.vocab,
            unigram_counts: model.unigram_counts,
            bigram_counts,
        }
    }
}

impl TryFrom<NgramWire> for NgramModel {
    type Error = Error;

    fn try_from(wire: NgramWire) -> Result<Self> {
        if wire.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported n-gram model version {}", wire.version)));
        }
        check_order(wire.order)?;
        if wire.vocab.len() != wire.unigram_counts.len() {
            return Err(Error::Format("vocab and unigram_counts lengths differ".into()));
        }
        let mut index = HashMap::new();
        for (i, token) in wire.vocab.iter().enumerate() {
            if index.insert(token.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocab entry `{token}`")));
            }
        }
        let n = wire.vocab.len() as u64;
        let mut bigram_counts = HashMap::new();
        for [a, b, c] in wire.bigram_counts {
            if a >= n || b >= n {
                return Err(Error::Format(format!("bigram index out of range: ({a}, {b})")));
            }
            bigram_counts.insert((a as u32, b as u32), c);
        }
        let total_tokens = wire.unigram_counts.iter().sum();
        Ok(NgramModel {
            order: wire.order,
            vocab: wire.vocab,
            index,
            unigram_counts: wire.unigram_counts,
            bigram_counts,
            total_tokens,
        })
    }
}
