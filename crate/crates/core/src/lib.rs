#![forbid(unsafe_code)]
//! Author characterization scores for short texts.
//!
//! Each author gets a binary verification model (author vs. everyone else)
//! that maps a tweet to a score in `[0, 1]`: how representative the text is
//! of that author. Seven model families share one [`trainer::Characterizer`]
//! contract:
//!
//! - word-level LZW dictionaries ([`lzw`]),
//! - unigram / bigram models with add-one smoothing ([`ngram`]),
//! - LDA topic features ([`topics`]) or external document embeddings
//!   ([`embeddings`]) fed to logistic regression or a small MLP
//!   ([`classifiers`]).
//!
//! [`analysis`] turns a scored corpus into percentile buckets and correlates
//! bucket means against popularity counts.

pub mod analysis;
pub mod classifiers;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod lzw;
pub mod ngram;
pub mod rng;
pub mod topics;
pub mod trainer;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Binary verification outcome: written by the target author or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}
