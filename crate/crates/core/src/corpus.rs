//! Tweet ingestion: normalization, tokenization, filtering, splits and
//! negative sampling.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::{DateTime, Datelike, Utc};
use rand::seq::{index, SliceRandom};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

/// One short text with its author and popularity counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub author_id: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub replies: u64,
    #[serde(default)]
    pub retweets: u64,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default)]
    pub has_media: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

impl Tweet {
    pub fn year(&self) -> i32 {
        self.created_at.year()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedTweet {
    pub tweet_id: String,
    pub author_id: String,
    pub tokens: Vec<String>,
    pub dictionary_word_count: usize,
}

impl TokenizedTweet {
    pub fn from_tweet(tweet: &Tweet, dictionary: &Dictionary) -> Self {
        let tokens = tokenize(&normalize_text(&tweet.text));
        let dictionary_word_count = dictionary.count_words(&tokens);
        TokenizedTweet {
            tweet_id: tweet.id.clone(),
            author_id: tweet.author_id.clone(),
            tokens,
            dictionary_word_count,
        }
    }
}

impl AsRef<[String]> for TokenizedTweet {
    fn as_ref(&self) -> &[String] {
        &self.tokens
    }
}

fn url_pattern() -> &'static Regex {
    static URL: OnceLock<Regex> = OnceLock::new();
    URL.get_or_init(|| Regex::new(r"(?:[a-z][a-z0-9+.\-]*://|www\.)\S*").expect("valid regex"))
}

/// Lowercases, removes URLs, replaces every non-alphanumeric character with
/// a space and collapses whitespace.
///
/// Emoji and symbols count as punctuation here, as do the few uppercase
/// letters with no lowercase mapping.
pub fn normalize_text(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let without_urls = url_pattern().replace_all(&lower, " ");
    let mut out = String::with_capacity(without_urls.len());
    for word in without_urls
        .split(|c: char| !c.is_alphanumeric() || c.is_uppercase())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn tokenize(normalized: &str) -> Vec<String> {
    normalized.split_whitespace().map(str::to_owned).collect()
}

/// Newline-delimited lowercase word list.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    words: HashSet<String>,
}

impl Dictionary {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut words = HashSet::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let word = line.trim();
            if !word.is_empty() {
                words.insert(word.to_lowercase());
            }
        }
        Ok(Dictionary { words })
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Dictionary {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn count_words(&self, tokens: &[String]) -> usize {
        tokens.iter().filter(|t| self.contains(t)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_words: usize,
    pub min_dictionary_words: usize,
    pub drop_retweets: bool,
    pub drop_media: bool,
    pub require_english: bool,
    pub wordlist_path: Option<PathBuf>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_words: 10,
            min_dictionary_words: 5,
            drop_retweets: true,
            drop_media: true,
            require_english: true,
            wordlist_path: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_dictionary_words > self.min_words {
            return Err(Error::InvalidConfig(format!(
                "min_dictionary_words ({}) exceeds min_words ({})",
                self.min_dictionary_words, self.min_words
            )));
        }
        Ok(())
    }
}

/// Why a tweet was dropped. Rules are checked in declaration order and the
/// first failing one is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Retweet,
    Media,
    NonEnglish,
    TooShort,
    TooFewDictionaryWords,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Retweet => "retweet",
            RejectReason::Media => "media",
            RejectReason::NonEnglish => "non_english",
            RejectReason::TooShort => "too_short",
            RejectReason::TooFewDictionaryWords => "too_few_dictionary_words",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Applies the ingestion filters. A tweet needs strictly more than
/// `min_words` tokens.
pub fn filter_tweet(
    tweet: &Tweet,
    cfg: &FilterConfig,
    dictionary: &Dictionary,
) -> std::result::Result<TokenizedTweet, RejectReason> {
    if cfg.drop_retweets && tweet.is_retweet {
        return Err(RejectReason::Retweet);
    }
    if cfg.drop_media && tweet.has_media {
        return Err(RejectReason::Media);
    }
    if cfg.require_english {
        if let Some(lang) = tweet.lang.as_deref() {
            if !lang.eq_ignore_ascii_case("en") {
                return Err(RejectReason::NonEnglish);
            }
        }
    }
    let tokenized = TokenizedTweet::from_tweet(tweet, dictionary);
    if tokenized.tokens.len() <= cfg.min_words {
        return Err(RejectReason::TooShort);
    }
    if tokenized.dictionary_word_count < cfg.min_dictionary_words {
        return Err(RejectReason::TooFewDictionaryWords);
    }
    Ok(tokenized)
}

/// Result of filtering a whole corpus.
#[derive(Debug, Clone, Default)]
pub struct FilterReport {
    pub accepted: Vec<(Tweet, TokenizedTweet)>,
    pub rejected: BTreeMap<RejectReason, usize>,
}

pub fn filter_corpus(tweets: &[Tweet], cfg: &FilterConfig, dictionary: &Dictionary) -> FilterReport {
    let mut report = FilterReport::default();
    for tweet in tweets {
        match filter_tweet(tweet, cfg, dictionary) {
            Ok(tok) => report.accepted.push((tweet.clone(), tok)),
            Err(reason) => *report.rejected.entry(reason).or_default() += 1,
        }
    }
    report
}

/// Reads a JSON Lines corpus. Blank lines are skipped; ids must be unique.
pub fn read_tweets(path: impl AsRef<Path>) -> Result<Vec<Tweet>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut tweets = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let tweet: Tweet = serde_json::from_str(&line).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(tweet.id.clone()) {
            return Err(Error::DuplicateId(tweet.id));
        }
        tweets.push(tweet);
    }
    Ok(tweets)
}

pub fn write_tweets<'a>(path: impl AsRef<Path>, tweets: impl IntoIterator<Item = &'a Tweet>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for tweet in tweets {
        serde_json::to_writer(&mut out, tweet)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Tokenizes tweets without filtering them.
pub fn tokenize_all(tweets: &[Tweet], dictionary: &Dictionary) -> Vec<TokenizedTweet> {
    tweets.iter().map(|t| TokenizedTweet::from_tweet(t, dictionary)).collect()
}

/// Seeded shuffle, then `floor(ratio * n)` items to train and the rest to test.
pub fn split_corpus<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("split ratio {ratio} not in (0, 1)")));
    }
    let n = items.len();
    if n < 2 {
        return Err(Error::CorpusTooSmall { required: 2, found: n });
    }
    // Small epsilon so that e.g. 0.7 * 10 lands on 7 rather than 6.999...
    let n_train = (ratio * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::CorpusTooSmall { required: n + 1, found: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let train = order[..n_train].iter().map(|&i| items[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

/// Draws `n` distinct tweets not written by `exclude_author`, uniformly
/// without replacement.
pub fn sample_negatives(
    pool: &[TokenizedTweet],
    n: usize,
    exclude_author: &str,
    seed: u64,
) -> Result<Vec<TokenizedTweet>> {
    let eligible: Vec<&TokenizedTweet> = pool.iter().filter(|t| t.author_id != exclude_author).collect();
    if eligible.len() < n {
        return Err(Error::InsufficientPool {
            needed: n,
            available: eligible.len(),
        });
    }
    let picks = index::sample(&mut seeded(seed), eligible.len(), n);
    Ok(picks.into_iter().map(|i| eligible[i].clone()).collect())
}

/// Positive train/test partition plus equally sized negative sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSet {
    pub author_id: String,
    pub train_pos: Vec<TokenizedTweet>,
    pub test_pos: Vec<TokenizedTweet>,
    pub train_neg: Vec<TokenizedTweet>,
    pub test_neg: Vec<TokenizedTweet>,
    pub seed: u64,
}

const SPLIT_STREAM: u64 = 1;
const NEGATIVE_STREAM: u64 = 2;

impl SplitSet {
    /// Splits the author's tweets by `ratio` and draws negative train and
    /// test sets of the same sizes from `pool`, disjoint from each other.
    pub fn build(
        author_id: &str,
        positives: &[TokenizedTweet],
        pool: &[TokenizedTweet],
        ratio: f64,
        seed: u64,
    ) -> Result<Self> {
        let (train_pos, test_pos) = split_corpus(positives, ratio, derive_seed(seed, SPLIT_STREAM))?;
        let needed = train_pos.len() + test_pos.len();
        let mut negatives = sample_negatives(pool, needed, author_id, derive_seed(seed, NEGATIVE_STREAM))?;
        let test_neg = negatives.split_off(train_pos.len());
        let split = SplitSet {
            author_id: author_id.to_owned(),
            train_pos,
            test_pos,
            train_neg: negatives,
            test_neg,
            seed,
        };
        split.validate()?;
        Ok(split)
    }

    /// Checks disjointness and that no negative belongs to the author.
    pub fn validate(&self) -> Result<()> {
        let disjoint = |a: &[TokenizedTweet], b: &[TokenizedTweet]| {
            let ids: HashSet<&str> = a.iter().map(|t| t.tweet_id.as_str()).collect();
            b.iter().find(|t| ids.contains(t.tweet_id.as_str())).map(|t| t.tweet_id.clone())
        };
        if let Some(id) = disjoint(&self.train_pos, &self.test_pos) {
            return Err(Error::DuplicateId(id));
        }
        if let Some(id) = disjoint(&self.train_neg, &self.test_neg) {
            return Err(Error::DuplicateId(id));
        }
        if let Some(t) = self
            .train_neg
            .iter()
            .chain(&self.test_neg)
            .find(|t| t.author_id == self.author_id)
        {
            return Err(Error::InvalidConfig(format!(
                "negative tweet `{}` is by the target author",
                t.tweet_id
            )));
        }
        Ok(())
    }
}
