//! One characterizer contract over every model family, plus the iterative
//! negative-resampling loop and evaluation.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{
    fit_epochs, BinaryModel, Classifier, ClassifierKind, ClassifierPipeline, FeatureMatrix, Standardizer, TrainConfig,
};
use crate::corpus::{sample_negatives, SplitSet, TokenizedTweet};
use crate::embeddings::{join_features, EmbeddingTable, JoinMode};
use crate::lzw::LzwPair;
use crate::ngram::{Averaging, NgramPair};
use crate::rng::derive_seed;
use crate::topics::{LdaConfig, TopicModel};
use crate::{Error, Label, Result};

const FORMAT_VERSION: u32 = 1;

const TOPIC_STREAM: u64 = 10;
const INFER_STREAM: u64 = 11;
const CLASSIFIER_STREAM: u64 = 12;
const NEGATIVE_STREAM: u64 = 1_000;
const EPOCH_STREAM: u64 = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lzw,
    Unigram,
    Bigram,
    LdaLr,
    LdaMlp,
    EmbLr,
    EmbMlp,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Lzw,
        Method::Unigram,
        Method::Bigram,
        Method::LdaLr,
        Method::LdaMlp,
        Method::EmbLr,
        Method::EmbMlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lzw => "lzw",
            Method::Unigram => "unigram",
            Method::Bigram => "bigram",
            Method::LdaLr => "lda_lr",
            Method::LdaMlp => "lda_mlp",
            Method::EmbLr => "emb_lr",
            Method::EmbMlp => "emb_mlp",
        }
    }

    /// Classifier family for feature-based methods.
    pub fn classifier_kind(self) -> Option<ClassifierKind> {
        match self {
            Method::LdaLr | Method::EmbLr => Some(ClassifierKind::Logistic),
            Method::LdaMlp | Method::EmbMlp => Some(ClassifierKind::Mlp),
            _ => None,
        }
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, Method::EmbLr | Method::EmbMlp)
    }

    /// Fewest tokens a tweet needs to be scored.
    pub fn min_tokens(self) -> usize {
        match self {
            Method::Bigram => 2,
            Method::EmbLr | Method::EmbMlp => 0,
            _ => 1,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub seed: u64,
    /// LDA settings for `lda_*` methods; its `seed` is replaced by one derived from `seed`.
    pub lda: LdaConfig,
    pub infer_iterations: usize,
    /// Classifier settings; its `seed` is replaced by one derived from `seed`.
    pub classifier: TrainConfig,
    pub averaging: Averaging,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            seed: 0,
            lda: LdaConfig::default(),
            infer_iterations: 50,
            classifier: TrainConfig::default(),
            averaging: Averaging::Arithmetic,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        self.lda.validate()?;
        self.classifier.validate()?;
        if self.infer_iterations < 1 {
            return Err(Error::InvalidConfig("inference iterations must be at least 1".into()));
        }
        Ok(())
    }

    fn lda_config(&self) -> LdaConfig {
        LdaConfig {
            seed: derive_seed(self.seed, TOPIC_STREAM),
            ..self.lda.clone()
        }
    }

    fn classifier_config(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, CLASSIFIER_STREAM),
            ..self.classifier.clone()
        }
    }
}

/// Topic-feature extraction frozen at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicFeatures {
    pub model: TopicModel,
    pub infer_iterations: usize,
    pub infer_seed: u64,
}

impl TopicFeatures {
    pub fn vector(&self, tokens: &[String]) -> Vec<f64> {
        self.model.infer(tokens, self.infer_iterations, self.infer_seed).weights
    }

    fn matrix(&self, tweets: &[TokenizedTweet], labels: Option<Vec<u8>>) -> Result<FeatureMatrix> {
        let rows: Vec<Vec<f64>> = tweets.iter().map(|t| self.vector(&t.tokens)).collect();
        if rows.is_empty() {
            return FeatureMatrix::new(self.model.topics(), Vec::new(), labels);
        }
        FeatureMatrix::from_rows(&rows, labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CharacterizerModel {
    Lzw(LzwPair),
    Ngram(NgramPair),
    Topic {
        features: TopicFeatures,
        pipeline: ClassifierPipeline,
    },
    Embedding {
        dim: usize,
        pipeline: ClassifierPipeline,
    },
}

/// A trained per-author model exposing `score` in `[0, 1]` and `classify`.
///
/// For LZW and n-gram models `classify` compares the two class models while
/// `score` only consults the author's model; for classifier-backed models
/// `classify` is `score > 0.5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characterizer {
    pub version: u32,
    pub method: Method,
    pub author_id: String,
    pub model: CharacterizerModel,
}

fn embedding_row<'a>(table: Option<&'a EmbeddingTable>, tweet: &TokenizedTweet) -> Result<&'a [f64]> {
    let table = table.ok_or_else(|| Error::InvalidConfig("embedding table required".into()))?;
    table
        .get(&tweet.tweet_id)
        .ok_or_else(|| Error::MissingEmbedding(tweet.tweet_id.clone()))
}

impl Characterizer {
    pub fn score(&self, tweet: &TokenizedTweet, embeddings: Option<&EmbeddingTable>) -> Result<f64> {
        match &self.model {
            CharacterizerModel::Lzw(pair) => pair.score(&tweet.tokens),
            CharacterizerModel::Ngram(pair) => pair.score(&tweet.tokens),
            CharacterizerModel::Topic { features, pipeline } => {
                if tweet.tokens.is_empty() {
                    return Err(Error::TooShort { len: 0, required: 1 });
                }
                pipeline.predict_proba(&features.vector(&tweet.tokens))
            }
            CharacterizerModel::Embedding { pipeline, .. } => pipeline.predict_proba(embedding_row(embeddings, tweet)?),
        }
    }

    pub fn classify(&self, tweet: &TokenizedTweet, embeddings: Option<&EmbeddingTable>) -> Result<Label> {
        match &self.model {
            CharacterizerModel::Lzw(pair) => pair.classify(&tweet.tokens),
            CharacterizerModel::Ngram(pair) => pair.classify(&tweet.tokens),
            _ => Ok(Label::from_bool(self.score(tweet, embeddings)? > 0.5)),
        }
    }
}

fn labels_for(n_pos: usize, n_neg: usize) -> Vec<u8> {
    std::iter::repeat_n(1u8, n_pos).chain(std::iter::repeat_n(0u8, n_neg)).collect()
}

fn embedding_matrix(table: &EmbeddingTable, pos: &[TokenizedTweet], neg: &[TokenizedTweet]) -> Result<FeatureMatrix> {
    let tweets: Vec<TokenizedTweet> = pos.iter().chain(neg).cloned().collect();
    let labels = labels_for(pos.len(), neg.len());
    Ok(join_features(table, &tweets, Some(&labels), JoinMode::Strict)?.0)
}

/// Trains the requested method on the split's training halves.
pub fn train_characterizer(
    method: Method,
    split: &SplitSet,
    opts: &TrainOptions,
    embeddings: Option<&EmbeddingTable>,
) -> Result<Characterizer> {
    let model = match method {
        Method::Lzw => CharacterizerModel::Lzw(LzwPair::train(&split.train_pos, &split.train_neg)?),
        Method::Unigram | Method::Bigram => {
            let order = if method == Method::Unigram { 1 } else { 2 };
            CharacterizerModel::Ngram(
                NgramPair::train(&split.train_pos, &split.train_neg, order)?.with_averaging(opts.averaging),
            )
        }
        Method::LdaLr | Method::LdaMlp => {
            let union: Vec<&[String]> = split
                .train_pos
                .iter()
                .chain(&split.train_neg)
                .map(|t| t.tokens.as_slice())
                .collect();
            let features = TopicFeatures {
                model: TopicModel::train(&union, &opts.lda_config())?,
                infer_iterations: opts.infer_iterations,
                infer_seed: derive_seed(opts.seed, INFER_STREAM),
            };
            let train: Vec<TokenizedTweet> = split.train_pos.iter().chain(&split.train_neg).cloned().collect();
            let data = features.matrix(&train, Some(labels_for(split.train_pos.len(), split.train_neg.len())))?;
            let kind = method.classifier_kind().expect("lda methods have a classifier");
            let pipeline = ClassifierPipeline::train(kind, &data, &opts.classifier_config())?;
            CharacterizerModel::Topic { features, pipeline }
        }
        Method::EmbLr | Method::EmbMlp => {
            let table = embeddings
                .ok_or_else(|| Error::InvalidConfig(format!("method {method} requires an embedding table")))?;
            let data = embedding_matrix(table, &split.train_pos, &split.train_neg)?;
            let kind = method.classifier_kind().expect("embedding methods have a classifier");
            let pipeline = ClassifierPipeline::train(kind, &data, &opts.classifier_config())?;
            CharacterizerModel::Embedding {
                dim: table.dim(),
                pipeline,
            }
        }
    };
    Ok(Characterizer {
        version: FORMAT_VERSION,
        method,
        author_id: split.author_id.clone(),
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub acc_pos: f64,
    pub acc_neg: f64,
    pub true_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
    pub false_pos: usize,
}

/// Accuracy over the concatenated test sets, plus per-class accuracies.
pub fn evaluate(
    characterizer: &Characterizer,
    test_pos: &[TokenizedTweet],
    test_neg: &[TokenizedTweet],
    embeddings: Option<&EmbeddingTable>,
) -> Result<Evaluation> {
    if test_pos.is_empty() || test_neg.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let count_positive = |tweets: &[TokenizedTweet]| -> Result<usize> {
        let mut n = 0;
        for t in tweets {
            if characterizer.classify(t, embeddings)?.is_positive() {
                n += 1;
            }
        }
        Ok(n)
    };
    let true_pos = count_positive(test_pos)?;
    let false_pos = count_positive(test_neg)?;
    let false_neg = test_pos.len() - true_pos;
    let true_neg = test_neg.len() - false_pos;
    Ok(Evaluation {
        accuracy: (true_pos + true_neg) as f64 / (test_pos.len() + test_neg.len()) as f64,
        acc_pos: true_pos as f64 / test_pos.len() as f64,
        acc_neg: true_neg as f64 / test_neg.len() as f64,
        true_pos,
        false_neg,
        true_neg,
        false_pos,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub test_acc_pos: f64,
    pub test_acc_neg: f64,
}

/// Inputs to the iterative-sampling loop. Test sets are fixed up front.
#[derive(Debug, Clone, Copy)]
pub struct IterativeSetup<'a> {
    pub method: Method,
    pub author_id: &'a str,
    pub train_pos: &'a [TokenizedTweet],
    pub negative_pool: &'a [TokenizedTweet],
    pub test_pos: &'a [TokenizedTweet],
    pub test_neg: &'a [TokenizedTweet],
    pub iterations: usize,
    pub resample: bool,
}

/// Negatives used at a given 1-based iteration. Without resampling every
/// iteration reuses the first draw.
pub fn negatives_for_iteration(
    pool: &[TokenizedTweet],
    n: usize,
    author_id: &str,
    seed: u64,
    iteration: usize,
    resample: bool,
) -> Result<Vec<TokenizedTweet>> {
    let draw = if resample { iteration } else { 1 };
    sample_negatives(pool, n, author_id, derive_seed(seed, NEGATIVE_STREAM + draw as u64))
}

enum Featurizer<'a> {
    Topics(TopicFeatures),
    Embeddings(&'a EmbeddingTable),
}

impl Featurizer<'_> {
    fn matrix(&self, pos: &[TokenizedTweet], neg: &[TokenizedTweet]) -> Result<FeatureMatrix> {
        match self {
            Featurizer::Topics(f) => {
                let all: Vec<TokenizedTweet> = pos.iter().chain(neg).cloned().collect();
                f.matrix(&all, Some(labels_for(pos.len(), neg.len())))
            }
            Featurizer::Embeddings(table) => embedding_matrix(table, pos, neg),
        }
    }
}

/// Trains a classifier-backed method for `iterations` rounds, pairing the
/// same positives with a negative sample per round. Parameters carry over
/// between rounds. The standardizer (and topic model, for `lda_*`) is fitted
/// on the first round's data and then frozen.
pub fn iterative_train(
    setup: &IterativeSetup<'_>,
    opts: &TrainOptions,
    embeddings: Option<&EmbeddingTable>,
) -> Result<(Characterizer, Vec<IterationTrace>)> {
    let kind = setup.method.classifier_kind().ok_or_else(|| {
        Error::InvalidConfig(format!("iterative training needs a classifier method, got {}", setup.method))
    })?;
    if setup.iterations < 1 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    if setup.train_pos.is_empty() {
        return Err(Error::Empty("positive training set"));
    }
    let held_out: HashSet<&str> = setup
        .test_neg
        .iter()
        .chain(setup.test_pos)
        .chain(setup.train_pos)
        .map(|t| t.tweet_id.as_str())
        .collect();
    let pool: Vec<TokenizedTweet> = setup
        .negative_pool
        .iter()
        .filter(|t| !held_out.contains(t.tweet_id.as_str()))
        .cloned()
        .collect();
    let n_neg = setup.train_pos.len();
    let draw = |iteration| negatives_for_iteration(&pool, n_neg, setup.author_id, opts.seed, iteration, setup.resample);

    let first_neg = draw(1)?;
    let featurizer = match setup.method {
        Method::LdaLr | Method::LdaMlp => {
            let union: Vec<&[String]> = setup
                .train_pos
                .iter()
                .chain(&first_neg)
                .map(|t| t.tokens.as_slice())
                .collect();
            Featurizer::Topics(TopicFeatures {
                model: TopicModel::train(&union, &opts.lda_config())?,
                infer_iterations: opts.infer_iterations,
                infer_seed: derive_seed(opts.seed, INFER_STREAM),
            })
        }
        _ => Featurizer::Embeddings(embeddings.ok_or_else(|| {
            Error::InvalidConfig(format!("method {} requires an embedding table", setup.method))
        })?),
    };

    let first = featurizer.matrix(setup.train_pos, &first_neg)?;
    let standardizer = Standardizer::fit(&first);
    let test_pos = standardizer.transform(&featurizer.matrix(setup.test_pos, &[])?);
    let test_neg = standardizer.transform(&featurizer.matrix(&[], setup.test_neg)?);
    let cfg = opts.classifier_config();
    let mut classifier = Classifier::init(kind, first.dim(), cfg.seed);

    let mut traces = Vec::with_capacity(setup.iterations);
    let mut current = standardizer.transform(&first);
    for iteration in 1..=setup.iterations {
        if setup.resample && iteration > 1 {
            current = standardizer.transform(&featurizer.matrix(setup.train_pos, &draw(iteration)?)?);
        }
        fit_epochs(
            &mut classifier,
            &current,
            &cfg,
            derive_seed(opts.seed, EPOCH_STREAM + iteration as u64),
        )?;
        let acc_pos = positive_rate(&classifier, &test_pos);
        let acc_neg = 1.0 - positive_rate(&classifier, &test_neg);
        let n_pos = test_pos.rows() as f64;
        let n_neg = test_neg.rows() as f64;
        traces.push(IterationTrace {
            iteration,
            train_acc: classifier.accuracy(&current),
            test_acc: (acc_pos * n_pos + acc_neg * n_neg) / (n_pos + n_neg).max(1.0),
            test_acc_pos: acc_pos,
            test_acc_neg: acc_neg,
        });
    }

    let pipeline = ClassifierPipeline::new(standardizer, classifier);
    let model = match featurizer {
        Featurizer::Topics(features) => CharacterizerModel::Topic { features, pipeline },
        Featurizer::Embeddings(table) => CharacterizerModel::Embedding {
            dim: table.dim(),
            pipeline,
        },
    };
    let characterizer = Characterizer {
        version: FORMAT_VERSION,
        method: setup.method,
        author_id: setup.author_id.to_owned(),
        model,
    };
    Ok((characterizer, traces))
}

fn positive_rate(model: &impl BinaryModel, data: &FeatureMatrix) -> f64 {
    if data.rows() == 0 {
        return 0.0;
    }
    let hits = (0..data.rows()).filter(|&i| model.logit(data.row(i)) > 0.0).count();
    hits as f64 / data.rows() as f64
}

/// Writes `iteration,train_acc,test_acc,test_acc_pos,test_acc_neg` rows.
pub fn write_traces<W: Write>(out: W, traces: &[IterationTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in traces {
        w.serialize(t)?;
    }
    w.flush().map_err(|e| Error::io("<traces>", e))
}
