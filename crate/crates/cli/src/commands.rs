use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use authorscore::analysis::{
    bucket_by_percentile, correlate as correlate_buckets, extremes, plot_data, read_scores, write_buckets_csv,
    write_correlation_csv, write_extremes_csv, write_grid_csv, write_plot_csv, write_scores, GridRow, ScoredTweet,
};
use authorscore::classifiers::TrainConfig;
use authorscore::corpus::{filter_corpus, read_tweets, write_tweets, Dictionary, FilterConfig, SplitSet, TokenizedTweet, Tweet};
use authorscore::embeddings::EmbeddingTable;
use authorscore::ngram::Averaging;
use authorscore::rng::derive_seed;
use authorscore::topics::LdaConfig;
use authorscore::trainer::{
    evaluate as evaluate_model, iterative_train, train_characterizer, write_traces, Characterizer, Evaluation,
    IterativeSetup, Method, TrainOptions,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::manifest::{write_atomic, ManifestBuilder, MANIFEST_FILE};
use crate::{
    Classify, CmdResult, CorrelateArgs, EvaluateArgs, ExperimentArgs, Failure, IngestArgs, ModelArgs, ScoreArgs,
    TrainArgs, DATA_DIR_ENV,
};

const MODEL_FILE: &str = "model.json";

/// Resolves an input path against the data directory and checks it exists.
fn input_path(path: &Path) -> CmdResult<PathBuf> {
    let resolved = match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_owned(),
    };
    if !resolved.is_file() {
        return Err(Failure::Usage(format!("input not found: {}", resolved.display())));
    }
    Ok(resolved)
}

fn config_json(args: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).runtime(format!("creating {}", dir.display()))
}

fn write_file(path: &Path, bytes: &[u8], manifest: &mut ManifestBuilder) -> CmdResult {
    write_atomic(path, bytes).runtime(format!("writing {}", path.display()))?;
    manifest.output(path);
    Ok(())
}

fn finish(manifest: ManifestBuilder, path: &Path) -> CmdResult {
    manifest.write(path).runtime(format!("writing {}", path.display()))
}

fn tokenize(tweets: &[Tweet]) -> Vec<TokenizedTweet> {
    // Dictionary counts only matter during ingestion.
    let dictionary = Dictionary::default();
    tweets.iter().map(|t| TokenizedTweet::from_tweet(t, &dictionary)).collect()
}

fn load_embeddings(path: Option<&PathBuf>, manifest: &mut ManifestBuilder) -> CmdResult<Option<EmbeddingTable>> {
    let Some(path) = path else { return Ok(None) };
    let path = input_path(path)?;
    manifest.input(&path);
    EmbeddingTable::load(&path).usage("embeddings").map(Some)
}

fn load_tweets(path: &Path, manifest: &mut ManifestBuilder) -> CmdResult<Vec<Tweet>> {
    let path = input_path(path)?;
    manifest.input(&path);
    read_tweets(&path).usage("corpus")
}

fn model_file(path: &Path) -> CmdResult<PathBuf> {
    let dir_file = path.join(MODEL_FILE);
    if path.is_dir() {
        input_path(&dir_file)
    } else {
        input_path(path)
    }
}

fn load_model(path: &Path, manifest: &mut ManifestBuilder) -> CmdResult<Characterizer> {
    let path = model_file(path)?;
    manifest.input(&path);
    let text = fs::read_to_string(&path).usage(format!("reading {}", path.display()))?;
    serde_json::from_str(&text).usage(format!("model {}", path.display()))
}

/// Keeps tweets the method can score: enough tokens and, for embedding
/// methods, a vector in the table. Returns the number dropped.
fn usable(method: Method, tweets: Vec<TokenizedTweet>, emb: Option<&EmbeddingTable>) -> (Vec<TokenizedTweet>, usize) {
    let before = tweets.len();
    let kept: Vec<_> = tweets
        .into_iter()
        .filter(|t| t.tokens.len() >= method.min_tokens())
        .filter(|t| !method.needs_embeddings() || emb.is_some_and(|e| e.get(&t.tweet_id).is_some()))
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

fn train_options(model: &ModelArgs, seed: u64) -> CmdResult<TrainOptions> {
    let opts = TrainOptions {
        seed,
        lda: LdaConfig {
            topics: model.topics,
            alpha: model.alpha,
            beta: model.beta,
            iterations: model.lda_iterations,
            seed: 0,
        },
        infer_iterations: model.infer_iterations,
        classifier: TrainConfig {
            learning_rate: model.learning_rate,
            epochs: model.epochs,
            batch_size: model.batch_size,
            l2: model.l2,
            seed: 0,
        },
        averaging: if model.geometric {
            Averaging::Geometric
        } else {
            Averaging::Arithmetic
        },
    };
    opts.validate().usage("options")?;
    if !(model.ratio > 0.0 && model.ratio < 1.0) {
        return Err(Failure::Usage(format!("--ratio must lie in (0, 1), got {}", model.ratio)));
    }
    Ok(opts)
}

fn check_embeddings(method: Method, given: bool) -> CmdResult {
    if method.needs_embeddings() && !given {
        return Err(Failure::Usage(format!("method {method} requires --embeddings")));
    }
    Ok(())
}

#[derive(Serialize)]
struct IngestReport<'a> {
    input: usize,
    accepted: usize,
    rejected: &'a BTreeMap<authorscore::corpus::RejectReason, usize>,
}

pub fn ingest(args: &IngestArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start(config_json(args));
    let wordlist = input_path(&args.wordlist).map_err(|_| {
        Failure::Usage(format!("word list not found: {}", args.wordlist.display()))
    })?;
    let cfg = FilterConfig {
        min_words: args.min_words,
        min_dictionary_words: args.min_dictionary_words,
        drop_retweets: !args.keep_retweets,
        drop_media: !args.keep_media,
        require_english: !args.any_language,
        wordlist_path: Some(wordlist.clone()),
    };
    cfg.validate().usage("filter options")?;
    manifest.input(&wordlist);
    let dictionary = Dictionary::load(&wordlist).usage("word list")?;
    let tweets = load_tweets(&args.input, &mut manifest)?;

    let report = filter_corpus(&tweets, &cfg, &dictionary);
    create_dir(&args.out)?;
    let tweets_path = args.out.join("tweets.jsonl");
    write_tweets(&tweets_path, report.accepted.iter().map(|(t, _)| t)).runtime("writing tweets")?;
    manifest.output(&tweets_path);
    let summary = IngestReport {
        input: tweets.len(),
        accepted: report.accepted.len(),
        rejected: &report.rejected,
    };
    let mut json = serde_json::to_vec_pretty(&summary).runtime("report")?;
    json.push(b'\n');
    write_file(&args.out.join("rejects.json"), &json, &mut manifest)?;
    eprintln!("accepted {} of {} tweets", summary.accepted, summary.input);
    for (reason, n) in &report.rejected {
        eprintln!("  rejected {reason}: {n}");
    }
    finish(manifest, &args.out.join(MANIFEST_FILE))
}

const EVAL_HEADER: &str = "author,method,accuracy,acc_pos,acc_neg,true_pos,false_neg,true_neg,false_pos\n";

fn eval_line(author: &str, method: Method, e: &Evaluation) -> String {
    format!(
        "{author},{method},{},{},{},{},{},{},{}\n",
        e.accuracy, e.acc_pos, e.acc_neg, e.true_pos, e.false_neg, e.true_neg, e.false_pos
    )
}

fn by_id(tweets: &[Tweet]) -> HashMap<&str, &Tweet> {
    tweets.iter().map(|t| (t.id.as_str(), t)).collect()
}

fn tweets_jsonl(ids: &[TokenizedTweet], lookup: &HashMap<&str, &Tweet>) -> CmdResult<Vec<u8>> {
    let mut out = Vec::new();
    for t in ids {
        serde_json::to_writer(&mut out, lookup[t.tweet_id.as_str()]).runtime("serializing tweets")?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn train(args: &TrainArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start(config_json(args));
    manifest.seed("seed", args.seed);
    check_embeddings(args.method, args.embeddings.is_some())?;
    if args.iterations.is_some() && args.method.classifier_kind().is_none() {
        return Err(Failure::Usage(format!(
            "--iterations needs a classifier method, got {}",
            args.method
        )));
    }
    let opts = train_options(&args.model, args.seed)?;
    let pos_raw = load_tweets(&args.pos, &mut manifest)?;
    let pool_raw = load_tweets(&args.negpool, &mut manifest)?;
    let emb = load_embeddings(args.embeddings.as_ref(), &mut manifest)?;

    let author_tweets: Vec<Tweet> = pos_raw.iter().filter(|t| t.author_id == args.author).cloned().collect();
    if author_tweets.is_empty() {
        return Err(Failure::Usage(format!("no tweets by author {} in {}", args.author, args.pos.display())));
    }
    let (positives, dropped_pos) = usable(args.method, tokenize(&author_tweets), emb.as_ref());
    let (pool, dropped_pool) = usable(args.method, tokenize(&pool_raw), emb.as_ref());
    if dropped_pos + dropped_pool > 0 {
        eprintln!("skipped {dropped_pos} positive and {dropped_pool} pool tweets unusable by {}", args.method);
    }
    let split = SplitSet::build(&args.author, &positives, &pool, args.model.ratio, args.seed).usage("split")?;

    let (characterizer, traces) = match args.iterations {
        Some(iterations) => {
            let setup = IterativeSetup {
                method: args.method,
                author_id: &args.author,
                train_pos: &split.train_pos,
                negative_pool: &pool,
                test_pos: &split.test_pos,
                test_neg: &split.test_neg,
                iterations,
                resample: args.resample,
            };
            let (c, t) = iterative_train(&setup, &opts, emb.as_ref()).runtime("training")?;
            (c, Some(t))
        }
        None => (
            train_characterizer(args.method, &split, &opts, emb.as_ref()).runtime("training")?,
            None,
        ),
    };
    let eval = evaluate_model(&characterizer, &split.test_pos, &split.test_neg, emb.as_ref()).runtime("evaluation")?;

    create_dir(&args.out)?;
    let model_json = serde_json::to_vec(&characterizer).runtime("serializing model")?;
    write_file(&args.out.join(MODEL_FILE), &model_json, &mut manifest)?;
    let mut lookup = by_id(&author_tweets);
    lookup.extend(by_id(&pool_raw));
    write_file(&args.out.join("test_pos.jsonl"), &tweets_jsonl(&split.test_pos, &lookup)?, &mut manifest)?;
    write_file(&args.out.join("test_neg.jsonl"), &tweets_jsonl(&split.test_neg, &lookup)?, &mut manifest)?;
    if let Some(traces) = traces {
        let mut csv = Vec::new();
        write_traces(&mut csv, &traces).runtime("traces")?;
        write_file(&args.out.join("traces.csv"), &csv, &mut manifest)?;
    }
    let row = format!("{EVAL_HEADER}{}", eval_line(&args.author, args.method, &eval));
    write_file(&args.out.join("evaluation.csv"), row.as_bytes(), &mut manifest)?;
    print!("{row}");
    finish(manifest, &args.out.join(MANIFEST_FILE))
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start(config_json(args));
    let model = load_model(&args.model, &mut manifest)?;
    check_embeddings(model.method, args.embeddings.is_some())?;
    let emb = load_embeddings(args.embeddings.as_ref(), &mut manifest)?;
    let (pos, dropped_pos) = usable(model.method, tokenize(&load_tweets(&args.test_pos, &mut manifest)?), emb.as_ref());
    let (neg, dropped_neg) = usable(model.method, tokenize(&load_tweets(&args.test_neg, &mut manifest)?), emb.as_ref());
    if dropped_pos + dropped_neg > 0 {
        eprintln!("skipped {} unusable test tweets", dropped_pos + dropped_neg);
    }
    let eval = evaluate_model(&model, &pos, &neg, emb.as_ref()).runtime("evaluation")?;
    let row = format!("{EVAL_HEADER}{}", eval_line(&model.author_id, model.method, &eval));
    print!("{row}");
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_file(&out.join("evaluation.csv"), row.as_bytes(), &mut manifest)?;
        finish(manifest, &out.join(MANIFEST_FILE))?;
    }
    Ok(())
}

pub fn score(args: &ScoreArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start(config_json(args));
    let model = load_model(&args.model, &mut manifest)?;
    check_embeddings(model.method, args.embeddings.is_some())?;
    let emb = load_embeddings(args.embeddings.as_ref(), &mut manifest)?;
    let tweets = load_tweets(&args.input, &mut manifest)?;
    let tokenized = tokenize(&tweets);

    let mut rows = Vec::with_capacity(tweets.len());
    let (mut too_short, mut no_vector) = (0usize, 0usize);
    for (tweet, tok) in tweets.iter().zip(&tokenized) {
        if tok.tokens.len() < model.method.min_tokens() {
            too_short += 1;
            continue;
        }
        if model.method.needs_embeddings() && emb.as_ref().is_some_and(|e| e.get(&tweet.id).is_none()) {
            no_vector += 1;
            continue;
        }
        let score = model.score(tok, emb.as_ref()).runtime(format!("scoring {}", tweet.id))?;
        rows.push(ScoredTweet {
            tweet_id: tweet.id.clone(),
            score,
            likes: tweet.likes,
            replies: tweet.replies,
            retweets: tweet.retweets,
            year: tweet.year(),
            text: Some(tweet.text.clone()),
        });
    }
    eprintln!(
        "scored {} of {} tweets ({too_short} too short, {no_vector} without embeddings)",
        rows.len(),
        tweets.len()
    );
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_scores(&args.out, &rows).runtime("writing scores")?;
    manifest.output(&args.out);
    let mut manifest_path = args.out.clone().into_os_string();
    manifest_path.push(".manifest.json");
    finish(manifest, Path::new(&manifest_path))
}

pub fn correlate(args: &CorrelateArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start(config_json(args));
    let path = input_path(&args.scores)?;
    manifest.input(&path);
    let scored = read_scores(&path).usage("scores")?;
    let buckets = bucket_by_percentile(&scored, args.buckets).usage("bucketing")?;
    let report = correlate_buckets(&buckets).runtime("correlation")?;
    let ex = extremes(&scored, args.extremes.min(scored.len() / 2)).runtime("extremes")?;

    create_dir(&args.out)?;
    let mut csv = Vec::new();
    write_buckets_csv(&mut csv, &buckets).runtime("buckets")?;
    write_file(&args.out.join("buckets.csv"), &csv, &mut manifest)?;
    csv.clear();
    write_correlation_csv(&mut csv, &report).runtime("correlation")?;
    write_file(&args.out.join("correlation.csv"), &csv, &mut manifest)?;
    csv.clear();
    write_plot_csv(&mut csv, &plot_data(&buckets)).runtime("plot data")?;
    write_file(&args.out.join("plotdata.csv"), &csv, &mut manifest)?;
    csv.clear();
    write_extremes_csv(&mut csv, &ex).runtime("extremes")?;
    write_file(&args.out.join("extremes.csv"), &csv, &mut manifest)?;
    for c in &report.rows {
        eprintln!("{}: r = {:.4}, p = {:.3e} (n = {})", c.measure.as_str(), c.r, c.p, c.n);
    }
    finish(manifest, &args.out.join(MANIFEST_FILE))
}

/// FNV-1a, so an author's seed does not depend on which other authors run.
fn author_stream(author: &str) -> u64 {
    author
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub fn experiment(args: &ExperimentArgs) -> CmdResult {
    let mut manifest = ManifestBuilder::start(config_json(args));
    manifest.seed("seed", args.seed);
    if args.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let methods: Vec<Method> = if args.methods.is_empty() {
        Method::ALL
            .into_iter()
            .filter(|m| args.embeddings.is_some() || !m.needs_embeddings())
            .collect()
    } else {
        args.methods.clone()
    };
    for &m in &methods {
        check_embeddings(m, args.embeddings.is_some())?;
    }
    let opts = train_options(&args.model, args.seed)?;
    let corpus = load_tweets(&args.corpus, &mut manifest)?;
    let pool_raw = match &args.negpool {
        Some(p) => load_tweets(p, &mut manifest)?,
        None => corpus.clone(),
    };
    let emb = load_embeddings(args.embeddings.as_ref(), &mut manifest)?;

    let authors: Vec<String> = if args.authors.is_empty() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &corpus {
            *counts.entry(&t.author_id).or_default() += 1;
        }
        counts
            .into_iter()
            .filter(|&(_, n)| n >= args.min_tweets)
            .map(|(a, _)| a.to_owned())
            .collect()
    } else {
        let unique: BTreeSet<&String> = args.authors.iter().collect();
        if unique.len() != args.authors.len() {
            return Err(Failure::Usage("--authors lists an author twice".into()));
        }
        args.authors.clone()
    };
    if authors.is_empty() {
        return Err(Failure::Usage("no authors to evaluate".into()));
    }
    for a in &authors {
        let seed = derive_seed(args.seed, author_stream(a));
        manifest.seed(&format!("author:{a}"), seed);
    }

    let corpus_tok = tokenize(&corpus);
    let pool_tok = tokenize(&pool_raw);
    let cells: Vec<(&str, Method)> = authors
        .iter()
        .flat_map(|a| methods.iter().map(move |&m| (a.as_str(), m)))
        .collect();
    let run_cell = |&(author, method): &(&str, Method)| -> Result<Evaluation, String> {
        let seed = derive_seed(args.seed, author_stream(author));
        let mine: Vec<TokenizedTweet> = corpus_tok.iter().filter(|t| t.author_id == author).cloned().collect();
        let (positives, _) = usable(method, mine, emb.as_ref());
        let (pool, _) = usable(method, pool_tok.clone(), emb.as_ref());
        let split = SplitSet::build(author, &positives, &pool, args.model.ratio, seed).map_err(|e| e.to_string())?;
        let opts = TrainOptions { seed, ..opts.clone() };
        let model = train_characterizer(method, &split, &opts, emb.as_ref()).map_err(|e| e.to_string())?;
        evaluate_model(&model, &split.test_pos, &split.test_neg, emb.as_ref()).map_err(|e| e.to_string())
    };
    let thread_pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .runtime("thread pool")?;
    let results: Vec<Result<Evaluation, String>> = thread_pool.install(|| cells.par_iter().map(run_cell).collect());

    let mut evaluations = String::from(EVAL_HEADER);
    let mut rows: Vec<GridRow> = authors
        .iter()
        .map(|a| GridRow {
            author_id: a.clone(),
            accuracies: BTreeMap::new(),
        })
        .collect();
    for ((author, method), result) in cells.iter().zip(results) {
        let eval = result.map_err(|e| Failure::Runtime(format!("{author} / {method}: {e}")))?;
        evaluations.push_str(&eval_line(author, *method, &eval));
        let row = rows.iter_mut().find(|r| r.author_id == *author).expect("author row exists");
        row.accuracies.insert(method.as_str().to_owned(), eval.accuracy);
    }

    create_dir(&args.out)?;
    let columns: Vec<String> = methods.iter().map(|m| m.as_str().to_owned()).collect();
    let mut grid = Vec::new();
    write_grid_csv(&mut grid, &columns, &rows).runtime("grid")?;
    write_file(&args.out.join("grid.csv"), &grid, &mut manifest)?;
    write_file(&args.out.join("evaluations.csv"), evaluations.as_bytes(), &mut manifest)?;
    std::io::stdout().write_all(&grid).runtime("stdout")?;
    finish(manifest, &args.out.join(MANIFEST_FILE))
}
