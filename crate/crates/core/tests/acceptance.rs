//! Acceptance checks for the library. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails. Thresholds are pinned below.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use authorscore::analysis::{bucket_by_percentile, correlate, p_value, pearson, Measure, ScoredTweet};
use authorscore::classifiers::{BinaryModel, FeatureMatrix, LogisticModel, MlpModel, TrainConfig, MLP_HIDDEN};
use authorscore::corpus::{SplitSet, TokenizedTweet};
use authorscore::lzw::{lzw_score, LzwDictionary};
use authorscore::ngram::{shared_vocab_size, Averaging, NgramModel};
use authorscore::rng::{derive_seed, seeded};
use authorscore::topics::{LdaConfig, TopicModel};
use authorscore::trainer::{evaluate, iterative_train, train_characterizer, IterativeSetup, Method, TrainOptions};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use common::*;

const SEPARATION_MIN_BALANCED_ACC: f64 = 0.90;
const SEPARATION_TIME_LIMIT: Duration = Duration::from_secs(30);
const NGRAM_ORACLE_TOL: f64 = 1e-12;
const NGRAM_ORACLE_CASES: usize = 100;
const GRADIENT_STEP: f64 = 1e-5;
const GRADIENT_MAX_REL_ERR: f64 = 1e-4;
const GRADIENT_BATCHES: usize = 20;
const ITERATIVE_SEEDS: usize = 5;
const ITERATIVE_ROUNDS: usize = 40;
const ITERATIVE_TIME_LIMIT: Duration = Duration::from_secs(300);
const LDA_MASS: f64 = 0.8;
const LDA_MIN_FRACTION: f64 = 0.9;
const LDA_SUM_TOL: f64 = 1e-9;
const PEARSON_TOL: f64 = 1e-12;
const PERMUTATIONS: usize = 100_000;
const PERMUTATION_TOL: f64 = 0.02;
const BUCKET_MIN_R: f64 = 0.9;
const BUCKET_MAX_P: f64 = 0.01;

type Check = fn() -> (bool, String);

fn main() -> ExitCode {
    let checks: [(&str, Check); 7] = [
        ("synthetic-author separation", separation),
        ("lzw score bounds and ordering", lzw_bounds),
        ("n-gram oracle equivalence", ngram_oracle),
        ("gradient checks", gradients),
        ("iterative-sampling direction", iterative_direction),
        ("lda sanity", lda_sanity),
        ("correlation pipeline", correlation_pipeline),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(outcome) => outcome,
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        let status = if pass { "PASS" } else { "FAIL" };
        println!("{status} {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
        failed += usize::from(!pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn separation() -> (bool, String) {
    let start = Instant::now();
    let (vocab_a, vocab_b) = overlapping_vocabularies();
    let a = zipf_author("alpha", &vocab_a, 2000, 11);
    let b = zipf_author("beta", &vocab_b, 2000, 12);
    let opts = TrainOptions::default();
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for (author, pos, pool) in [("alpha", &a, &b), ("beta", &b, &a)] {
        let split = SplitSet::build(author, pos, pool, 0.7, 5).unwrap();
        for method in [Method::Unigram, Method::Bigram, Method::Lzw] {
            let model = train_characterizer(method, &split, &opts, None).unwrap();
            let e = evaluate(&model, &split.test_pos, &split.test_neg, None).unwrap();
            let balanced = (e.acc_pos + e.acc_neg) / 2.0;
            worst = worst.min(balanced);
            parts.push(format!("{author}/{method}={:.4}", balanced));
        }
    }
    let elapsed = start.elapsed();
    let pass = worst >= SEPARATION_MIN_BALANCED_ACC && elapsed < SEPARATION_TIME_LIMIT;
    let detail = format!(
        "min balanced acc {worst:.4} (need >= {SEPARATION_MIN_BALANCED_ACC}); {}; {:.1}s (limit {}s)",
        parts.join(" "),
        elapsed.as_secs_f64(),
        SEPARATION_TIME_LIMIT.as_secs()
    );
    (pass, detail)
}

fn lzw_bounds() -> (bool, String) {
    let (vocab_a, _) = overlapping_vocabularies();
    let train = zipf_author("alpha", &vocab_a, 500, 21);
    let held_out = zipf_author("alpha-test", &vocab_a, 200, 22);
    let disjoint: Vec<TokenizedTweet> = (0..200)
        .map(|i| tweet(format!("d{i}"), "x", (0..12).map(|j| format!("zz{}", (i * 7 + j) % 300)).collect()))
        .collect();
    let dict = LzwDictionary::build(&train).unwrap();
    let score = |t: &TokenizedTweet| lzw_score(&dict, &t.tokens).unwrap();
    let all = train.iter().chain(&held_out).chain(&disjoint);
    let out_of_range = all.filter(|t| !(0.0..=1.0).contains(&score(t))).count();
    let min_verbatim = train.iter().map(score).fold(f64::INFINITY, f64::min);
    let max_disjoint = disjoint.iter().map(score).fold(f64::NEG_INFINITY, f64::max);
    let pass = out_of_range == 0 && min_verbatim > max_disjoint;
    let detail = format!(
        "{out_of_range} scores outside [0,1]; min verbatim {min_verbatim:.4} > max disjoint {max_disjoint:.4}"
    );
    (pass, detail)
}

/// Rescans the raw documents for every query.
fn oracle_avg_prob(docs: &[Vec<String>], order: usize, tokens: &[String], v_star: usize) -> f64 {
    let total: usize = docs.iter().map(Vec::len).sum();
    let count = |w: &str| docs.iter().flatten().filter(|t| t.as_str() == w).count();
    let pair_count = |u: &str, w: &str| {
        docs.iter()
            .flat_map(|d| d.windows(2))
            .filter(|p| p[0] == u && p[1] == w)
            .count()
    };
    let unigram = |w: &str| (count(w) + 1) as f64 / (total + v_star) as f64;
    let probs: Vec<f64> = if order == 1 {
        tokens.iter().map(|w| unigram(w)).collect()
    } else {
        tokens
            .windows(2)
            .map(|p| {
                let c = count(&p[0]);
                if c == 0 {
                    unigram(&p[1])
                } else {
                    (pair_count(&p[0], &p[1]) + 1) as f64 / (c + v_star) as f64
                }
            })
            .collect()
    };
    probs.iter().sum::<f64>() / probs.len() as f64
}

fn random_docs(rng: &mut authorscore::rng::Rng, alphabet: &[&str], max_tokens: usize) -> Vec<Vec<String>> {
    let budget = rng.random_range(1..=max_tokens);
    let mut docs = Vec::new();
    let mut used = 0;
    while used < budget {
        let len = rng.random_range(1..=(budget - used).min(8));
        docs.push((0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())].to_owned()).collect());
        used += len;
    }
    docs
}

fn ngram_oracle() -> (bool, String) {
    let alphabet = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let mut rng = seeded(31);
    let mut worst: f64 = 0.0;
    for case in 0..NGRAM_ORACLE_CASES {
        let order = 1 + case % 2;
        let k = rng.random_range(2..=alphabet.len());
        let pos_docs = random_docs(&mut rng, &alphabet[..k], 50);
        let neg_docs = random_docs(&mut rng, &alphabet[alphabet.len() - k..], 50);
        let pos = NgramModel::build(&pos_docs, order).unwrap();
        let neg = NgramModel::build(&neg_docs, order).unwrap();
        let v_star = shared_vocab_size(&pos, &neg);
        let len = rng.random_range(order..order + 10);
        let query: Vec<String> = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())].to_owned()).collect();
        let got = pos.avg_prob(&query, v_star, Averaging::Arithmetic).unwrap();
        let want = oracle_avg_prob(&pos_docs, order, &query, v_star);
        worst = worst.max((got - want).abs());
    }
    let detail = format!("max |avg_prob - oracle| = {worst:.2e} over {NGRAM_ORACLE_CASES} cases (tol {NGRAM_ORACLE_TOL:e})");
    (worst <= NGRAM_ORACLE_TOL, detail)
}

fn random_batch(rng: &mut authorscore::rng::Rng, dim: usize, rows: usize) -> FeatureMatrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let values: Vec<f64> = (0..rows * dim).map(|_| normal.sample(rng)).collect();
    let labels: Vec<u8> = (0..rows).map(|i| (i % 2) as u8).collect();
    FeatureMatrix::new(dim, values, Some(labels)).unwrap()
}

/// Norm-based relative error between the analytic and central-difference gradients.
fn gradient_error(model: &mut impl BinaryModel, data: &FeatureMatrix, l2: f64) -> f64 {
    let rows: Vec<usize> = (0..data.rows()).collect();
    let (_, analytic) = model.loss_and_gradient(data, &rows, l2);
    let base = model.params();
    let mut numeric = vec![0.0; base.len()];
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + GRADIENT_STEP;
        model.set_params(&p);
        let up = model.loss_and_gradient(data, &rows, l2).0;
        p[i] = base[i] - GRADIENT_STEP;
        model.set_params(&p);
        let down = model.loss_and_gradient(data, &rows, l2).0;
        numeric[i] = (up - down) / (2.0 * GRADIENT_STEP);
    }
    model.set_params(&base);
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn gradients() -> (bool, String) {
    let mut rng = seeded(41);
    let normal = Normal::new(0.0, 0.5).unwrap();
    let (mut worst_lr, mut worst_mlp): (f64, f64) = (0.0, 0.0);
    for batch in 0..GRADIENT_BATCHES {
        let dim = rng.random_range(2..=8);
        let rows = rng.random_range(4..=32);
        let data = random_batch(&mut rng, dim, rows);
        let l2 = [0.0, 1e-4, 1e-2][batch % 3];

        let mut lr = LogisticModel::zeros(dim);
        let p: Vec<f64> = lr.params().iter().map(|_| normal.sample(&mut rng)).collect();
        lr.set_params(&p);
        worst_lr = worst_lr.max(gradient_error(&mut lr, &data, l2));

        // Random biases too: zero biases put dead-layer rows exactly on a ReLU kink.
        let mut mlp = MlpModel::init(dim, &MLP_HIDDEN, derive_seed(41, batch as u64));
        let p: Vec<f64> = mlp.params().iter().map(|_| normal.sample(&mut rng)).collect();
        mlp.set_params(&p);
        worst_mlp = worst_mlp.max(gradient_error(&mut mlp, &data, l2));
    }
    let pass = worst_lr < GRADIENT_MAX_REL_ERR && worst_mlp < GRADIENT_MAX_REL_ERR;
    let detail = format!(
        "max relative error logistic {worst_lr:.2e}, mlp{MLP_HIDDEN:?} {worst_mlp:.2e} over {GRADIENT_BATCHES} batches each (limit {GRADIENT_MAX_REL_ERR:e}, h = {GRADIENT_STEP:e})"
    );
    (pass, detail)
}

fn iterative_direction() -> (bool, String) {
    let start = Instant::now();
    let opts_for = |seed| TrainOptions {
        seed,
        classifier: TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        },
        ..TrainOptions::default()
    };
    let (mut with, mut without) = (Vec::new(), Vec::new());
    for s in 0..ITERATIVE_SEEDS as u64 {
        let fixture = cluster_fixture(1000, 100_000, 16, 500 + s);
        let split = SplitSet::build("target", &fixture.positives, &fixture.pool, 0.7, 600 + s).unwrap();
        for (resample, out) in [(true, &mut with), (false, &mut without)] {
            let setup = IterativeSetup {
                method: Method::EmbMlp,
                author_id: "target",
                train_pos: &split.train_pos,
                negative_pool: &fixture.pool,
                test_pos: &split.test_pos,
                test_neg: &split.test_neg,
                iterations: ITERATIVE_ROUNDS,
                resample,
            };
            let (_, traces) = iterative_train(&setup, &opts_for(700 + s), Some(&fixture.table)).unwrap();
            out.push(traces.last().unwrap().test_acc_neg);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m_with, m_without) = (mean(&with), mean(&without));
    let elapsed = start.elapsed();
    let pass = m_with >= m_without && m_with - m_without > 0.0 && elapsed < ITERATIVE_TIME_LIMIT;
    let detail = format!(
        "final test_acc_neg mean with resampling {m_with:.4} vs without {m_without:.4} (diff {:+.4}) over {ITERATIVE_SEEDS} seeds; per seed with {:?} without {:?}; {:.1}s (limit {}s)",
        m_with - m_without,
        with.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>(),
        without.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>(),
        elapsed.as_secs_f64(),
        ITERATIVE_TIME_LIMIT.as_secs()
    );
    (pass, detail)
}

fn lda_sanity() -> (bool, String) {
    let mut rng = seeded(61);
    let topic_words: [Vec<String>; 2] = [
        (0..30).map(|i| format!("x{i}")).collect(),
        (0..30).map(|i| format!("y{i}")).collect(),
    ];
    let mut docs = Vec::new();
    let mut sources = Vec::new();
    for d in 0..200 {
        let source = d % 2;
        let len = rng.random_range(15..=25);
        docs.push((0..len).map(|_| topic_words[source].choose(&mut rng).unwrap().clone()).collect::<Vec<_>>());
        sources.push(source);
    }
    let cfg = LdaConfig {
        topics: 2,
        alpha: Some(0.1),
        beta: 0.01,
        iterations: 200,
        seed: 62,
    };
    let model = TopicModel::train(&docs, &cfg).unwrap();
    let inferred: Vec<Vec<f64>> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| model.infer(d, 50, derive_seed(63, i as u64)).weights)
        .collect();
    // Topic labels are arbitrary: map each source to its majority topic.
    let majority = |source: usize| {
        let mass: f64 = inferred.iter().zip(&sources).filter(|(_, &s)| s == source).map(|(w, _)| w[0]).sum();
        if mass > inferred.len() as f64 / 4.0 {
            0
        } else {
            1
        }
    };
    let mapping = [majority(0), majority(1)];
    let confident = inferred
        .iter()
        .zip(&sources)
        .filter(|(w, &s)| w[mapping[s]] >= LDA_MASS)
        .count();
    let fraction = confident as f64 / docs.len() as f64;
    let worst_sum = inferred
        .iter()
        .map(|w| (w.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let pass = mapping[0] != mapping[1] && fraction >= LDA_MIN_FRACTION && worst_sum <= LDA_SUM_TOL;
    let detail = format!(
        "{:.1}% of docs put >= {LDA_MASS} on their source topic (need {:.0}%); max |sum - 1| = {worst_sum:.1e}; alpha 0.1, 200 sweeps",
        100.0 * fraction,
        100.0 * LDA_MIN_FRACTION
    );
    (pass, detail)
}

fn oracle_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Two-tailed permutation p-value: share of shuffles of `ys` whose |r|
/// reaches the observed |r|.
fn permutation_p(xs: &[f64], ys: &[f64], permutations: usize, seed: u64) -> f64 {
    let center = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let c: Vec<f64> = v.iter().map(|x| x - m).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        c.into_iter().map(|x| x / norm).collect::<Vec<_>>()
    };
    let cx = center(xs);
    let mut cy = center(ys);
    let observed = cx.iter().zip(&cy).map(|(a, b)| a * b).sum::<f64>().abs();
    let mut rng = seeded(seed);
    let mut hits = 0usize;
    for _ in 0..permutations {
        cy.shuffle(&mut rng);
        let r = cx.iter().zip(&cy).map(|(a, b)| a * b).sum::<f64>().abs();
        if r >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / permutations as f64
}

fn correlation_pipeline() -> (bool, String) {
    let mut rng = seeded(71);
    let normal = Normal::new(0.0, 1.0).unwrap();

    let mut worst_oracle: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(3..200);
        let xs: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng) * 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + normal.sample(&mut rng) * 7.0).collect();
        worst_oracle = worst_oracle.max((pearson(&xs, &ys).unwrap() - oracle_pearson(&xs, &ys)).abs());
    }

    let mut worst_perm: f64 = 0.0;
    let mut perm_parts = Vec::new();
    for (i, slope) in [0.2, 0.1, 0.0].into_iter().enumerate() {
        let xs: Vec<f64> = (0..100).map(|_| normal.sample(&mut rng)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + normal.sample(&mut rng)).collect();
        let r = pearson(&xs, &ys).unwrap();
        let analytic = p_value(r, 100).unwrap().value;
        let empirical = permutation_p(&xs, &ys, PERMUTATIONS, 72 + i as u64);
        worst_perm = worst_perm.max((analytic - empirical).abs());
        perm_parts.push(format!("r={r:.3}: t-test {analytic:.4} vs perm {empirical:.4}"));
    }

    let scored: Vec<ScoredTweet> = (0..10_000)
        .map(|i| {
            let score: f64 = rng.random();
            let base = 40.0 * (2.0 * score).exp();
            let noisy = |scale: f64, rng: &mut authorscore::rng::Rng| (scale * base + normal.sample(rng) * 5.0).max(0.0).round() as u64;
            ScoredTweet {
                tweet_id: format!("{i:05}"),
                score,
                likes: noisy(1.0, &mut rng),
                replies: noisy(0.2, &mut rng),
                retweets: noisy(0.5, &mut rng),
                year: 2015 + (i % 5),
                text: None,
            }
        })
        .collect();
    let buckets = bucket_by_percentile(&scored, 100).unwrap();
    let report = correlate(&buckets).unwrap();
    let bucket_ok = Measure::ALL.iter().all(|&m| {
        let c = report.get(m).unwrap();
        c.r > BUCKET_MIN_R && c.p < BUCKET_MAX_P
    });
    let likes = report.get(Measure::Likes).unwrap();

    let pass = worst_oracle <= PEARSON_TOL && worst_perm <= PERMUTATION_TOL && bucket_ok;
    let detail = format!(
        "pearson vs oracle {worst_oracle:.1e} (tol {PEARSON_TOL:e}); p vs {PERMUTATIONS} permutations max diff {worst_perm:.4} (tol {PERMUTATION_TOL}) [{}]; bucket likes r={:.4} p={:.1e} (need r > {BUCKET_MIN_R}, p < {BUCKET_MAX_P} for all measures)",
        perm_parts.join("; "),
        likes.r,
        likes.p
    );
    (pass, detail)
}
