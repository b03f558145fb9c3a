//! Synthetic fixtures shared by the integration tests.
#![allow(dead_code)]

use authorscore::corpus::TokenizedTweet;
use authorscore::embeddings::EmbeddingTable;
use authorscore::rng::{seeded, Rng};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};

pub fn tweet(id: impl Into<String>, author: &str, tokens: Vec<String>) -> TokenizedTweet {
    TokenizedTweet {
        tweet_id: id.into(),
        author_id: author.into(),
        tokens,
        dictionary_word_count: 0,
    }
}

pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(String::from).collect()
}

/// Two 500-word vocabularies sharing 100 words (20%).
pub fn overlapping_vocabularies() -> (Vec<String>, Vec<String>) {
    let shared: Vec<String> = (0..100).map(|i| format!("s{i}")).collect();
    let mut a = shared.clone();
    let mut b = shared;
    a.extend((0..400).map(|i| format!("a{i}")));
    b.extend((0..400).map(|i| format!("b{i}")));
    (a, b)
}

/// Tweets whose tokens are drawn i.i.d. from a Zipf(1) law over `vocab`
/// after shuffling it, so each author ranks words differently.
pub fn zipf_author(author: &str, vocab: &[String], n: usize, seed: u64) -> Vec<TokenizedTweet> {
    let mut rng = seeded(seed);
    let mut ranked = vocab.to_vec();
    ranked.shuffle(&mut rng);
    let weights: Vec<f64> = (1..=ranked.len()).map(|r| 1.0 / r as f64).collect();
    let dist = WeightedIndex::new(&weights).unwrap();
    (0..n)
        .map(|i| {
            let len = rng.random_range(8..=20);
            let tokens = (0..len).map(|_| ranked[dist.sample(&mut rng)].clone()).collect();
            tweet(format!("{author}-{i}"), author, tokens)
        })
        .collect()
}

/// Draws a point from `N(center, sigma^2 I)`.
pub fn gaussian_point(rng: &mut Rng, center: &[f64], sigma: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).unwrap();
    center.iter().map(|c| c + normal.sample(rng)).collect()
}

/// Fixture for the iterative-sampling experiments: a compact positive
/// cluster and a negative pool mixing many clusters of very unequal size.
pub struct ClusterFixture {
    pub positives: Vec<TokenizedTweet>,
    pub pool: Vec<TokenizedTweet>,
    pub table: EmbeddingTable,
}

pub fn cluster_fixture(n_pos: usize, n_pool: usize, dim: usize, seed: u64) -> ClusterFixture {
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n_clusters = 200;
    // Cluster centers at radius 3 around the positive center (the origin).
    let centers: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| 3.0 * x / norm).collect()
        })
        .collect();
    let weights: Vec<f64> = (1..=n_clusters).map(|r| 1.0 / r as f64).collect();
    let pick = WeightedIndex::new(&weights).unwrap();
    let mut table = EmbeddingTable::new(dim, "synthetic-gaussian");
    let origin = vec![0.0; dim];
    let positives = (0..n_pos)
        .map(|i| {
            let id = format!("pos-{i}");
            table.insert(id.clone(), gaussian_point(&mut rng, &origin, 1.0)).unwrap();
            tweet(id, "target", Vec::new())
        })
        .collect();
    let pool = (0..n_pool)
        .map(|i| {
            let id = format!("neg-{i}");
            let c = &centers[pick.sample(&mut rng)];
            table.insert(id.clone(), gaussian_point(&mut rng, c, 1.0)).unwrap();
            tweet(id, &format!("other-{}", i % 997), Vec::new())
        })
        .collect();
    ClusterFixture { positives, pool, table }
}
