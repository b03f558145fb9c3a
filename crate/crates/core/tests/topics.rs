use authorscore::rng::seeded;
use authorscore::topics::{LdaConfig, TopicModel};
use rand::seq::IndexedRandom;
use rand::Rng;

fn disjoint_corpus(docs: usize, seed: u64) -> (Vec<Vec<String>>, Vec<usize>) {
    let mut rng = seeded(seed);
    let vocab: [Vec<String>; 2] = [
        (0..20).map(|i| format!("x{i}")).collect(),
        (0..20).map(|i| format!("y{i}")).collect(),
    ];
    let mut corpus = Vec::new();
    let mut sources = Vec::new();
    for d in 0..docs {
        let s = d % 2;
        let len = rng.random_range(10..=20);
        corpus.push((0..len).map(|_| vocab[s].choose(&mut rng).unwrap().clone()).collect());
        sources.push(s);
    }
    (corpus, sources)
}

fn cfg(alpha: Option<f64>, seed: u64) -> LdaConfig {
    LdaConfig {
        topics: 2,
        alpha,
        beta: 0.01,
        iterations: 100,
        seed,
    }
}

#[test]
fn topics_recover_disjoint_sources_under_any_seed() {
    let (corpus, sources) = disjoint_corpus(100, 1);
    for seed in 0..4 {
        let model = TopicModel::train(&corpus, &cfg(Some(0.1), seed)).unwrap();
        assert!(model.counts_consistent());
        // Each source must own one topic; which one depends on the seed.
        let topic_of = |d: usize| model.infer(&corpus[d], 30, 7).argmax();
        let t0 = topic_of(0);
        let t1 = topic_of(1);
        assert_ne!(t0, t1, "seed {seed}");
        for (d, &s) in sources.iter().enumerate() {
            assert_eq!(topic_of(d), if s == 0 { t0 } else { t1 }, "seed {seed} doc {d}");
        }
    }
}

#[test]
fn default_prior_caps_document_mass() {
    // alpha = 50 / K smooths heavily: the largest weight a doc of N known
    // tokens can get is (N + alpha) / (N + K alpha).
    let (corpus, _) = disjoint_corpus(40, 2);
    let model = TopicModel::train(&corpus, &cfg(None, 3)).unwrap();
    assert_eq!(model.alpha(), 25.0);
    for doc in &corpus {
        let n = doc.len() as f64;
        let w = model.infer(doc, 30, 4).weights;
        let cap = (n + 25.0) / (n + 50.0);
        assert!(w.iter().all(|&x| x <= cap + 1e-12), "{w:?} cap {cap}");
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn unknown_words_give_uniform_mixture() {
    let (corpus, _) = disjoint_corpus(20, 5);
    let model = TopicModel::train(&corpus, &cfg(Some(0.1), 6)).unwrap();
    assert_eq!(model.infer(&["never", "seen"], 10, 0).weights, vec![0.5, 0.5]);
}

#[test]
fn serialized_model_infers_identically() {
    let (corpus, _) = disjoint_corpus(30, 8);
    let model = TopicModel::train(&corpus, &cfg(Some(0.5), 9)).unwrap();
    let json = serde_json::to_string(&model).unwrap();
    let back: TopicModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.infer(&corpus[3], 20, 1), model.infer(&corpus[3], 20, 1));
}
