//! Fixture corpora and helpers for driving the `authorscore` binary.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use authorscore::rng::seeded;
use rand::Rng;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_authorscore"));
    cmd.env_remove("AUTHORSCORE_DATA_DIR");
    cmd
}

pub fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stdout: {}", String::from_utf8_lossy(&out.stdout));
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

pub fn ok(cmd: &mut Command) -> Output {
    let out = run(cmd);
    assert!(out.status.success(), "command failed: {:?}", out.status);
    out
}

pub fn wordlist() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/words.txt")
}

fn dictionary_words() -> Vec<String> {
    std::fs::read_to_string(wordlist())
        .unwrap()
        .lines()
        .filter(|w| w.len() >= 3)
        .map(String::from)
        .collect()
}

pub struct CorpusShape {
    pub authors: usize,
    pub tweets_per_author: usize,
    /// Every `retweet_every`-th tweet is flagged as a retweet (0 = none).
    pub retweet_every: usize,
    pub seed: u64,
}

/// Writes a tweets JSONL file and a matching 8-d embeddings file. Authors
/// draw mostly from their own slice of the word list, and likes grow with
/// the share of signature words.
pub fn write_corpus(shape: &CorpusShape, tweets: &Path, embeddings: &Path) {
    let words = dictionary_words();
    let mut rng = seeded(shape.seed);
    let common: Vec<&String> = words.iter().step_by(7).take(150).collect();
    let mut lines = String::new();
    let mut emb = String::from("{\"dim\":8,\"provider\":\"fixture\"}\n");
    let mut n = 0;
    for a in 0..shape.authors {
        let own: Vec<&String> = words.iter().skip(3 + a * 211).step_by(5).take(120).collect();
        for _ in 0..shape.tweets_per_author {
            let len = rng.random_range(12..=22);
            let mut own_hits = 0;
            let text: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.6) {
                        own_hits += 1;
                        own[rng.random_range(0..own.len())].as_str()
                    } else {
                        common[rng.random_range(0..common.len())].as_str()
                    }
                })
                .collect();
            let likes = own_hits * 10 + rng.random_range(0..10);
            let retweet = shape.retweet_every > 0 && n % shape.retweet_every == 0;
            writeln!(
                lines,
                "{{\"id\":\"t{n:05}\",\"author_id\":\"author{a}\",\"text\":\"{} https://t.co/{n}\",\"created_at\":\"{}-06-01T12:00:00Z\",\"likes\":{likes},\"replies\":{},\"retweets\":{},\"is_retweet\":{retweet},\"lang\":\"en\"}}",
                text.join(" "),
                2014 + n % 6,
                likes / 4,
                likes / 2,
            )
            .unwrap();
            let center = if a % 2 == 0 { 1.0 } else { -1.0 };
            let v: Vec<String> = (0..8)
                .map(|d| {
                    let shift = if d == a % 8 { 2.0 } else { 0.0 };
                    format!("{}", center + shift + rng.random_range(-1.0..1.0))
                })
                .collect();
            writeln!(emb, "{{\"id\":\"t{n:05}\",\"v\":[{}]}}", v.join(",")).unwrap();
            n += 1;
        }
    }
    std::fs::write(tweets, lines).unwrap();
    std::fs::write(embeddings, emb).unwrap();
}

pub fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}
