//! Score/popularity analytics: percentile buckets, Pearson correlation of
//! bucket means against bucket index, and top/bottom excerpts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTweet {
    pub tweet_id: String,
    pub score: f64,
    pub likes: u64,
    pub replies: u64,
    pub retweets: u64,
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// Reads scored tweets (JSON Lines). Scores may come from any model as long
/// as they lie in `[0, 1]`.
pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoredTweet>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            context: path.display().to_string(),
            line: i + 1,
            message,
        };
        let row: ScoredTweet = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if !(0.0..=1.0).contains(&row.score) {
            return Err(parse_err(format!("score {} outside [0, 1]", row.score)));
        }
        out.push(row);
    }
    Ok(out)
}

pub fn write_scores<'a>(path: impl AsRef<Path>, rows: impl IntoIterator<Item = &'a ScoredTweet>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Ascending by score, ties by tweet id.
fn sorted_by_score(scored: &[ScoredTweet]) -> Vec<&ScoredTweet> {
    let mut sorted: Vec<&ScoredTweet> = scored.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.tweet_id.cmp(&b.tweet_id)));
    sorted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileBucket {
    pub index: usize,
    pub tweet_count: usize,
    pub mean_likes: f64,
    pub mean_replies: f64,
    pub mean_retweets: f64,
    pub dominant_year: i32,
}

/// Sizes of `n_buckets` contiguous runs over `n` items; the remainder goes
/// to the lowest indices.
pub fn bucket_sizes(n: usize, n_buckets: usize) -> Vec<usize> {
    let base = n / n_buckets;
    let extra = n % n_buckets;
    (0..n_buckets).map(|i| base + usize::from(i < extra)).collect()
}

/// Sorts by score and splits into equal-count buckets (sizes differ by at
/// most one). The dominant year is the most frequent one, earliest on ties.
pub fn bucket_by_percentile(scored: &[ScoredTweet], n_buckets: usize) -> Result<Vec<PercentileBucket>> {
    if n_buckets == 0 {
        return Err(Error::InvalidConfig("bucket count must be positive".into()));
    }
    if scored.len() < n_buckets {
        return Err(Error::TooFewTweets {
            required: n_buckets,
            found: scored.len(),
        });
    }
    let sorted = sorted_by_score(scored);
    let mut buckets = Vec::with_capacity(n_buckets);
    let mut start = 0;
    for (i, size) in bucket_sizes(sorted.len(), n_buckets).into_iter().enumerate() {
        let members = &sorted[start..start + size];
        start += size;
        let mean = |f: fn(&ScoredTweet) -> u64| members.iter().map(|t| f(t) as f64).sum::<f64>() / size as f64;
        let mut years: BTreeMap<i32, usize> = BTreeMap::new();
        for t in members {
            *years.entry(t.year).or_default() += 1;
        }
        // BTreeMap iterates years ascending, so `max_by_key` keeping the first
        // maximum needs the reversed iteration.
        let dominant_year = years
            .iter()
            .rev()
            .max_by_key(|(_, &c)| c)
            .map(|(&y, _)| y)
            .expect("bucket is non-empty");
        buckets.push(PercentileBucket {
            index: i + 1,
            tweet_count: size,
            mean_likes: mean(|t| t.likes),
            mean_replies: mean(|t| t.replies),
            mean_retweets: mean(|t| t.retweets),
            dominant_year,
        });
    }
    Ok(buckets)
}

/// Sample Pearson correlation (two-pass, mean-centred).
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::TooFewTweets {
            required: 3,
            found: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("x"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub value: f64,
    /// Set when `|r| = 1`, where the t statistic is infinite and `p = 0` exactly.
    pub exact: bool,
}

/// Two-tailed p-value of `r` under the null of no correlation, from the
/// Student-t statistic with `n - 2` degrees of freedom.
///
/// `P(|T| > t) = I_{df / (df + t^2)}(df / 2, 1 / 2)`, and
/// `df / (df + t^2) = 1 - r^2`.
pub fn p_value(r: f64, n: usize) -> Result<PValue> {
    if n < 3 {
        return Err(Error::TooFewTweets { required: 3, found: n });
    }
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(Error::InvalidConfig(format!("correlation {r} outside [-1, 1]")));
    }
    if r.abs() == 1.0 {
        return Ok(PValue { value: 0.0, exact: true });
    }
    let df = (n - 2) as f64;
    let x = 1.0 - r * r;
    Ok(PValue {
        value: beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0),
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Likes,
    Replies,
    Retweets,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Likes, Measure::Replies, Measure::Retweets];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Likes => "likes",
            Measure::Replies => "replies",
            Measure::Retweets => "retweets",
        }
    }

    fn bucket_mean(self, b: &PercentileBucket) -> f64 {
        match self {
            Measure::Likes => b.mean_likes,
            Measure::Replies => b.mean_replies,
            Measure::Retweets => b.mean_retweets,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub measure: Measure,
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rows: Vec<Correlation>,
}

impl CorrelationReport {
    pub fn get(&self, measure: Measure) -> Option<&Correlation> {
        self.rows.iter().find(|c| c.measure == measure)
    }
}

/// Correlates each popularity measure's bucket means with the bucket index.
pub fn correlate(buckets: &[PercentileBucket]) -> Result<CorrelationReport> {
    if buckets.len() < 3 {
        return Err(Error::TooFewTweets {
            required: 3,
            found: buckets.len(),
        });
    }
    let xs: Vec<f64> = buckets.iter().map(|b| b.index as f64).collect();
    let mut rows = Vec::with_capacity(3);
    for measure in Measure::ALL {
        let ys: Vec<f64> = buckets.iter().map(|b| measure.bucket_mean(b)).collect();
        let r = pearson(&xs, &ys).map_err(|e| match e {
            Error::UndefinedCorrelation(_) => Error::UndefinedCorrelation(measure.as_str()),
            other => other,
        })?;
        let p = p_value(r, buckets.len())?.value;
        rows.push(Correlation {
            measure,
            r,
            p,
            n: buckets.len(),
        });
    }
    Ok(CorrelationReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremes {
    /// Highest scores first.
    pub top: Vec<ScoredTweet>,
    /// Lowest scores first.
    pub bottom: Vec<ScoredTweet>,
}

/// The `k` highest- and `k` lowest-scoring tweets under the bucket ordering.
pub fn extremes(scored: &[ScoredTweet], k: usize) -> Result<Extremes> {
    if scored.len() < 2 * k {
        return Err(Error::TooFewTweets {
            required: 2 * k,
            found: scored.len(),
        });
    }
    let sorted = sorted_by_score(scored);
    Ok(Extremes {
        bottom: sorted[..k].iter().map(|&t| t.clone()).collect(),
        top: sorted[sorted.len() - k..].iter().rev().map(|&t| t.clone()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub percentile: usize,
    pub log_likes: f64,
    pub log_replies: f64,
    pub log_retweets: f64,
    pub dominant_year: i32,
}

/// `log10(mean + 1)` of each measure per bucket.
pub fn plot_data(buckets: &[PercentileBucket]) -> Vec<PlotRow> {
    buckets
        .iter()
        .map(|b| PlotRow {
            percentile: b.index,
            log_likes: (b.mean_likes + 1.0).log10(),
            log_replies: (b.mean_replies + 1.0).log10(),
            log_retweets: (b.mean_retweets + 1.0).log10(),
            dominant_year: b.dominant_year,
        })
        .collect()
}

fn flush<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io("<csv>", e.into_error()))?
        .flush()
        .map_err(|e| Error::io("<csv>", e))
}

/// `index,count,mean_likes,mean_replies,mean_retweets,dominant_year`
pub fn write_buckets_csv<W: Write>(out: W, buckets: &[PercentileBucket]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "count", "mean_likes", "mean_replies", "mean_retweets", "dominant_year"])?;
    for b in buckets {
        w.write_record([
            b.index.to_string(),
            b.tweet_count.to_string(),
            b.mean_likes.to_string(),
            b.mean_replies.to_string(),
            b.mean_retweets.to_string(),
            b.dominant_year.to_string(),
        ])?;
    }
    flush(w)
}

/// `measure,r,p,n`
pub fn write_correlation_csv<W: Write>(out: W, report: &CorrelationReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["measure", "r", "p", "n"])?;
    for c in &report.rows {
        w.write_record([c.measure.as_str().to_owned(), c.r.to_string(), c.p.to_string(), c.n.to_string()])?;
    }
    flush(w)
}

/// `percentile,log_likes,log_replies,log_retweets,dominant_year`
pub fn write_plot_csv<W: Write>(out: W, rows: &[PlotRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["percentile", "log_likes", "log_replies", "log_retweets", "dominant_year"])?;
    for r in rows {
        w.write_record([
            r.percentile.to_string(),
            r.log_likes.to_string(),
            r.log_replies.to_string(),
            r.log_retweets.to_string(),
            r.dominant_year.to_string(),
        ])?;
    }
    flush(w)
}

/// `rank,id,score,likes,replies,retweets,text`. Ranks are `top-1..k` then
/// `bottom-1..k`.
pub fn write_extremes_csv<W: Write>(out: W, ex: &Extremes) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "id", "score", "likes", "replies", "retweets", "text"])?;
    let groups = [("top", &ex.top), ("bottom", &ex.bottom)];
    for (label, rows) in groups {
        for (i, t) in rows.iter().enumerate() {
            w.write_record([
                format!("{label}-{}", i + 1),
                t.tweet_id.clone(),
                t.score.to_string(),
                t.likes.to_string(),
                t.replies.to_string(),
                t.retweets.to_string(),
                sanitize_cell(t.text.as_deref().unwrap_or("")),
            ])?;
        }
    }
    flush(w)
}

/// Prefixes a quote to cells a spreadsheet would read as a formula.
fn sanitize_cell(s: &str) -> String {
    if s.starts_with(['=', '+', '-', '@']) {
        format!("'{s}")
    } else {
        s.to_owned()
    }
}

/// One evaluation-grid row: an author and test accuracy per method.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub author_id: String,
    pub accuracies: BTreeMap<String, f64>,
}

/// Author x method grid of test accuracy percentages with two decimals.
/// Columns follow `methods`; a missing cell is left empty.
pub fn write_grid_csv<W: Write>(out: W, methods: &[String], rows: &[GridRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["author".to_owned()];
    header.extend(methods.iter().cloned());
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.author_id.clone()];
        record.extend(methods.iter().map(|m| {
            row.accuracies
                .get(m)
                .map_or_else(String::new, |acc| format!("{:.2}", acc * 100.0))
        }));
        w.write_record(&record)?;
    }
    flush(w)
}
