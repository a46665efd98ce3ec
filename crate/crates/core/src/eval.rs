//! Compression reports, budget sweeps, token statistics and throughput.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::bpe::{BaseTokenizer, WordCache};
use crate::corpus::{corpus_digest, encode_documents};
use crate::error::{Error, Result};
use crate::json;
use crate::mining::{count_ngrams_encoded, MiningConfig};
use crate::surgery::{replace_with_frequencies, token_frequencies_encoded, BuildMeta, TpeVocabulary};
use crate::TokenId;

/// `1 - new / orig`, zero for an empty corpus.
pub fn compression_rate(orig: u64, new: u64) -> f64 {
    if orig == 0 {
        0.0
    } else {
        1.0 - new as f64 / orig as f64
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Text appended to every document as a task prompt.
    pub prompt: Option<String>,
    /// Count prompt tokens in the per-document lengths.
    pub include_prompt: bool,
    /// Record the encoding wall time in the JSON output.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub docs: usize,
    pub base_tokens: u64,
    pub tpe_tokens: u64,
    pub cr: f64,
    /// `(base_len, tpe_len)` per document.
    pub per_doc: Vec<(usize, usize)>,
    /// `(base_len, tpe_len)` of the prompt, when one was given.
    pub prompt: Option<(usize, usize)>,
    pub prompt_included: bool,
    pub elapsed_encode_seconds: Option<f64>,
}

impl CompressionReport {
    pub fn to_json_string(&self) -> String {
        let mut sections = vec![
            ("docs", self.docs.to_string()),
            ("base_tokens", self.base_tokens.to_string()),
            ("tpe_tokens", self.tpe_tokens.to_string()),
            ("cr", format!("{}", self.cr)),
        ];
        if let Some((b, t)) = self.prompt {
            sections.push(("prompt_base_tokens", b.to_string()));
            sections.push(("prompt_tpe_tokens", t.to_string()));
            sections.push(("prompt_included", self.prompt_included.to_string()));
        }
        if let Some(s) = self.elapsed_encode_seconds {
            sections.push(("elapsed_encode_seconds", format!("{s}")));
        }
        let rows: Vec<String> = self.per_doc.iter().map(|(b, t)| format!("[{b}, {t}]")).collect();
        sections.push(("per_doc", json::block_array(&rows)));
        json::document(&sections)
    }

    /// Short human-readable summary.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "docs         {}\nbase tokens  {}\ntpe tokens   {}\nCR           {:.4}\n",
            self.docs, self.base_tokens, self.tpe_tokens, self.cr
        );
        if let Some(s) = self.elapsed_encode_seconds {
            out.push_str(&format!("encode time  {s:.3}s\n"));
        }
        out
    }
}

/// Encode every document with both the base tokenizer and `v` and compare
/// lengths.
pub fn compression_report<S: AsRef<str> + Sync>(
    v: &TpeVocabulary,
    docs: &[S],
    opts: &ReportOptions,
) -> CompressionReport {
    let prompt = opts.prompt.as_deref().map(|p| {
        let base = v.base().encode(p).len();
        (base, v.encode(p).token_len())
    });
    let extra = match (prompt, opts.include_prompt) {
        (Some(p), true) => p,
        _ => (0, 0),
    };
    let start = Instant::now();
    let per_doc: Vec<(usize, usize)> = docs
        .par_iter()
        .map_init(WordCache::new, |cache, d| {
            let base_ids = v.base().encode_cached(d.as_ref(), cache);
            let tpe = v.encode_base_ids(&base_ids);
            (base_ids.len() + extra.0, tpe.len() + extra.1)
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let base_tokens: u64 = per_doc.iter().map(|p| p.0 as u64).sum();
    let tpe_tokens: u64 = per_doc.iter().map(|p| p.1 as u64).sum();
    CompressionReport {
        docs: docs.len(),
        base_tokens,
        tpe_tokens,
        cr: compression_rate(base_tokens, tpe_tokens),
        per_doc,
        prompt,
        prompt_included: opts.include_prompt && prompt.is_some(),
        elapsed_encode_seconds: opts.timing.then_some(elapsed),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub n_max: usize,
    pub budget: usize,
    /// `None` when the budget cannot be met.
    pub cr: Option<f64>,
    pub inserted: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: Vec<SweepCell>,
    pub corpus_digest: String,
}

impl SweepResult {
    pub fn cell(&self, n_max: usize, budget: usize) -> Option<&SweepCell> {
        self.grid.iter().find(|c| c.n_max == n_max && c.budget == budget)
    }

    pub fn to_json_string(&self) -> String {
        let rows: Vec<String> = self
            .grid
            .iter()
            .map(|c| {
                let cr = c.cr.map_or("null".to_string(), |x| format!("{x}"));
                let note = c.note.as_deref().map_or("null".to_string(), json::string);
                format!(
                    "{{\"n_max\": {}, \"budget\": {}, \"inserted\": {}, \"cr\": {cr}, \"note\": {note}}}",
                    c.n_max, c.budget, c.inserted
                )
            })
            .collect();
        json::document(&[
            ("corpus_digest", json::string(&self.corpus_digest)),
            ("grid", json::block_array(&rows)),
        ])
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("n_max\tbudget\tinserted\tcr\n");
        for c in &self.grid {
            let cr = c.cr.map_or("NA".to_string(), |x| format!("{x}"));
            out.push_str(&format!("{}\t{}\t{}\t{cr}\n", c.n_max, c.budget, c.inserted));
        }
        out
    }
}

/// CR for every `(n_max, budget)` pair. The corpus is base-encoded once and
/// mined once per `n_max`; an infeasible budget is recorded and skipped.
pub fn budget_sweep<S: AsRef<str> + Sync>(
    base: Arc<BaseTokenizer>,
    docs: &[S],
    n_max_list: &[usize],
    budget_list: &[usize],
    min_freq: u64,
) -> Result<SweepResult> {
    if n_max_list.is_empty() || budget_list.is_empty() {
        return Err(Error::Config("sweep needs at least one n_max and one budget".into()));
    }
    let encoded = encode_documents(&base, docs);
    let digest = corpus_digest(docs);
    let freqs = token_frequencies_encoded(base.len(), &encoded);
    let base_total: u64 = encoded.iter().map(|d| d.len() as u64).sum();
    let mut grid = Vec::new();
    for &n_max in n_max_list {
        let max_budget = budget_list.iter().copied().max().unwrap_or(0);
        let cfg = MiningConfig::new(n_max, max_budget, min_freq)?;
        let table = count_ngrams_encoded(&base, &encoded, &cfg)?;
        for &budget in budget_list {
            let meta = BuildMeta {
                n_max,
                budget_m: budget,
                min_freq,
                corpus_digest: digest.clone(),
            };
            let cell = match replace_with_frequencies(Arc::clone(&base), &table, &freqs, budget, Some(meta)) {
                Ok(v) => {
                    let total: u64 = encoded
                        .par_iter()
                        .map(|d| v.encode_base_ids(d).len() as u64)
                        .sum();
                    let inserted = v.insertion().len();
                    SweepCell {
                        n_max,
                        budget,
                        cr: Some(compression_rate(base_total, total)),
                        inserted,
                        note: (inserted < budget).then(|| format!("only {inserted} candidates")),
                    }
                }
                Err(e @ Error::Capacity { .. }) => SweepCell {
                    n_max,
                    budget,
                    cr: None,
                    inserted: 0,
                    note: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            };
            grid.push(cell);
        }
    }
    Ok(SweepResult {
        grid,
        corpus_digest: digest,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenCount {
    pub id: TokenId,
    pub surface: Vec<u8>,
    pub count: u64,
}

/// Most frequent inserted tokens in the layered encoding of `docs`, by
/// count descending then surface ascending.
pub fn token_stats<S: AsRef<str> + Sync>(v: &TpeVocabulary, docs: &[S], top_k: usize) -> Result<Vec<TokenCount>> {
    if top_k == 0 {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    let n = v.vocab().len();
    let counts = docs
        .par_iter()
        .map_init(WordCache::new, |cache, d| v.encode_cached(d.as_ref(), cache).ids)
        .fold(
            || vec![0u64; n],
            |mut acc, ids| {
                for id in ids {
                    acc[id as usize] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let mut rows: Vec<TokenCount> = v
        .insertion()
        .iter()
        .filter(|ins| counts[ins.id as usize] > 0)
        .map(|ins| TokenCount {
            id: ins.id,
            surface: ins.surface.clone(),
            count: counts[ins.id as usize],
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.surface.cmp(&b.surface)));
    rows.truncate(top_k);
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub bytes: usize,
    pub tokens: usize,
    /// Median over the timed runs.
    pub seconds: f64,
    pub tokens_per_sec: f64,
}

/// Prefix of `pool` cycled to exactly `len` bytes, cut back to a char
/// boundary.
pub fn text_of_size(pool: &str, len: usize) -> String {
    if pool.is_empty() || len == 0 {
        return String::new();
    }
    let mut out = String::with_capacity(len + pool.len());
    while out.len() < len {
        out.push_str(pool);
        out.push('\n');
    }
    let mut cut = len;
    while !out.is_char_boundary(cut) {
        cut -= 1;
    }
    out.truncate(cut);
    out
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Time one `encode` call per run on texts of each size, after a warm-up.
pub fn bench(v: &TpeVocabulary, pool: &str, sizes: &[usize], runs: usize) -> Vec<BenchRow> {
    let runs = runs.max(1);
    sizes
        .iter()
        .map(|&size| {
            let text = text_of_size(pool, size);
            let tokens = v.encode(&text).token_len();
            let mut times: Vec<f64> = (0..runs)
                .map(|_| {
                    let t = Instant::now();
                    let out = v.encode(&text);
                    let dt = t.elapsed().as_secs_f64();
                    std::hint::black_box(out);
                    dt
                })
                .collect();
            let seconds = median(&mut times);
            BenchRow {
                bytes: text.len(),
                tokens,
                seconds,
                tokens_per_sec: if seconds > 0.0 { tokens as f64 / seconds } else { 0.0 },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::tests::toy;
    use crate::mining::TpeCandidate;

    fn heart_rate() -> TpeVocabulary {
        let base = Arc::new(toy(
            &["he", "ar", "hear", "heart", " r", " ra", " rat", " rate", "zq"],
            &[
                ("h", "e"),
                ("a", "r"),
                ("he", "ar"),
                ("hear", "t"),
                (" ", "r"),
                (" r", "a"),
                (" ra", "t"),
                (" rat", "e"),
                ("z", "q"),
            ],
            &[],
        ));
        let id = |s: &str| base.vocab().id(s.as_bytes()).unwrap();
        let cand = TpeCandidate::new(&base, vec![id("heart"), id(" rate")], 1).unwrap();
        TpeVocabulary::assemble(Arc::clone(&base), &[cand], vec![id("zq")], None).unwrap()
    }

    #[test]
    fn repeated_bigram_closed_form() {
        let v = heart_rate();
        for k in 1..20 {
            let doc = "heart rate".repeat(k);
            let r = compression_report(&v, &[doc], &ReportOptions::default());
            assert_eq!(r.per_doc, [(2 * k, k)], "k={k}");
            assert_eq!(r.cr, 0.5);
            // space-separated repeats also pay for k - 1 bare spaces
            let doc = vec!["heart rate"; k].join(" ");
            let r = compression_report(&v, &[doc], &ReportOptions::default());
            assert_eq!(r.per_doc, [(3 * k - 1, 2 * k - 1)], "k={k}");
            assert!((r.cr - k as f64 / (3 * k - 1) as f64).abs() < 1e-12);
        }
        let docs: Vec<String> = (1..=40).map(|_| "heart rate".to_string()).collect();
        let r = compression_report(&v, &docs, &ReportOptions::default());
        assert_eq!((r.base_tokens, r.tpe_tokens), (80, 40));
        assert_eq!(r.cr, 0.5);
    }

    #[test]
    fn zero_hits_and_empty() {
        let v = heart_rate();
        let r = compression_report(&v, &["the art"], &ReportOptions::default());
        assert_eq!(r.cr, 0.0);
        let r = compression_report(&v, &[] as &[&str], &ReportOptions::default());
        assert_eq!((r.docs, r.cr), (0, 0.0));
    }

    #[test]
    fn prompt_excluded_by_default() {
        let v = heart_rate();
        let mut opts = ReportOptions {
            prompt: Some("heart rate".into()),
            ..Default::default()
        };
        let r = compression_report(&v, &["heart rate"], &opts);
        assert_eq!(r.per_doc, [(2, 1)]);
        assert_eq!(r.prompt, Some((2, 1)));
        opts.include_prompt = true;
        let r = compression_report(&v, &["heart rate"], &opts);
        assert_eq!(r.per_doc, [(4, 2)]);
        assert!(r.to_json_string().contains("\"prompt_included\": true"));
    }

    #[test]
    fn stats_rank_repeated_token() {
        let v = heart_rate();
        let docs = ["heart rate heart rate heart rate"];
        let s = token_stats(&v, &docs, 10).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].surface.as_slice(), s[0].count), (&b"heart rate"[..], 3));
        assert!(token_stats(&v, &docs, 0).is_err());
    }

    #[test]
    fn text_sizes() {
        assert_eq!(text_of_size("abc", 7), "abc\nabc");
        assert_eq!(text_of_size("é", 4), "é\n");
        assert_eq!(text_of_size("", 10), "");
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
    }
}
