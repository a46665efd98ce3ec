//! N-gram candidate mining over base-token streams.
//!
//! Counting is level-wise: an N-gram can only reach `min_freq` if both its
//! (N-1)-gram prefix and suffix do, so level N only probes positions whose
//! prefix and suffix survived level N-1. The resulting counts are identical
//! to a full overlapping count followed by the `min_freq` filter.

use std::cmp::Ordering;
use std::fmt::Write;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::bpe::{escape_token, BaseTokenizer};
use crate::error::{Error, Result};
use crate::TokenId;

pub const MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningConfig {
    /// Longest N-gram considered.
    pub n_max: usize,
    /// Number of composite tokens to insert (and base tokens to evict).
    pub budget: usize,
    pub min_freq: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            n_max: 2,
            budget: 5000,
            min_freq: 2,
        }
    }
}

impl MiningConfig {
    pub fn new(n_max: usize, budget: usize, min_freq: u64) -> Result<Self> {
        let cfg = Self {
            n_max,
            budget,
            min_freq,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_N).contains(&self.n_max) {
            return Err(Error::Config(format!(
                "n_max must be in [2, {MAX_N}], got {}",
                self.n_max
            )));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.min_freq == 0 {
            return Err(Error::Config("min_freq must be at least 1".into()));
        }
        Ok(())
    }
}

/// A contiguous run of base tokens considered for promotion to one token.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TpeCandidate {
    pub constituents: Vec<TokenId>,
    pub surface: Vec<u8>,
    pub freq: u64,
    /// `freq * constituents.len()`.
    pub score: u64,
}

impl TpeCandidate {
    pub fn new(tok: &BaseTokenizer, constituents: Vec<TokenId>, freq: u64) -> Result<Self> {
        if constituents.len() < 2 {
            return Err(Error::Config("a candidate needs at least two constituents".into()));
        }
        let mut surface = Vec::new();
        for &id in &constituents {
            if tok.vocab().is_special(id) {
                return Err(Error::Integrity(format!(
                    "special token {} cannot be a constituent",
                    tok.vocab().display(id)
                )));
            }
            surface.extend_from_slice(tok.vocab().token(id).ok_or(Error::UnknownId(id))?);
        }
        let score = freq * constituents.len() as u64;
        Ok(Self {
            constituents,
            surface,
            freq,
            score,
        })
    }

    pub fn len(&self) -> usize {
        self.constituents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constituents.is_empty()
    }
}

/// Score desc, freq desc, surface asc, then constituent ids for splits of
/// one surface.
pub fn canonical_order(a: &TpeCandidate, b: &TpeCandidate) -> Ordering {
    b.score
        .cmp(&a.score)
        .then(b.freq.cmp(&a.freq))
        .then_with(|| a.surface.cmp(&b.surface))
        .then_with(|| a.constituents.cmp(&b.constituents))
}

/// Candidates in canonical rank order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateTable {
    rows: Vec<TpeCandidate>,
}

impl CandidateTable {
    pub fn from_rows(mut rows: Vec<TpeCandidate>) -> Self {
        rows.sort_by(canonical_order);
        rows.dedup_by(|a, b| a.constituents == b.constituents);
        Self { rows }
    }

    pub fn rows(&self) -> &[TpeCandidate] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Tab-separated export with a header row. Constituents are joined with
    /// U+001F; tokens are written in their escaped file form.
    pub fn to_tsv(&self, tok: &BaseTokenizer) -> String {
        let mut out = String::from("surface\tN\tfreq\tscore\tconstituents\n");
        for row in &self.rows {
            let parts: Vec<String> = row
                .constituents
                .iter()
                .map(|&id| tok.vocab().display(id))
                .collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                escape_token(&row.surface),
                row.len(),
                row.freq,
                row.score,
                parts.join("\u{1F}")
            );
        }
        out
    }
}

const NONE: u32 = u32::MAX;

#[inline]
fn key(prefix: u32, last: TokenId) -> u64 {
    ((prefix as u64) << 32) | last as u64
}

/// Count every N-gram (2 <= N <= n_max) of base tokens inside each document.
pub fn count_ngrams_encoded(
    tok: &BaseTokenizer,
    docs: &[Vec<TokenId>],
    cfg: &MiningConfig,
) -> Result<CandidateTable> {
    cfg.validate()?;
    let vocab = tok.vocab();
    // level-1 gram index is the token id itself
    let mut prev_idx: Vec<Vec<u32>> = docs
        .par_iter()
        .map(|d| {
            d.iter()
                .map(|&t| if vocab.is_special(t) { NONE } else { t })
                .collect()
        })
        .collect();
    // levels[k] holds (parent index, last token, freq) for (k+2)-grams
    let mut levels: Vec<Vec<(u32, TokenId, u64)>> = Vec::new();

    for n in 2..=cfg.n_max {
        let counts = docs
            .par_iter()
            .zip(prev_idx.par_iter())
            .fold(FxHashMap::<u64, u64>::default, |mut acc, (doc, idx)| {
                if doc.len() >= n {
                    for pos in 0..=doc.len() - n {
                        let p = idx[pos];
                        if p == NONE || idx[pos + 1] == NONE {
                            continue;
                        }
                        let last = doc[pos + n - 1];
                        if vocab.is_special(last) {
                            continue;
                        }
                        *acc.entry(key(p, last)).or_default() += 1;
                    }
                }
                acc
            })
            .reduce(FxHashMap::default, |a, b| {
                let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
                for (k, v) in small {
                    *big.entry(k).or_default() += v;
                }
                big
            });
        let mut frequent: Vec<(u64, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= cfg.min_freq)
            .collect();
        if frequent.is_empty() {
            break;
        }
        frequent.sort_unstable();
        let index: FxHashMap<u64, u32> = frequent
            .iter()
            .enumerate()
            .map(|(i, &(k, _))| (k, i as u32))
            .collect();
        prev_idx = docs
            .par_iter()
            .zip(prev_idx.par_iter())
            .map(|(doc, idx)| {
                let mut cur = vec![NONE; doc.len()];
                if doc.len() >= n {
                    for pos in 0..=doc.len() - n {
                        let p = idx[pos];
                        if p == NONE || idx[pos + 1] == NONE {
                            continue;
                        }
                        if let Some(&i) = index.get(&key(p, doc[pos + n - 1])) {
                            cur[pos] = i;
                        }
                    }
                }
                cur
            })
            .collect();
        levels.push(
            frequent
                .into_iter()
                .map(|(k, c)| ((k >> 32) as u32, k as u32, c))
                .collect(),
        );
    }

    let mut rows = Vec::new();
    for (li, level) in levels.iter().enumerate() {
        for &(parent, last, freq) in level {
            let mut constituents = vec![last];
            let mut p = parent;
            for lower in levels[..li].iter().rev() {
                let (pp, l, _) = lower[p as usize];
                constituents.push(l);
                p = pp;
            }
            constituents.push(p);
            constituents.reverse();
            let cand = TpeCandidate::new(tok, constituents, freq)?;
            // a surface that is already a base token cannot take a new id
            if vocab.id(&cand.surface).is_some() {
                continue;
            }
            rows.push(cand);
        }
    }
    Ok(CandidateTable::from_rows(rows))
}

/// Base-encode `docs` and count their N-grams.
pub fn count_ngrams<S: AsRef<str> + Sync>(
    tok: &BaseTokenizer,
    docs: &[S],
    cfg: &MiningConfig,
) -> Result<CandidateTable> {
    cfg.validate()?;
    let encoded = crate::corpus::encode_documents(tok, docs);
    count_ngrams_encoded(tok, &encoded, cfg)
}

/// Recompute `score = freq * N`, drop zero-frequency rows and restore the
/// canonical order.
pub fn score_candidates(table: CandidateTable) -> CandidateTable {
    let rows = table
        .rows
        .into_iter()
        .filter(|r| r.freq > 0)
        .map(|mut r| {
            r.score = r.freq * r.constituents.len() as u64;
            r
        })
        .collect();
    CandidateTable::from_rows(rows)
}

/// Top-`m` rows with unique surfaces; a surface keeps its best-ranked split.
pub fn select_insertion_set(table: &CandidateTable, m: usize) -> Vec<TpeCandidate> {
    let mut seen: FxHashSet<&[u8]> = FxHashSet::default();
    let mut out = Vec::with_capacity(m.min(table.len()));
    for row in &table.rows {
        if out.len() == m {
            break;
        }
        if seen.insert(&row.surface) {
            out.push(row.clone());
        }
    }
    out
}
