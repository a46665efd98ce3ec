//! Greedy pair-frequency BPE training.
//!
//! Used to build fixture tokenizers: the token-pair layer itself always starts
//! from an existing merge table.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rustc_hash::{FxHashMap, FxHashSet};

use super::pretokenize::pretokenize_iter;
use super::{BaseTokenizer, Vocabulary};
use crate::error::{Error, Result};
use crate::TokenId;

#[derive(Debug, Clone)]
pub struct TrainerConfig {
    /// Target vocabulary size including the byte alphabet and specials.
    pub vocab_size: usize,
    /// Pairs seen fewer times than this are never merged.
    pub min_pair_freq: u64,
    pub special_tokens: Vec<String>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            vocab_size: 1024,
            min_pair_freq: 2,
            special_tokens: Vec::new(),
        }
    }
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    left: Vec<u8>,
    right: Vec<u8>,
    pair: (TokenId, TokenId),
}

impl Ord for Candidate {
    // highest count first, then lexicographically smallest (left, right)
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| Reverse((&self.left, &self.right)).cmp(&Reverse((&other.left, &other.right))))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Train a byte-level BPE tokenizer on `texts`.
///
/// Byte tokens take ids `0..256` in byte order, merged tokens follow in rank
/// order and specials come last. A pair whose concatenation already exists as
/// a token is skipped so every token keeps a single producer.
pub fn train<'a, I>(texts: I, config: &TrainerConfig) -> Result<BaseTokenizer>
where
    I: IntoIterator<Item = &'a str>,
{
    let reserved = 256 + config.special_tokens.len();
    if config.vocab_size < reserved {
        return Err(Error::Config(format!(
            "vocab_size {} is smaller than the byte alphabet plus specials ({reserved})",
            config.vocab_size
        )));
    }
    let mut word_counts: FxHashMap<&str, u64> = FxHashMap::default();
    for text in texts {
        for w in pretokenize_iter(text) {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, u64)> = word_counts.into_iter().collect();
    entries.sort_unstable();

    let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut known: FxHashSet<Vec<u8>> = tokens.iter().cloned().collect();
    let mut words: Vec<Vec<TokenId>> = entries
        .iter()
        .map(|(w, _)| w.bytes().map(TokenId::from).collect())
        .collect();
    let counts: Vec<u64> = entries.iter().map(|(_, c)| *c).collect();

    let mut pair_counts: FxHashMap<(TokenId, TokenId), u64> = FxHashMap::default();
    let mut where_: FxHashMap<(TokenId, TokenId), FxHashSet<usize>> = FxHashMap::default();
    for (wi, w) in words.iter().enumerate() {
        for p in w.windows(2) {
            let key = (p[0], p[1]);
            *pair_counts.entry(key).or_default() += counts[wi];
            where_.entry(key).or_default().insert(wi);
        }
    }
    let candidate = |tokens: &[Vec<u8>], pair: (TokenId, TokenId), count: u64| Candidate {
        count,
        left: tokens[pair.0 as usize].clone(),
        right: tokens[pair.1 as usize].clone(),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> = pair_counts
        .iter()
        .map(|(&pair, &count)| candidate(&tokens, pair, count))
        .collect();

    let mut merges: Vec<(TokenId, TokenId)> = Vec::new();
    let target_merges = config.vocab_size - reserved;
    while merges.len() < target_merges {
        let Some(top) = heap.pop() else { break };
        let current = pair_counts.get(&top.pair).copied().unwrap_or(0);
        if current != top.count {
            if current > 0 {
                heap.push(candidate(&tokens, top.pair, current));
            }
            continue;
        }
        if current < config.min_pair_freq.max(1) {
            break;
        }
        let mut merged = top.left.clone();
        merged.extend_from_slice(&top.right);
        if known.contains(&merged) {
            pair_counts.remove(&top.pair);
            continue;
        }
        let new_id = tokens.len() as TokenId;
        known.insert(merged.clone());
        tokens.push(merged);
        merges.push(top.pair);

        let affected: Vec<usize> = {
            let mut v: Vec<usize> = where_.remove(&top.pair).unwrap_or_default().into_iter().collect();
            v.sort_unstable();
            v
        };
        let mut touched: FxHashSet<(TokenId, TokenId)> = FxHashSet::default();
        for wi in affected {
            let c = counts[wi];
            let word = &mut words[wi];
            for p in word.windows(2) {
                let key = (p[0], p[1]);
                if let Some(v) = pair_counts.get_mut(&key) {
                    *v -= c;
                }
                touched.insert(key);
            }
            let mut out = Vec::with_capacity(word.len());
            let mut i = 0;
            while i < word.len() {
                if i + 1 < word.len() && (word[i], word[i + 1]) == top.pair {
                    out.push(new_id);
                    i += 2;
                } else {
                    out.push(word[i]);
                    i += 1;
                }
            }
            *word = out;
            for p in word.windows(2) {
                let key = (p[0], p[1]);
                *pair_counts.entry(key).or_default() += c;
                where_.entry(key).or_default().insert(wi);
                touched.insert(key);
            }
        }
        pair_counts.remove(&top.pair);
        let mut touched: Vec<_> = touched.into_iter().collect();
        touched.sort_unstable();
        for key in touched {
            match pair_counts.get(&key) {
                Some(&0) => {
                    pair_counts.remove(&key);
                    where_.remove(&key);
                }
                Some(&c) => heap.push(candidate(&tokens, key, c)),
                None => {}
            }
        }
    }

    let first_special = tokens.len() as TokenId;
    for s in &config.special_tokens {
        tokens.push(s.as_bytes().to_vec());
    }
    let specials: Vec<TokenId> =
        (first_special..first_special + config.special_tokens.len() as TokenId).collect();
    let vocab = Vocabulary::new(tokens, &specials)?;
    BaseTokenizer::new(vocab, merges)
}
