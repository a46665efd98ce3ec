//! Byte-level BPE: vocabulary, merge table, encoding and decoding.

mod escape;
pub(crate) mod io;
mod pretokenize;
pub mod train;
mod vocab;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use aho_corasick::{AhoCorasick, MatchKind};
use rustc_hash::FxHashMap;

pub use escape::{escape_token, unescape_token};
pub use io::RawTokenizerFile;
pub use pretokenize::{pretokenize, pretokenize_iter, PreTokens};
pub use vocab::Vocabulary;

use crate::error::{Error, Result};
use crate::TokenId;

/// A merge `left + right -> result`; its rank is its index in the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MergeRule {
    pub left: TokenId,
    pub right: TokenId,
    pub result: TokenId,
}

#[inline]
pub(crate) fn pair_key(left: TokenId, right: TokenId) -> u64 {
    ((left as u64) << 32) | right as u64
}

/// Immutable byte-level BPE tokenizer.
#[derive(Debug, Clone)]
pub struct BaseTokenizer {
    vocab: Vocabulary,
    merges: Vec<MergeRule>,
    pair_ranks: FxHashMap<u64, u32>,
    producer: Vec<Option<u32>>,
    special_matcher: Option<AhoCorasick>,
}

/// Per-caller memo of pre-token encodings.
#[derive(Debug, Default)]
pub struct WordCache {
    map: FxHashMap<String, Vec<TokenId>>,
}

impl WordCache {
    const MAX_ENTRIES: usize = 1 << 18;
    const MAX_WORD_BYTES: usize = 48;

    pub fn new() -> Self {
        Self::default()
    }
}

impl BaseTokenizer {
    /// Validate `merges` (in rank order) against `vocab` and build the
    /// producer index.
    pub fn new(vocab: Vocabulary, merges: Vec<(TokenId, TokenId)>) -> Result<Self> {
        let n = vocab.len();
        let mut producer: Vec<Option<u32>> = vec![None; n];
        let mut available: Vec<bool> = (0..n as TokenId).map(|id| vocab.is_byte(id)).collect();
        let mut rules = Vec::with_capacity(merges.len());
        let mut pair_ranks =
            FxHashMap::with_capacity_and_hasher(merges.len(), Default::default());
        let mut buf = Vec::new();
        for (rank, (left, right)) in merges.into_iter().enumerate() {
            for side in [left, right] {
                if vocab.token(side).is_none() {
                    return Err(Error::UnknownId(side));
                }
                if vocab.is_special(side) {
                    return Err(Error::Integrity(format!(
                        "merge rank {rank} uses special token {}",
                        vocab.display(side)
                    )));
                }
                if !available[side as usize] {
                    return Err(Error::Integrity(format!(
                        "merge rank {rank} uses {} before any earlier merge produces it",
                        vocab.display(side)
                    )));
                }
            }
            buf.clear();
            buf.extend_from_slice(vocab.token(left).unwrap());
            buf.extend_from_slice(vocab.token(right).unwrap());
            let result = vocab.id(&buf).ok_or_else(|| {
                Error::Integrity(format!(
                    "merge ({}, {}) produces {}, which is not in the vocabulary",
                    vocab.display(left),
                    vocab.display(right),
                    escape_token(&buf)
                ))
            })?;
            if vocab.is_special(result) || vocab.is_byte(result) {
                return Err(Error::Integrity(format!(
                    "merge rank {rank} produces reserved token {}",
                    vocab.display(result)
                )));
            }
            if let Some(prev) = producer[result as usize] {
                return Err(Error::Integrity(format!(
                    "token {} is produced by merge ranks {prev} and {rank}",
                    vocab.display(result)
                )));
            }
            producer[result as usize] = Some(rank as u32);
            available[result as usize] = true;
            pair_ranks.insert(pair_key(left, right), rank as u32);
            rules.push(MergeRule {
                left,
                right,
                result,
            });
        }
        for (id, _) in vocab.iter() {
            if !vocab.is_special(id) && !vocab.is_byte(id) && producer[id as usize].is_none() {
                return Err(Error::Integrity(format!(
                    "token {} has no producing merge",
                    vocab.display(id)
                )));
            }
        }
        let special_matcher = if vocab.specials().is_empty() {
            None
        } else {
            let patterns: Vec<&[u8]> = vocab
                .specials()
                .iter()
                .map(|&id| vocab.token(id).unwrap())
                .collect();
            Some(
                AhoCorasick::builder()
                    .match_kind(MatchKind::LeftmostLongest)
                    .build(patterns)
                    .map_err(|e| Error::Integrity(format!("special token matcher: {e}")))?,
            )
        };
        Ok(Self {
            vocab,
            merges: rules,
            pair_ranks,
            producer,
            special_matcher,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn merges(&self) -> &[MergeRule] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// The rule producing `id`, absent for byte and special tokens.
    pub fn producer(&self, id: TokenId) -> Option<&MergeRule> {
        self.producer
            .get(id as usize)
            .copied()
            .flatten()
            .map(|rank| &self.merges[rank as usize])
    }

    pub fn merge_rank(&self, left: TokenId, right: TokenId) -> Option<u32> {
        self.pair_ranks.get(&pair_key(left, right)).copied()
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        self.encode_into(text, &mut out, None);
        out
    }

    pub fn encode_cached(&self, text: &str, cache: &mut WordCache) -> Vec<TokenId> {
        let mut out = Vec::new();
        self.encode_into(text, &mut out, Some(cache));
        out
    }

    /// Append the encoding of `text` to `out`.
    pub fn encode_into(&self, text: &str, out: &mut Vec<TokenId>, mut cache: Option<&mut WordCache>) {
        let Some(matcher) = &self.special_matcher else {
            self.encode_plain(text, out, cache);
            return;
        };
        let mut last = 0;
        for m in matcher.find_iter(text) {
            // specials are whole strings; a match can only start/end on char boundaries
            // when the special itself is valid UTF-8, which holds for anything loaded from JSON
            if !text.is_char_boundary(m.start()) || !text.is_char_boundary(m.end()) {
                continue;
            }
            self.encode_plain(&text[last..m.start()], out, cache.as_deref_mut());
            out.push(self.vocab.specials()[m.pattern().as_usize()]);
            last = m.end();
        }
        self.encode_plain(&text[last..], out, cache);
    }

    fn encode_plain(&self, text: &str, out: &mut Vec<TokenId>, mut cache: Option<&mut WordCache>) {
        for word in pretokenize_iter(text) {
            match cache.as_deref_mut() {
                Some(cache) if word.len() <= WordCache::MAX_WORD_BYTES => {
                    if let Some(ids) = cache.map.get(word) {
                        out.extend_from_slice(ids);
                        continue;
                    }
                    let start = out.len();
                    self.encode_word(word.as_bytes(), out);
                    if cache.map.len() < WordCache::MAX_ENTRIES {
                        cache.map.insert(word.to_owned(), out[start..].to_vec());
                    }
                }
                _ => self.encode_word(word.as_bytes(), out),
            }
        }
    }

    /// Apply merges to one pre-token, lowest rank first, leftmost among equals.
    pub(crate) fn encode_word(&self, word: &[u8], out: &mut Vec<TokenId>) {
        match word.len() {
            0 => return,
            1 => {
                out.push(self.vocab.byte_id(word[0]));
                return;
            }
            _ => {}
        }
        const NONE: u32 = u32::MAX;
        let n = word.len();
        let mut ids: Vec<TokenId> = word.iter().map(|&b| self.vocab.byte_id(b)).collect();
        let mut next: Vec<u32> = (1..=n as u32).collect();
        next[n - 1] = NONE;
        let mut prev: Vec<u32> = (0..n as u32).map(|i| i.wrapping_sub(1)).collect();
        prev[0] = NONE;
        let mut alive = vec![true; n];
        let mut heap: BinaryHeap<Reverse<(u32, u32)>> = BinaryHeap::with_capacity(n);
        for i in 0..n - 1 {
            if let Some(rank) = self.merge_rank(ids[i], ids[i + 1]) {
                heap.push(Reverse((rank, i as u32)));
            }
        }
        while let Some(Reverse((rank, pos))) = heap.pop() {
            let p = pos as usize;
            if !alive[p] || next[p] == NONE {
                continue;
            }
            let q = next[p] as usize;
            if self.merge_rank(ids[p], ids[q]) != Some(rank) {
                continue;
            }
            ids[p] = self.merges[rank as usize].result;
            alive[q] = false;
            next[p] = next[q];
            if next[q] != NONE {
                prev[next[q] as usize] = pos;
            }
            if prev[p] != NONE {
                let l = prev[p] as usize;
                if let Some(r) = self.merge_rank(ids[l], ids[p]) {
                    heap.push(Reverse((r, l as u32)));
                }
            }
            if next[p] != NONE {
                if let Some(r) = self.merge_rank(ids[p], ids[next[p] as usize]) {
                    heap.push(Reverse((r, pos)));
                }
            }
        }
        let mut i = 0u32;
        while i != NONE {
            out.push(ids[i as usize]);
            i = next[i as usize];
        }
    }

    /// Concatenated bytes of `ids`.
    pub fn decode_bytes(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(ids.len() * 4);
        for &id in ids {
            out.extend_from_slice(self.vocab.token(id).ok_or(Error::UnknownId(id))?);
        }
        Ok(out)
    }

    /// Strict decode: invalid UTF-8 is an error.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        bytes_to_string(self.decode_bytes(ids)?)
    }

    /// Decode replacing invalid UTF-8 with U+FFFD.
    pub fn decode_lossy(&self, ids: &[TokenId]) -> Result<String> {
        Ok(String::from_utf8_lossy(&self.decode_bytes(ids)?).into_owned())
    }

    /// Full derivation of `id` down to byte leaves, operands before the pair
    /// that consumes them.
    pub fn merge_path(&self, id: TokenId) -> Result<Vec<(TokenId, TokenId)>> {
        if self.vocab.token(id).is_none() {
            return Err(Error::UnknownId(id));
        }
        let mut out = Vec::new();
        // explicit stack: (token, expanded?)
        let mut stack = vec![(id, false)];
        let limit = self.vocab.token(id).map_or(0, <[u8]>::len);
        let mut steps = 0usize;
        while let Some((tok, expanded)) = stack.pop() {
            let Some(rule) = self.producer(tok) else {
                continue;
            };
            if expanded {
                out.push((rule.left, rule.right));
                continue;
            }
            steps += 1;
            if steps > limit {
                return Err(Error::Integrity("cyclic producer index".into()));
            }
            stack.push((tok, true));
            stack.push((rule.right, false));
            stack.push((rule.left, false));
        }
        Ok(out)
    }

    /// [`merge_path`](Self::merge_path) addressed by token bytes.
    pub fn token_merge_path(&self, token: &[u8]) -> Result<Vec<(TokenId, TokenId)>> {
        let id = self
            .vocab
            .id(token)
            .ok_or_else(|| Error::UnknownToken(escape_token(token)))?;
        self.merge_path(id)
    }
}

pub(crate) fn bytes_to_string(bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        offset: e.utf8_error().valid_up_to(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Byte alphabet plus `extra` tokens produced by `merges` (strings).
    pub fn toy(extra: &[&str], merges: &[(&str, &str)], specials: &[&str]) -> BaseTokenizer {
        let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        tokens.extend(extra.iter().map(|s| s.as_bytes().to_vec()));
        let first_special = tokens.len() as TokenId;
        tokens.extend(specials.iter().map(|s| s.as_bytes().to_vec()));
        let special_ids: Vec<TokenId> =
            (first_special..first_special + specials.len() as TokenId).collect();
        let vocab = Vocabulary::new(tokens, &special_ids).unwrap();
        let merges = merges
            .iter()
            .map(|(l, r)| (vocab.id(l.as_bytes()).unwrap(), vocab.id(r.as_bytes()).unwrap()))
            .collect();
        BaseTokenizer::new(vocab, merges).unwrap()
    }

    fn strings(tok: &BaseTokenizer, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&i| String::from_utf8(tok.vocab().token(i).unwrap().to_vec()).unwrap())
            .collect()
    }

    #[test]
    fn single_merge_fires() {
        let tok = toy(&["ab"], &[("a", "b")], &[]);
        assert_eq!(strings(&tok, &tok.encode("ab")), ["ab"]);
        assert_eq!(strings(&tok, &tok.encode("ba")), ["b", "a"]);
    }

    #[test]
    fn lowest_rank_wins() {
        let tok = toy(&["bc", "ab"], &[("b", "c"), ("a", "b")], &[]);
        assert_eq!(strings(&tok, &tok.encode("abc")), ["a", "bc"]);
    }

    #[test]
    fn equal_rank_merges_leftmost_first() {
        let tok = toy(&["aa"], &[("a", "a")], &[]);
        assert_eq!(strings(&tok, &tok.encode("aaa")), ["aa", "a"]);
        assert_eq!(strings(&tok, &tok.encode("aaaa")), ["aa", "aa"]);
    }

    #[test]
    fn merges_stay_inside_pre_tokens() {
        let tok = toy(&["a "], &[("a", " ")], &[]);
        // " " attaches to the following word, so "a" and " b" never meet
        assert_eq!(strings(&tok, &tok.encode("a b")), ["a", " ", "b"]);
        assert_eq!(strings(&tok, &tok.encode("a ")), ["a", " "]);
    }

    #[test]
    fn spirometry_splits_into_three() {
        let tok = toy(
            &["Sp", "Spi", "ro", "rom", "et", "etr", "etry"],
            &[
                ("S", "p"),
                ("Sp", "i"),
                ("r", "o"),
                ("ro", "m"),
                ("e", "t"),
                ("et", "r"),
                ("etr", "y"),
            ],
            &[],
        );
        assert_eq!(strings(&tok, &tok.encode("Spirometry")), ["Spi", "rom", "etry"]);
    }

    #[test]
    fn specials_are_matched_whole() {
        let tok = toy(&["ab"], &[("a", "b")], &["<|eos|>"]);
        let ids = tok.encode("ab<|eos|>ab");
        assert_eq!(strings(&tok, &ids), ["ab", "<|eos|>", "ab"]);
        assert_eq!(tok.decode(&ids).unwrap(), "ab<|eos|>ab");
    }

    #[test]
    fn decode_errors() {
        let tok = toy(&[], &[], &[]);
        assert_eq!(tok.decode(&[]).unwrap(), "");
        assert!(matches!(tok.decode(&[256]), Err(Error::UnknownId(256))));
        assert!(matches!(tok.decode(&[0xE2]), Err(Error::InvalidUtf8 { offset: 0 })));
        assert_eq!(tok.decode_lossy(&[b'a' as u32, 0xE2]).unwrap(), "a\u{FFFD}");
    }

    #[test]
    fn merge_paths() {
        let tok = toy(&["ab", "abc", "cd", "abcd"], &[("a", "b"), ("ab", "c"), ("c", "d"), ("ab", "cd")], &[]);
        let path = |s: &str| -> Vec<(String, String)> {
            tok.token_merge_path(s.as_bytes())
                .unwrap()
                .into_iter()
                .map(|(l, r)| {
                    let v = strings(&tok, &[l, r]);
                    (v[0].clone(), v[1].clone())
                })
                .collect()
        };
        let p = |l: &str, r: &str| (l.to_string(), r.to_string());
        assert!(path("a").is_empty());
        assert_eq!(path("ab"), [p("a", "b")]);
        assert_eq!(path("abc"), [p("a", "b"), p("ab", "c")]);
        assert_eq!(path("abcd"), [p("a", "b"), p("c", "d"), p("ab", "cd")]);
        assert!(matches!(tok.token_merge_path(b"zz"), Err(Error::UnknownToken(_))));
    }

    #[test]
    fn merge_must_produce_known_token() {
        let tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        let vocab = Vocabulary::new(tokens, &[]).unwrap();
        let err = BaseTokenizer::new(vocab, vec![(b'a' as u32, b'b' as u32)]).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
    }

    #[test]
    fn unproduced_token_rejected() {
        let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        tokens.push(b"xy".to_vec());
        let vocab = Vocabulary::new(tokens, &[]).unwrap();
        assert!(matches!(BaseTokenizer::new(vocab, vec![]), Err(Error::Integrity(_))));
    }

    #[test]
    fn out_of_order_merge_rejected() {
        let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        tokens.push(b"ab".to_vec());
        tokens.push(b"abc".to_vec());
        let vocab = Vocabulary::new(tokens, &[]).unwrap();
        let err = BaseTokenizer::new(vocab, vec![(256, b'c' as u32), (b'a' as u32, b'b' as u32)])
            .unwrap_err();
        assert!(err.to_string().contains("before any earlier merge"), "{err}");
    }
}
