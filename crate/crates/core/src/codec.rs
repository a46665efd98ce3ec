//! Layered encoder and decoder over a [`TpeVocabulary`].
//!
//! Encoding runs the base tokenizer, replaces evicted tokens with their
//! preserved decomposition and then makes one left-to-right pass that emits,
//! at each position, the longest span whose whole merge path is in the pair
//! table and whose surface is an inserted token.
//!
//! The pair table is compiled into a transition map over interned prefix
//! strings, keyed by `(state, next base id)`. A walk stops at the first
//! missing transition, so each position costs at most one probe per byte of
//! the longest inserted surface.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::bpe::{bytes_to_string, pair_key, BaseTokenizer, WordCache};
use crate::error::{Error, Result};
use crate::surgery::{Insertion, TpeMergeTable, TpeVocabulary};
use crate::TokenId;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Default)]
pub(crate) struct Compiled {
    /// Per base id: `NONE` if preserved, else offset into `fallback_parts`.
    fallback_start: Vec<u32>,
    fallback_parts: Vec<TokenId>,
    /// Per base id: prefix state whose string equals that token, or `NONE`.
    start_state: Vec<u32>,
    transitions: FxHashMap<u64, u32>,
    /// Per state: extended-vocabulary id if the state is an inserted surface.
    accept: Vec<u32>,
}

impl Compiled {
    pub(crate) fn new(
        base: &BaseTokenizer,
        table: &TpeMergeTable,
        insertion: &[Insertion],
        evicted: &[bool],
        decomposition: &FxHashMap<TokenId, Vec<TokenId>>,
    ) -> Self {
        let bv = base.vocab();
        let mut fallback_start = vec![NONE; bv.len()];
        let mut fallback_parts = Vec::new();
        let mut evicted_ids: Vec<TokenId> = decomposition.keys().copied().collect();
        evicted_ids.sort_unstable();
        for e in evicted_ids {
            fallback_start[e as usize] = fallback_parts.len() as u32;
            let parts = &decomposition[&e];
            fallback_parts.push(parts.len() as TokenId);
            fallback_parts.extend_from_slice(parts);
        }

        let mut states: FxHashMap<Vec<u8>, u32> = FxHashMap::default();
        let intern = |s: Vec<u8>, states: &mut FxHashMap<Vec<u8>, u32>| -> u32 {
            let next = states.len() as u32;
            *states.entry(s).or_insert(next)
        };
        let mut transitions = FxHashMap::default();
        for (l, r) in table.pairs() {
            let Some(rid) = bv.id(r) else { continue };
            let from = intern(l.clone(), &mut states);
            let to = intern([l.as_slice(), r.as_slice()].concat(), &mut states);
            transitions.insert(pair_key(from, rid), to);
        }
        let mut start_state = vec![NONE; bv.len()];
        for (s, &state) in &states {
            if let Some(id) = bv.id(s) {
                if !evicted[id as usize] {
                    start_state[id as usize] = state;
                }
            }
        }
        let mut accept = vec![NONE; states.len()];
        for ins in insertion {
            if let Some(&state) = states.get(&ins.surface) {
                accept[state as usize] = ins.id;
            }
        }
        Self {
            fallback_start,
            fallback_parts,
            start_state,
            transitions,
            accept,
        }
    }

    fn expand_fallback(&self, base_ids: &[TokenId], out: &mut Vec<TokenId>) {
        out.reserve(base_ids.len());
        for &id in base_ids {
            match self.fallback_start.get(id as usize) {
                Some(&off) if off != NONE => {
                    let off = off as usize;
                    let n = self.fallback_parts[off] as usize;
                    out.extend_from_slice(&self.fallback_parts[off + 1..off + 1 + n]);
                }
                _ => out.push(id),
            }
        }
    }

    /// Greedy longest-match pass over fallback-expanded base ids.
    fn merge_spans(&self, xs: &[TokenId], out: &mut Vec<TokenId>) {
        let n = xs.len();
        let mut i = 0;
        while i < n {
            let mut best_end = i;
            let mut best_id = xs[i];
            let mut state = self.start_state[xs[i] as usize];
            let mut k = i + 1;
            while state != NONE && k < n {
                match self.transitions.get(&pair_key(state, xs[k])) {
                    Some(&next) => {
                        state = next;
                        let acc = self.accept[state as usize];
                        if acc != NONE {
                            best_end = k;
                            best_id = acc;
                        }
                        k += 1;
                    }
                    None => break,
                }
            }
            out.push(best_id);
            i = best_end + 1;
        }
    }
}

/// Result of encoding one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    pub ids: Vec<TokenId>,
    /// Byte length of the source text.
    pub surface_len: usize,
}

impl EncodedSequence {
    pub fn token_len(&self) -> usize {
        self.ids.len()
    }
}

impl TpeVocabulary {
    /// Base ids after replacing evicted tokens with their decompositions.
    pub fn apply_fallback(&self, base_ids: &[TokenId]) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(base_ids.len());
        self.compiled.expand_fallback(base_ids, &mut out);
        out
    }

    /// Layered encoding of an already base-encoded document.
    pub fn encode_base_ids(&self, base_ids: &[TokenId]) -> Vec<TokenId> {
        let expanded = self.apply_fallback(base_ids);
        let mut out = Vec::with_capacity(expanded.len());
        self.compiled.merge_spans(&expanded, &mut out);
        out
    }

    pub fn encode(&self, text: &str) -> EncodedSequence {
        let mut cache = WordCache::new();
        self.encode_cached(text, &mut cache)
    }

    pub fn encode_cached(&self, text: &str, cache: &mut WordCache) -> EncodedSequence {
        let base_ids = self.base().encode_cached(text, cache);
        EncodedSequence {
            ids: self.encode_base_ids(&base_ids),
            surface_len: text.len(),
        }
    }

    pub fn decode_bytes(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(ids.len() * 4);
        for &id in ids {
            out.extend_from_slice(self.vocab().token(id).ok_or(Error::UnknownId(id))?);
        }
        Ok(out)
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        bytes_to_string(self.decode_bytes(ids)?)
    }

    pub fn decode_lossy(&self, ids: &[TokenId]) -> Result<String> {
        Ok(String::from_utf8_lossy(&self.decode_bytes(ids)?).into_owned())
    }
}

pub fn tpe_encode(v: &TpeVocabulary, text: &str) -> EncodedSequence {
    v.encode(text)
}

pub fn tpe_decode(v: &TpeVocabulary, ids: &[TokenId]) -> Result<String> {
    v.decode(ids)
}

pub const FRAME_MAGIC: &[u8; 4] = b"MTPE";
pub const FRAME_VERSION: u8 = 1;

/// Compact id frame: magic, version byte, little-endian u32 count, then
/// little-endian u32 ids.
pub fn write_frame(ids: &[TokenId]) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + ids.len() * 4);
    out.extend_from_slice(FRAME_MAGIC);
    out.push(FRAME_VERSION);
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    for id in ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

pub fn read_frame(bytes: &[u8]) -> Result<Vec<TokenId>> {
    if bytes.len() < 9 || &bytes[..4] != FRAME_MAGIC {
        return Err(Error::Format("id frame: missing MTPE header".into()));
    }
    if bytes[4] != FRAME_VERSION {
        return Err(Error::Format(format!("id frame: unsupported version {}", bytes[4])));
    }
    let count = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let body = &bytes[9..];
    if body.len() != count * 4 {
        return Err(Error::Format(format!(
            "id frame: header says {count} ids but body has {} bytes",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Straightforward encoder used to cross-check [`tpe_encode`]: string-keyed
/// pair set and surface map, and for every start position an explicit check
/// of each span's merge path against the table.
pub fn reference_encode(v: &TpeVocabulary, text: &str) -> EncodedSequence {
    let base = v.base();
    let bv = base.vocab();
    let pairs: FxHashSet<(Vec<u8>, Vec<u8>)> = v.tpe_merges().pairs().iter().cloned().collect();
    let surfaces: FxHashMap<Vec<u8>, TokenId> = v
        .insertion()
        .iter()
        .map(|ins| (ins.surface.clone(), ins.id))
        .collect();

    let mut xs: Vec<TokenId> = Vec::new();
    for id in base.encode(text) {
        match v.decomposition(id) {
            Some(parts) => xs.extend_from_slice(parts),
            None => xs.push(id),
        }
    }
    let tok = |id: TokenId| bv.token(id).unwrap().to_vec();

    let mut ids = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        let mut best = (i, xs[i]);
        let mut prefix = tok(xs[i]);
        for (k, &x) in xs.iter().enumerate().skip(i + 1) {
            let next = tok(x);
            if !pairs.contains(&(prefix.clone(), next.clone())) {
                break;
            }
            prefix.extend_from_slice(&next);
            if let Some(&id) = surfaces.get(&prefix) {
                best = (k, id);
            }
        }
        ids.push(best.1);
        i = best.0 + 1;
    }
    EncodedSequence {
        ids,
        surface_len: text.len(),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::bpe::tests::toy;
    use crate::mining::{CandidateTable, TpeCandidate};
    use crate::surgery::replace_with_frequencies;

    fn base() -> Arc<BaseTokenizer> {
        Arc::new(toy(
            &["Sp", "Spi", "ro", "rom", "et", "etr", "etry", "at", "Cat", "Ca"],
            &[
                ("S", "p"),
                ("Sp", "i"),
                ("r", "o"),
                ("ro", "m"),
                ("e", "t"),
                ("et", "r"),
                ("etr", "y"),
                ("a", "t"),
                ("C", "at"),
                ("C", "a"),
            ],
            &["<|eos|>"],
        ))
    }

    fn build(tok: &Arc<BaseTokenizer>, cands: &[&[&str]], evict_first: &[&str]) -> TpeVocabulary {
        let rows: Vec<TpeCandidate> = cands
            .iter()
            .enumerate()
            .map(|(i, parts)| {
                let ids = parts.iter().map(|p| tok.vocab().id(p.as_bytes()).unwrap()).collect();
                TpeCandidate::new(tok, ids, 100 - i as u64).unwrap()
            })
            .collect();
        let mut freqs = vec![10u64; tok.len()];
        for e in evict_first {
            freqs[tok.vocab().id(e.as_bytes()).unwrap() as usize] = 0;
        }
        replace_with_frequencies(tok.clone(), &CandidateTable::from_rows(rows), &freqs, cands.len(), None).unwrap()
    }

    fn names(v: &TpeVocabulary, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&i| String::from_utf8(v.vocab().token(i).unwrap().to_vec()).unwrap())
            .collect()
    }

    #[test]
    fn spirometry_becomes_one_token() {
        let tok = base();
        let v = build(&tok, &[&["Spi", "rom", "etry"]], &["Cat"]);
        let enc = v.encode("Spirometry");
        assert_eq!(names(&v, &enc.ids), ["Spirometry"]);
        assert_eq!(v.decode(&enc.ids).unwrap(), "Spirometry");
        assert_eq!(enc.surface_len, 10);
    }

    #[test]
    fn longest_match_wins() {
        let tok = base();
        let v = build(&tok, &[&["A", "B"], &["A", "B", "C"]], &["Cat", "Ca"]);
        assert_eq!(names(&v, &v.encode("ABC").ids), ["ABC"]);
        assert_eq!(names(&v, &v.encode("ABD").ids), ["AB", "D"]);
        assert_eq!(names(&v, &v.encode("AAB").ids), ["A", "AB"]);
    }

    #[test]
    fn path_prefix_without_insertion_backs_off() {
        let tok = base();
        // "AB" is only a path prefix of "ABC"; "AB" alone must stay split
        let v = build(&tok, &[&["A", "B", "C"]], &["Cat"]);
        assert_eq!(names(&v, &v.encode("ABD").ids), ["A", "B", "D"]);
        assert_eq!(names(&v, &v.encode("ABABC").ids), ["A", "B", "ABC"]);
    }

    #[test]
    fn fallback_then_merge() {
        let tok = base();
        // "at" is needed as a constituent so "Cat" falls back to [C, at]
        let v = build(&tok, &[&["C", "at", "s"]], &["Cat"]);
        let enc = v.encode("Cats Cat");
        assert_eq!(names(&v, &enc.ids), ["Cats", " ", "C", "at"]);
        assert_eq!(v.decode(&enc.ids).unwrap(), "Cats Cat");
        assert_eq!(reference_encode(&v, "Cats Cat"), enc);
    }

    #[test]
    fn merges_cross_pre_token_boundaries() {
        let tok = base();
        let v = build(&tok, &[&["x", " ", "y"]], &["Cat"]);
        assert_eq!(names(&v, &v.encode("x y").ids), ["x y"]);
    }

    #[test]
    fn empty_and_single() {
        let tok = base();
        let v = build(&tok, &[&["A", "B"]], &["Cat"]);
        assert!(v.encode("").ids.is_empty());
        assert!(reference_encode(&v, "").ids.is_empty());
        assert_eq!(v.encode("Q").ids, [b'Q' as TokenId]);
        assert_eq!(reference_encode(&v, "Q").ids, [b'Q' as TokenId]);
        assert_eq!(v.decode(&[]).unwrap(), "");
        assert!(matches!(v.decode(&[9999]), Err(Error::UnknownId(9999))));
    }

    #[test]
    fn alternative_split_with_table_path_still_matches() {
        let tok = base();
        // "Spi" as a surface string is reachable from (Sp, i) as well as the
        // base token "Spi"; only complete inserted surfaces are emitted
        let v = build(&tok, &[&["Spi", "rom"], &["Sp", "i", "x"]], &["Cat", "Ca"]);
        for text in ["Spirom", "Spix", "Spi", "SpiSpirom"] {
            assert_eq!(v.encode(text), reference_encode(&v, text), "{text}");
            assert_eq!(v.decode(&v.encode(text).ids).unwrap(), text);
        }
    }

    #[test]
    fn frame_round_trip() {
        let ids = [0, 7, 300, u32::MAX];
        let f = write_frame(&ids);
        assert_eq!(f.len(), 9 + 16);
        assert_eq!(read_frame(&f).unwrap(), ids);
        assert_eq!(read_frame(&write_frame(&[])).unwrap(), Vec::<TokenId>::new());
        assert!(matches!(read_frame(&f[..12]), Err(Error::Format(_))));
        assert!(matches!(read_frame(b"MTPX\x01\0\0\0\0"), Err(Error::Format(_))));
    }
}
