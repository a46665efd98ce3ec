//! Dependency-aware vocabulary replacement.
//!
//! The top-M mined candidates are inserted into the id slots of the M least
//! frequent base tokens that no candidate depends on. Every base token on a
//! candidate's merge path (recursively, down to the byte alphabet) stays, so
//! the base merge table keeps working unchanged and the vocabulary size never
//! moves.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::bpe::io::{merges_section, specials_section, vocab_section, RawMeta, RawTokenizerFile};
use crate::bpe::{escape_token, unescape_token, BaseTokenizer, Vocabulary};
use crate::codec::Compiled;
use crate::error::{Error, Result};
use crate::json;
use crate::mining::{select_insertion_set, CandidateTable, MiningConfig, TpeCandidate};
use crate::TokenId;

/// Left-to-right derivation of a composite: `(prefix, next constituent)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergePath {
    pub pairs: Vec<(Vec<u8>, Vec<u8>)>,
}

pub fn build_merge_path(vocab: &Vocabulary, constituents: &[TokenId]) -> Result<MergePath> {
    let mut parts = constituents
        .iter()
        .map(|&id| vocab.token(id).ok_or(Error::UnknownId(id)));
    let mut prefix = match parts.next() {
        Some(first) => first?.to_vec(),
        None => return Ok(MergePath { pairs: Vec::new() }),
    };
    let mut pairs = Vec::with_capacity(constituents.len().saturating_sub(1));
    for next in parts {
        let next = next?.to_vec();
        let joined = [prefix.as_slice(), next.as_slice()].concat();
        pairs.push((std::mem::replace(&mut prefix, joined), next));
    }
    Ok(MergePath { pairs })
}

/// Deduplicated concatenation of insertion merge paths.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TpeMergeTable {
    pairs: Vec<(Vec<u8>, Vec<u8>)>,
    /// Rank of the first insertion contributing each pair.
    origin: Vec<usize>,
}

impl TpeMergeTable {
    pub fn pairs(&self) -> &[(Vec<u8>, Vec<u8>)] {
        &self.pairs
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn build_tpe_merge_table(vocab: &Vocabulary, insertion: &[TpeCandidate]) -> Result<TpeMergeTable> {
    let mut seen: FxHashSet<(Vec<u8>, Vec<u8>)> = FxHashSet::default();
    let mut table = TpeMergeTable::default();
    for (rank, cand) in insertion.iter().enumerate() {
        for pair in build_merge_path(vocab, &cand.constituents)?.pairs {
            if seen.insert(pair.clone()) {
                table.pairs.push(pair);
                table.origin.push(rank);
            }
        }
    }
    Ok(table)
}

/// Base tokens any insertion needs: every constituent plus the full base
/// derivation of each constituent.
pub fn dependent_set(insertion: &[TpeCandidate], base: &BaseTokenizer) -> Result<BTreeSet<TokenId>> {
    let mut out = BTreeSet::new();
    for cand in insertion {
        add_dependencies(&mut out, cand, base)?;
    }
    Ok(out)
}

fn add_dependencies(out: &mut BTreeSet<TokenId>, cand: &TpeCandidate, base: &BaseTokenizer) -> Result<()> {
    for &c in &cand.constituents {
        if base.vocab().token(c).is_none() {
            return Err(Error::Integrity(format!(
                "candidate constituent id {c} is not in the base vocabulary"
            )));
        }
        if out.insert(c) {
            for (l, r) in base.merge_path(c)? {
                out.insert(l);
                out.insert(r);
            }
        }
    }
    Ok(())
}

/// Occurrence count of every base token id over pre-encoded documents.
pub fn token_frequencies_encoded(vocab_len: usize, docs: &[Vec<TokenId>]) -> Vec<u64> {
    let mut counts = vec![0u64; vocab_len];
    for doc in docs {
        for &t in doc {
            counts[t as usize] += 1;
        }
    }
    counts
}

pub fn token_frequencies<S: AsRef<str> + Sync>(tok: &BaseTokenizer, docs: &[S]) -> Vec<u64> {
    token_frequencies_encoded(tok.len(), &crate::corpus::encode_documents(tok, docs))
}

fn is_reserved(base: &BaseTokenizer, id: TokenId) -> bool {
    base.vocab().is_byte(id) || base.vocab().is_special(id)
}

/// The `m` least frequent unprotected tokens: frequency ascending, then
/// longer surface first, then bytes ascending.
pub fn select_eviction(
    base: &BaseTokenizer,
    protected: &BTreeSet<TokenId>,
    freqs: &[u64],
    m: usize,
) -> Result<Vec<TokenId>> {
    let vocab = base.vocab();
    let mut pool: Vec<TokenId> = (0..vocab.len() as TokenId)
        .filter(|id| !is_reserved(base, *id) && !protected.contains(id))
        .collect();
    if pool.len() < m {
        return Err(Error::Capacity {
            requested: m,
            available: pool.len(),
        });
    }
    let freq = |id: TokenId| freqs.get(id as usize).copied().unwrap_or(0);
    let key = |id: &TokenId| {
        let t = vocab.token(*id).unwrap();
        (freq(*id), std::cmp::Reverse(t.len()), t)
    };
    if m < pool.len() {
        pool.select_nth_unstable_by(m, |a, b| key(a).cmp(&key(b)));
        pool.truncate(m);
    }
    pool.sort_unstable_by(|a, b| key(a).cmp(&key(b)));
    Ok(pool)
}

/// Largest budget `k <= insertion.len()` whose dependency closure still
/// leaves `k` evictable tokens.
fn max_feasible_budget(base: &BaseTokenizer, insertion: &[TpeCandidate]) -> Result<usize> {
    let reserved = (0..base.len() as TokenId).filter(|&id| is_reserved(base, id)).count();
    let mut deps = BTreeSet::new();
    let mut best = 0;
    for (i, cand) in insertion.iter().enumerate() {
        add_dependencies(&mut deps, cand, base)?;
        let protected = deps.iter().filter(|&&id| !is_reserved(base, id)).count();
        if base.len() - reserved - protected > i {
            best = i + 1;
        } else {
            break;
        }
    }
    Ok(best)
}

/// A composite token admitted into the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Insertion {
    /// Id in the extended vocabulary (taken over from an evicted token).
    pub id: TokenId,
    /// Base token ids, all preserved.
    pub constituents: Vec<TokenId>,
    pub surface: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildMeta {
    pub n_max: usize,
    pub budget_m: usize,
    pub min_freq: u64,
    pub corpus_digest: String,
}

/// Extended vocabulary: base tokenizer, evictions, insertions and the
/// compiled layered codec.
#[derive(Debug, Clone)]
pub struct TpeVocabulary {
    base: Arc<BaseTokenizer>,
    vocab: Vocabulary,
    tpe_merges: TpeMergeTable,
    insertion: Vec<Insertion>,
    eviction: Vec<TokenId>,
    decomposition: FxHashMap<TokenId, Vec<TokenId>>,
    meta: Option<BuildMeta>,
    pub(crate) compiled: Compiled,
}

impl TpeVocabulary {
    /// Identity extension: no insertions, behaves exactly like `base`.
    pub fn unextended(base: Arc<BaseTokenizer>) -> Result<Self> {
        Self::assemble(base, &[], Vec::new(), None)
    }

    /// Pair `insertion[k]` with `eviction[k]`, derive everything else and
    /// check all structural invariants.
    pub fn assemble(
        base: Arc<BaseTokenizer>,
        insertion: &[TpeCandidate],
        eviction: Vec<TokenId>,
        meta: Option<BuildMeta>,
    ) -> Result<Self> {
        if insertion.len() != eviction.len() {
            return Err(Error::Integrity(format!(
                "{} insertions but {} evictions",
                insertion.len(),
                eviction.len()
            )));
        }
        let bv = base.vocab();
        let deps = dependent_set(insertion, &base)?;
        let mut evicted = vec![false; base.len()];
        for &e in &eviction {
            if bv.token(e).is_none() {
                return Err(Error::UnknownId(e));
            }
            if is_reserved(&base, e) || deps.contains(&e) {
                return Err(Error::Integrity(format!(
                    "evicted token {} is protected",
                    bv.display(e)
                )));
            }
            if std::mem::replace(&mut evicted[e as usize], true) {
                return Err(Error::Integrity(format!("token {} evicted twice", bv.display(e))));
            }
        }
        let mut tokens: Vec<Vec<u8>> = bv.iter().map(|(_, t)| t.to_vec()).collect();
        let mut inserted = Vec::with_capacity(insertion.len());
        for (cand, &slot) in insertion.iter().zip(&eviction) {
            if bv.id(&cand.surface).is_some() {
                return Err(Error::Integrity(format!(
                    "insertion {} duplicates an existing base token",
                    escape_token(&cand.surface)
                )));
            }
            let surface: Vec<u8> = cand
                .constituents
                .iter()
                .flat_map(|&c| bv.token(c).unwrap_or_default().iter().copied())
                .collect();
            if surface != cand.surface || cand.constituents.len() < 2 {
                return Err(Error::Integrity(format!(
                    "insertion {} does not match its constituents",
                    escape_token(&cand.surface)
                )));
            }
            tokens[slot as usize] = surface.clone();
            inserted.push(Insertion {
                id: slot,
                constituents: cand.constituents.clone(),
                surface,
            });
        }
        let vocab = Vocabulary::new(tokens, bv.specials())?;
        let tpe_merges = build_tpe_merge_table(bv, insertion)?;

        let mut decomposition = FxHashMap::default();
        for &e in &eviction {
            let mut parts = Vec::new();
            decompose(&base, &evicted, e, &mut parts, 0)?;
            decomposition.insert(e, parts);
        }
        let compiled = Compiled::new(&base, &tpe_merges, &inserted, &evicted, &decomposition);
        let v = Self {
            base,
            vocab,
            tpe_merges,
            insertion: inserted,
            eviction,
            decomposition,
            meta,
            compiled,
        };
        v.check_resolvable()?;
        Ok(v)
    }

    pub fn base(&self) -> &Arc<BaseTokenizer> {
        &self.base
    }

    /// The extended vocabulary; same size as the base one.
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn tpe_merges(&self) -> &TpeMergeTable {
        &self.tpe_merges
    }

    /// Insertions in rank order.
    pub fn insertion(&self) -> &[Insertion] {
        &self.insertion
    }

    /// Evicted base ids; `eviction()[k]` is the slot given to `insertion()[k]`.
    pub fn eviction(&self) -> &[TokenId] {
        &self.eviction
    }

    pub fn decomposition(&self, evicted: TokenId) -> Option<&[TokenId]> {
        self.decomposition.get(&evicted).map(Vec::as_slice)
    }

    pub fn meta(&self) -> Option<&BuildMeta> {
        self.meta.as_ref()
    }

    /// Number of replaced tokens.
    pub fn replaced(&self) -> usize {
        self.insertion.len()
    }

    /// Every pair's left side must be a preserved base token or a composite
    /// built by pairs whose own operands resolve.
    pub fn check_resolvable(&self) -> Result<()> {
        let bv = self.base.vocab();
        let preserved = |s: &[u8]| match bv.id(s) {
            Some(id) => !self.decomposition.contains_key(&id),
            None => false,
        };
        let mut producible: FxHashSet<Vec<u8>> = FxHashSet::default();
        for (l, r) in &self.tpe_merges.pairs {
            if !preserved(r) {
                return Err(Error::Integrity(format!(
                    "tpe merge right side {} is not a preserved token",
                    escape_token(r)
                )));
            }
            if !preserved(l) && !producible.contains(l) {
                return Err(Error::Integrity(format!(
                    "tpe merge left side {} cannot be built from earlier pairs",
                    escape_token(l)
                )));
            }
            producible.insert([l.as_slice(), r.as_slice()].concat());
        }
        Ok(())
    }
}

/// Expand `id` through its producer until every part is preserved.
fn decompose(base: &BaseTokenizer, evicted: &[bool], id: TokenId, out: &mut Vec<TokenId>, depth: usize) -> Result<()> {
    if !evicted[id as usize] {
        out.push(id);
        return Ok(());
    }
    if depth > base.vocab().token(id).map_or(0, <[u8]>::len) + 64 {
        return Err(Error::Integrity("cyclic producer index".into()));
    }
    let rule = base.producer(id).ok_or_else(|| {
        Error::Integrity(format!(
            "evicted token {} has no producer to fall back on",
            base.vocab().display(id)
        ))
    })?;
    let (l, r) = (rule.left, rule.right);
    decompose(base, evicted, l, out, depth + 1)?;
    decompose(base, evicted, r, out, depth + 1)
}

/// Replacement from a mined table and pre-computed base token frequencies.
/// `budget` may be zero, giving the unextended vocabulary.
pub fn replace_with_frequencies(
    base: Arc<BaseTokenizer>,
    table: &CandidateTable,
    freqs: &[u64],
    budget: usize,
    meta: Option<BuildMeta>,
) -> Result<TpeVocabulary> {
    let insertion = select_insertion_set(table, budget);
    let deps = dependent_set(&insertion, &base)?;
    let eviction = match select_eviction(&base, &deps, freqs, insertion.len()) {
        Ok(e) => e,
        Err(Error::Capacity { requested, .. }) => {
            return Err(Error::Capacity {
                requested,
                available: max_feasible_budget(&base, &insertion)?,
            })
        }
        Err(e) => return Err(e),
    };
    TpeVocabulary::assemble(base, &insertion, eviction, meta)
}

/// Full replacement over already base-encoded documents.
pub fn dependency_aware_replacement_encoded(
    base: Arc<BaseTokenizer>,
    table: &CandidateTable,
    docs: &[Vec<TokenId>],
    digest: String,
    cfg: &MiningConfig,
) -> Result<TpeVocabulary> {
    cfg.validate()?;
    let freqs = token_frequencies_encoded(base.len(), docs);
    let meta = BuildMeta {
        n_max: cfg.n_max,
        budget_m: cfg.budget,
        min_freq: cfg.min_freq,
        corpus_digest: digest,
    };
    replace_with_frequencies(base, table, &freqs, cfg.budget, Some(meta))
}

/// Insertion, dependency closure, eviction and assembly over `docs`.
pub fn dependency_aware_replacement<S: AsRef<str> + Sync>(
    base: Arc<BaseTokenizer>,
    table: &CandidateTable,
    docs: &[S],
    cfg: &MiningConfig,
) -> Result<TpeVocabulary> {
    let encoded = crate::corpus::encode_documents(&base, docs);
    let digest = crate::corpus::corpus_digest(docs);
    dependency_aware_replacement_encoded(base, table, &encoded, digest, cfg)
}

/// Mine and replace in one call.
pub fn build<S: AsRef<str> + Sync>(
    base: Arc<BaseTokenizer>,
    docs: &[S],
    cfg: &MiningConfig,
) -> Result<TpeVocabulary> {
    cfg.validate()?;
    let encoded = crate::corpus::encode_documents(&base, docs);
    let table = crate::mining::count_ngrams_encoded(&base, &encoded, cfg)?;
    let digest = crate::corpus::corpus_digest(docs);
    dependency_aware_replacement_encoded(base, &table, &encoded, digest, cfg)
}

impl TpeVocabulary {
    /// Canonical file: the base tokenizer layout with `vocab` replaced by the
    /// extended vocabulary, plus the extension fields.
    pub fn to_json_string(&self) -> String {
        let bv = self.base.vocab();
        let pair = |l: &[u8], r: &[u8]| json::string_array(&[escape_token(l), escape_token(r)]);
        let tpe_merges: Vec<String> = self.tpe_merges.pairs.iter().map(|(l, r)| pair(l, r)).collect();
        let insertion: Vec<String> = self
            .insertion
            .iter()
            .map(|ins| {
                let parts: Vec<String> = ins.constituents.iter().map(|&c| bv.display(c)).collect();
                json::string_array(&parts)
            })
            .collect();
        let eviction: Vec<String> = self.eviction.iter().map(|&e| json::string(&bv.display(e))).collect();
        let decomposition: Vec<(String, String)> = self
            .eviction
            .iter()
            .map(|e| {
                let parts: Vec<String> = self.decomposition[e].iter().map(|&p| bv.display(p)).collect();
                (bv.display(*e), json::string_array(&parts))
            })
            .collect();
        let mut sections = vec![
            ("vocab", vocab_section(&self.vocab)),
            ("merges", merges_section(bv, self.base.merges())),
            ("special_tokens", specials_section(bv)),
            ("tpe_merges", json::block_array(&tpe_merges)),
            ("insertion", json::block_array(&insertion)),
            ("eviction", json::block_array(&eviction)),
            ("decomposition", json::block_object(&decomposition)),
        ];
        if let Some(m) = &self.meta {
            sections.push((
                "meta",
                format!(
                    "{{\"n_max\": {}, \"budget_m\": {}, \"min_freq\": {}, \"corpus_digest\": {}}}",
                    m.n_max,
                    m.budget_m,
                    m.min_freq,
                    json::string(&m.corpus_digest)
                ),
            ));
        }
        json::document(&sections)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_raw(RawTokenizerFile::read(path.as_ref())?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_raw(RawTokenizerFile::parse(text)?)
    }

    /// Accepts both plain base files (no extension) and extended files.
    pub fn from_raw(raw: RawTokenizerFile) -> Result<Self> {
        if !raw.has_extension() {
            return Self::unextended(Arc::new(raw.into_base()?));
        }
        let (mut tokens, specials) = raw.tokens_by_id()?;
        let star_tokens = tokens.clone();
        let star_index: FxHashMap<&[u8], TokenId> = star_tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_slice(), i as TokenId))
            .collect();
        let insertion_raw = raw.insertion.clone().unwrap_or_default();
        let eviction_raw = raw.eviction.clone().unwrap_or_default();
        if insertion_raw.len() != eviction_raw.len() {
            return Err(Error::Integrity(format!(
                "{} insertions but {} evictions",
                insertion_raw.len(),
                eviction_raw.len()
            )));
        }
        // put evicted strings back into the slots the insertions occupy
        for (parts, evicted) in insertion_raw.iter().zip(&eviction_raw) {
            let surface: Vec<u8> = parts.iter().flat_map(|p| unescape_token(p)).collect();
            let slot = *star_index.get(surface.as_slice()).ok_or_else(|| {
                Error::Integrity(format!("insertion {} is not in vocab", escape_token(&surface)))
            })?;
            tokens[slot as usize] = unescape_token(evicted);
        }
        let base_vocab = Vocabulary::new(tokens, &specials)?;
        let merges = raw
            .merges
            .iter()
            .map(|(l, r)| {
                Ok((
                    RawTokenizerFile::resolve(&base_vocab, l, "merge rule")?,
                    RawTokenizerFile::resolve(&base_vocab, r, "merge rule")?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let base = Arc::new(BaseTokenizer::new(base_vocab, merges)?);
        let bv = base.vocab();
        let insertion = insertion_raw
            .iter()
            .map(|parts| {
                let ids = parts
                    .iter()
                    .map(|p| RawTokenizerFile::resolve(bv, p, "insertion"))
                    .collect::<Result<Vec<_>>>()?;
                crate::mining::TpeCandidate::new(&base, ids, 0)
            })
            .collect::<Result<Vec<_>>>()?;
        let eviction = eviction_raw
            .iter()
            .map(|e| RawTokenizerFile::resolve(bv, e, "eviction"))
            .collect::<Result<Vec<_>>>()?;
        let meta = raw.meta.clone().map(|m: RawMeta| BuildMeta {
            n_max: m.n_max,
            budget_m: m.budget_m,
            min_freq: m.min_freq.unwrap_or(0),
            corpus_digest: m.corpus_digest,
        });
        let v = Self::assemble(Arc::clone(&base), &insertion, eviction, meta)?;

        // stored derived fields must agree with what the core fields imply
        if v.vocab.iter().map(|(_, t)| t).ne(star_tokens.iter().map(Vec::as_slice)) {
            return Err(Error::Integrity("vocab disagrees with insertion/eviction".into()));
        }
        let stored_pairs: Vec<(Vec<u8>, Vec<u8>)> = raw
            .tpe_merges
            .unwrap_or_default()
            .iter()
            .map(|(l, r)| (unescape_token(l), unescape_token(r)))
            .collect();
        if stored_pairs != v.tpe_merges.pairs {
            return Err(Error::Integrity("tpe_merges disagree with the insertion merge paths".into()));
        }
        if let Some(stored) = raw.decomposition {
            if stored.0.len() != v.eviction.len() {
                return Err(Error::Integrity("decomposition does not cover the eviction set".into()));
            }
            for (key, parts) in &stored.0 {
                let id = RawTokenizerFile::resolve(bv, key, "decomposition")?;
                let parts = parts
                    .iter()
                    .map(|p| RawTokenizerFile::resolve(bv, p, "decomposition"))
                    .collect::<Result<Vec<_>>>()?;
                if v.decomposition.get(&id) != Some(&parts) {
                    return Err(Error::Integrity(format!("decomposition of {key:?} is inconsistent")));
                }
            }
        }
        Ok(v)
    }
}
