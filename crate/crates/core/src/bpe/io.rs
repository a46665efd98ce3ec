//! JSON tokenizer file: `vocab`, `merges`, `special_tokens`, plus the
//! optional token-pair extension fields read by [`crate::surgery`].

use std::fmt;
use std::path::Path;

use rustc_hash::FxHashSet;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer};

use super::escape::{escape_token, unescape_token};
use super::{BaseTokenizer, MergeRule, Vocabulary};
use crate::error::{Error, Result};
use crate::json;
use crate::TokenId;

/// Vocabulary object kept as an ordered list so duplicate keys are visible.
#[derive(Debug, Clone, Default)]
pub struct RawVocab(pub Vec<(String, u64)>);

impl<'de> Deserialize<'de> for RawVocab {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RawVocab;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping token strings to integer ids")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<RawVocab, A::Error> {
                let mut out = Vec::with_capacity(map.size_hint().unwrap_or(0));
                while let Some((k, v)) = map.next_entry::<String, u64>()? {
                    out.push((k, v));
                }
                Ok(RawVocab(out))
            }
        }
        de.deserialize_map(V)
    }
}

/// Ordered string-keyed object, duplicates preserved.
#[derive(Debug, Clone, Default)]
pub struct RawPairs<T>(pub Vec<(String, T)>);

impl<'de, T: Deserialize<'de>> Deserialize<'de> for RawPairs<T> {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct V<T>(std::marker::PhantomData<T>);
        impl<'de, T: Deserialize<'de>> Visitor<'de> for V<T> {
            type Value = RawPairs<T>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<RawPairs<T>, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, T>()? {
                    out.push((k, v));
                }
                Ok(RawPairs(out))
            }
        }
        de.deserialize_map(V(std::marker::PhantomData))
    }
}

#[derive(Debug, Clone, Deserialize, serde::Serialize, PartialEq, Eq)]
pub struct RawMeta {
    pub n_max: usize,
    pub budget_m: usize,
    #[serde(default)]
    pub min_freq: Option<u64>,
    pub corpus_digest: String,
}

/// Parsed but unvalidated tokenizer file.
#[derive(Debug, Clone, Deserialize)]
pub struct RawTokenizerFile {
    pub vocab: RawVocab,
    pub merges: Vec<(String, String)>,
    #[serde(default)]
    pub special_tokens: Vec<String>,
    #[serde(default)]
    pub tpe_merges: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub insertion: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub eviction: Option<Vec<String>>,
    #[serde(default)]
    pub decomposition: Option<RawPairs<Vec<String>>>,
    #[serde(default)]
    pub meta: Option<RawMeta>,
}

impl RawTokenizerFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("tokenizer file: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn has_extension(&self) -> bool {
        self.tpe_merges.is_some() || self.insertion.is_some() || self.eviction.is_some()
    }

    /// Token bytes for a vocab key; specials are stored verbatim.
    pub(crate) fn key_bytes(&self, specials: &FxHashSet<&str>, key: &str) -> Vec<u8> {
        if specials.contains(key) {
            key.as_bytes().to_vec()
        } else {
            unescape_token(key)
        }
    }

    /// Tokens in id order plus special ids. Ids must be exactly `0..len`.
    pub(crate) fn tokens_by_id(&self) -> Result<(Vec<Vec<u8>>, Vec<TokenId>)> {
        let specials: FxHashSet<&str> = self.special_tokens.iter().map(String::as_str).collect();
        let n = self.vocab.0.len();
        let mut slots: Vec<Option<Vec<u8>>> = vec![None; n];
        for (key, id) in &self.vocab.0 {
            let slot = usize::try_from(*id)
                .ok()
                .and_then(|i| slots.get_mut(i))
                .ok_or_else(|| {
                    Error::Integrity(format!(
                        "vocab entry {key:?} has id {id}, outside the dense range 0..{n}"
                    ))
                })?;
            if slot.is_some() {
                return Err(Error::Integrity(format!("vocab id {id} is assigned twice")));
            }
            *slot = Some(self.key_bytes(&specials, key));
        }
        let tokens: Vec<Vec<u8>> = slots.into_iter().map(|s| s.unwrap()).collect();
        let mut special_ids = Vec::with_capacity(self.special_tokens.len());
        for s in &self.special_tokens {
            let id = self
                .vocab
                .0
                .iter()
                .find(|(k, _)| k == s)
                .map(|(_, id)| *id as TokenId)
                .ok_or_else(|| Error::Integrity(format!("special token {s:?} is not in vocab")))?;
            special_ids.push(id);
        }
        Ok((tokens, special_ids))
    }

    pub(crate) fn resolve(vocab: &Vocabulary, s: &str, field: &str) -> Result<TokenId> {
        vocab
            .id(&unescape_token(s))
            .ok_or_else(|| Error::Integrity(format!("{field} references unknown token {s:?}")))
    }

    pub fn into_base(self) -> Result<BaseTokenizer> {
        let (tokens, specials) = self.tokens_by_id()?;
        let vocab = Vocabulary::new(tokens, &specials)?;
        let merges = self
            .merges
            .iter()
            .map(|(l, r)| Ok((Self::resolve(&vocab, l, "merge rule")?, Self::resolve(&vocab, r, "merge rule")?)))
            .collect::<Result<Vec<_>>>()?;
        BaseTokenizer::new(vocab, merges)
    }
}

pub(crate) fn vocab_section(vocab: &Vocabulary) -> String {
    let members: Vec<(String, String)> = vocab
        .iter()
        .map(|(id, _)| (vocab.display(id), id.to_string()))
        .collect();
    json::block_object(&members)
}

pub(crate) fn merges_section(vocab: &Vocabulary, merges: &[MergeRule]) -> String {
    let items: Vec<String> = merges
        .iter()
        .map(|m| json::string_array(&[escape_token(vocab.token(m.left).unwrap()), escape_token(vocab.token(m.right).unwrap())]))
        .collect();
    json::block_array(&items)
}

pub(crate) fn specials_section(vocab: &Vocabulary) -> String {
    let names: Vec<String> = vocab.specials().iter().map(|&id| vocab.display(id)).collect();
    json::string_array(&names)
}

impl BaseTokenizer {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw = RawTokenizerFile::parse(text)?;
        if raw.has_extension() {
            return Err(Error::Format(
                "file carries token-pair extension fields; load it as a token-pair vocabulary".into(),
            ));
        }
        raw.into_base()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = RawTokenizerFile::read(path)?;
        if raw.has_extension() {
            return Err(Error::Format(format!(
                "{}: file carries token-pair extension fields; load it as a token-pair vocabulary",
                path.display()
            )));
        }
        raw.into_base()
    }

    /// Canonical serialization: vocab sorted by id, merges in rank order.
    pub fn to_json_string(&self) -> String {
        json::document(&[
            ("vocab", vocab_section(self.vocab())),
            ("merges", merges_section(self.vocab(), self.merges())),
            ("special_tokens", specials_section(self.vocab())),
        ])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}
