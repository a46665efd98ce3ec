use rustc_hash::FxHashMap;

use crate::bpe::escape::escape_token;
use crate::error::{Error, Result};
use crate::TokenId;

/// Bidirectional map between token byte strings and dense ids `0..len`.
///
/// Always contains the 256 single-byte tokens. Special tokens are reserved
/// strings that are never produced by merges and never merged further.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<Vec<u8>>,
    index: FxHashMap<Vec<u8>, TokenId>,
    byte_ids: [TokenId; 256],
    special: Vec<bool>,
    specials: Vec<TokenId>,
}

impl Vocabulary {
    /// Build from tokens listed in id order.
    pub fn new(tokens: Vec<Vec<u8>>, specials: &[TokenId]) -> Result<Self> {
        if tokens.len() > TokenId::MAX as usize {
            return Err(Error::Integrity("vocabulary too large".into()));
        }
        let mut index = FxHashMap::with_capacity_and_hasher(tokens.len(), Default::default());
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::Integrity(format!("token id {id} is the empty string")));
            }
            if let Some(prev) = index.insert(tok.clone(), id as TokenId) {
                return Err(Error::Integrity(format!(
                    "duplicate token string {:?} (ids {prev} and {id})",
                    escape_token(tok)
                )));
            }
        }
        let mut special = vec![false; tokens.len()];
        let mut sorted_specials = Vec::with_capacity(specials.len());
        for &id in specials {
            let slot = special
                .get_mut(id as usize)
                .ok_or(Error::UnknownId(id))?;
            if !*slot {
                *slot = true;
                sorted_specials.push(id);
            }
        }
        sorted_specials.sort_unstable();
        let mut byte_ids = [0; 256];
        for b in 0..=255u8 {
            match index.get(&[b][..]) {
                Some(&id) if !special[id as usize] => byte_ids[b as usize] = id,
                Some(_) => {
                    return Err(Error::Integrity(format!(
                        "byte token <0x{b:02X}> is declared special"
                    )))
                }
                None => {
                    return Err(Error::Integrity(format!(
                        "byte alphabet incomplete: missing <0x{b:02X}>"
                    )))
                }
            }
        }
        Ok(Self {
            tokens,
            index,
            byte_ids,
            special,
            specials: sorted_specials,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> Option<&[u8]> {
        self.tokens.get(id as usize).map(Vec::as_slice)
    }

    pub fn id(&self, token: &[u8]) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn byte_id(&self, byte: u8) -> TokenId {
        self.byte_ids[byte as usize]
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.special.get(id as usize).copied().unwrap_or(false)
    }

    /// True for the 256 single-byte alphabet tokens.
    pub fn is_byte(&self, id: TokenId) -> bool {
        self.token(id).is_some_and(|t| t.len() == 1) && !self.is_special(id)
    }

    pub fn specials(&self) -> &[TokenId] {
        &self.specials
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &[u8])> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(id, t)| (id as TokenId, t.as_slice()))
    }

    /// Printable form of a token, as written in tokenizer files.
    pub fn display(&self, id: TokenId) -> String {
        match self.token(id) {
            Some(t) if self.is_special(id) => String::from_utf8_lossy(t).into_owned(),
            Some(t) => escape_token(t),
            None => format!("<unk:{id}>"),
        }
    }
}
