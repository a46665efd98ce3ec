//! Corpus ingestion and batch base encoding.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::bpe::{BaseTokenizer, WordCache};
use crate::error::{Error, Result};
use crate::TokenId;

/// On-disk corpus layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// One document per line; blank lines are skipped.
    #[default]
    Lines,
    /// One JSON object per line with a string `text` field.
    JsonLines,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lines" | "text" => Ok(Self::Lines),
            "jsonl" | "json-lines" | "jsonlines" => Ok(Self::JsonLines),
            other => Err(Error::Config(format!(
                "unknown corpus format {other:?} (expected `lines` or `jsonl`)"
            ))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lines => "lines",
            Self::JsonLines => "jsonl",
        })
    }
}

#[derive(Deserialize)]
struct JsonDoc {
    text: String,
}

/// Read documents from any buffered source, in order.
pub fn read_corpus<R: BufRead>(reader: R, format: CorpusFormat) -> Result<Vec<String>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Format(format!("line {lineno}: {e}")))?;
        match format {
            CorpusFormat::Lines => {
                if !line.trim().is_empty() {
                    docs.push(line);
                }
            }
            CorpusFormat::JsonLines => {
                if line.trim().is_empty() {
                    continue;
                }
                let doc: JsonDoc = serde_json::from_str(&line)
                    .map_err(|e| Error::Format(format!("line {lineno}: {e}")))?;
                docs.push(doc.text);
            }
        }
    }
    Ok(docs)
}

pub fn ingest_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(std::io::BufReader::new(file), format).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// SHA-256 over length-prefixed documents, as `sha256:<hex>`.
pub fn corpus_digest<S: AsRef<str>>(docs: &[S]) -> String {
    let mut h = Sha256::new();
    for d in docs {
        let d = d.as_ref().as_bytes();
        h.update((d.len() as u64).to_le_bytes());
        h.update(d);
    }
    let digest = h.finalize();
    let mut out = String::with_capacity(7 + 64);
    out.push_str("sha256:");
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Base-encode each document independently; output order follows input.
pub fn encode_documents<S: AsRef<str> + Sync>(tok: &BaseTokenizer, docs: &[S]) -> Vec<Vec<TokenId>> {
    docs.par_iter()
        .map_init(WordCache::new, |cache, d| tok.encode_cached(d.as_ref(), cache))
        .collect()
}
