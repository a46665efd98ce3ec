//! Initial embeddings for inserted tokens and the frozen/trainable row split.
//!
//! A new row is the mean of its constituents' rows, rescaled to
//! `alpha * mu` where `mu` is the mean row norm of the original matrix.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::surgery::TpeVocabulary;
use crate::TokenId;

pub const MAGIC: &[u8; 4] = b"MEMB";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Dense row-major `f32` matrix, one row per token id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding dimension must be positive".into()));
        }
        if data.len() != rows * dim {
            return Err(Error::Shape(format!(
                "{} values do not fill a {rows}x{dim} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite value at row {}, column {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `MEMB` magic, then version, rows and dim as little-endian u32, then
    /// row-major little-endian f32 values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [FORMAT_VERSION, self.rows as u32, self.dim as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Format(format!("embedding file: {e}")))?;
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::Format("embedding file: missing MEMB header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("embedding file: unsupported version {version}")));
        }
        let (rows, dim) = (word(8) as usize, word(12) as usize);
        let body = &bytes[16..];
        if body.len() != rows * dim * 4 {
            return Err(Error::Format(format!(
                "embedding file: header says {rows}x{dim} but body has {} bytes",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(rows, dim, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_binary(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// One row per line, space-separated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Mean L2 norm over all rows.
pub fn mean_vocab_norm(e: &EmbeddingMatrix) -> Result<f64> {
    if e.rows == 0 {
        return Err(Error::Domain("mean norm of an empty matrix".into()));
    }
    let total: f64 = (0..e.rows)
        .map(|i| norm(e.row(i).iter().map(|&x| x as f64)))
        .sum();
    Ok(total / e.rows as f64)
}

/// What to do when the constituent mean is the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    #[default]
    Error,
    /// Use the first constituent's direction instead.
    FirstConstituent,
}

pub fn init_tpe_embedding(
    e: &EmbeddingMatrix,
    constituents: &[TokenId],
    alpha: f64,
    mu: f64,
) -> Result<Vec<f32>> {
    init_tpe_embedding_with(e, constituents, alpha, mu, DegeneratePolicy::Error)
}

pub fn init_tpe_embedding_with(
    e: &EmbeddingMatrix,
    constituents: &[TokenId],
    alpha: f64,
    mu: f64,
    policy: DegeneratePolicy,
) -> Result<Vec<f32>> {
    if constituents.is_empty() {
        return Err(Error::Domain("no constituents to average".into()));
    }
    if let Some(&bad) = constituents.iter().find(|&&c| c as usize >= e.rows) {
        return Err(Error::UnknownId(bad));
    }
    let mut mean = vec![0f64; e.dim];
    for &c in constituents {
        for (m, &x) in mean.iter_mut().zip(e.row(c as usize)) {
            *m += x as f64;
        }
    }
    let n = constituents.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let mut len = norm(mean.iter().copied());
    if len == 0.0 {
        let label = format!("{constituents:?}");
        match policy {
            DegeneratePolicy::Error => return Err(Error::DegenerateDirection(label)),
            DegeneratePolicy::FirstConstituent => {
                mean = e.row(constituents[0] as usize).iter().map(|&x| x as f64).collect();
                len = norm(mean.iter().copied());
                if len == 0.0 {
                    return Err(Error::DegenerateDirection(label));
                }
            }
        }
    }
    let scale = alpha * mu / len;
    Ok(mean.iter().map(|m| (m * scale) as f32).collect())
}

/// Frozen and trainable row ids, both ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingSplit {
    pub fixed_ids: Vec<TokenId>,
    pub trainable_ids: Vec<TokenId>,
}

impl EmbeddingSplit {
    /// Newline-separated trainable ids.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for id in &self.trainable_ids {
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }
}

pub fn build_split(v: &TpeVocabulary) -> EmbeddingSplit {
    let mut trainable: Vec<TokenId> = v.insertion().iter().map(|i| i.id).collect();
    trainable.sort_unstable();
    let fixed = (0..v.vocab().len() as TokenId)
        .filter(|id| trainable.binary_search(id).is_err())
        .collect();
    EmbeddingSplit {
        fixed_ids: fixed,
        trainable_ids: trainable,
    }
}

pub fn apply_surgery_to_matrix(e: &EmbeddingMatrix, v: &TpeVocabulary, alpha: f64) -> Result<EmbeddingMatrix> {
    apply_surgery_to_matrix_with(e, v, alpha, DegeneratePolicy::Error)
}

/// Overwrite each reused row with the initialization of the token that now
/// owns it. Constituent rows are read from the unmodified input.
pub fn apply_surgery_to_matrix_with(
    e: &EmbeddingMatrix,
    v: &TpeVocabulary,
    alpha: f64,
    policy: DegeneratePolicy,
) -> Result<EmbeddingMatrix> {
    if e.rows != v.vocab().len() {
        return Err(Error::Shape(format!(
            "matrix has {} rows but the vocabulary has {} tokens",
            e.rows,
            v.vocab().len()
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be positive and finite, got {alpha}")));
    }
    let mu = mean_vocab_norm(e)?;
    let mut out = e.clone();
    for ins in v.insertion() {
        let row = init_tpe_embedding_with(e, &ins.constituents, alpha, mu, policy).map_err(|err| match err {
            Error::DegenerateDirection(_) => Error::DegenerateDirection(v.vocab().display(ins.id)),
            other => other,
        })?;
        out.row_mut(ins.id as usize).copy_from_slice(&row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f32]]) -> EmbeddingMatrix {
        let dim = rows[0].len();
        EmbeddingMatrix::new(rows.len(), dim, rows.concat()).unwrap()
    }

    #[test]
    fn mean_norm_examples() {
        let mu = mean_vocab_norm(&m(&[&[1.0, 0.0], &[0.0, -1.0], &[0.6, 0.8]])).unwrap();
        assert!((mu - 1.0).abs() < 1e-6, "{mu}");
        assert_eq!(mean_vocab_norm(&m(&[&[1.0, 0.0], &[0.0, 3.0]])).unwrap(), 2.0);
        let empty = EmbeddingMatrix::new(0, 4, vec![]).unwrap();
        assert!(matches!(mean_vocab_norm(&empty), Err(Error::Domain(_))));
    }

    #[test]
    fn init_mean_then_rescale() {
        let e = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let v = init_tpe_embedding(&e, &[0, 1], 0.5, 1.0).unwrap();
        let h = 0.5f64 / 2f64.sqrt();
        assert!((v[0] as f64 - h).abs() < 1e-7 && (v[1] as f64 - h).abs() < 1e-7, "{v:?}");
        assert!((norm(v.iter().map(|&x| x as f64)) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn identity_case() {
        let e = m(&[&[3.0, 4.0]]);
        assert_eq!(init_tpe_embedding(&e, &[0], 1.0, 5.0).unwrap(), [3.0, 4.0]);
    }

    #[test]
    fn cancelling_constituents() {
        let e = m(&[&[1.0, -2.0], &[-1.0, 2.0]]);
        assert!(matches!(init_tpe_embedding(&e, &[0, 1], 0.5, 1.0), Err(Error::DegenerateDirection(_))));
        let v = init_tpe_embedding_with(&e, &[0, 1], 0.5, 2.0, DegeneratePolicy::FirstConstituent).unwrap();
        assert!((norm(v.iter().map(|&x| x as f64)) - 1.0).abs() < 1e-6);
        assert!(v[0] > 0.0 && v[1] < 0.0);
    }

    #[test]
    fn binary_round_trip_and_errors() {
        let e = m(&[&[1.5, -2.0, 0.25], &[0.0, 7.0, -1e-3]]);
        let mut buf = Vec::new();
        e.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MEMB");
        assert_eq!(buf.len(), 16 + 6 * 4);
        assert_eq!(EmbeddingMatrix::read_binary(buf.as_slice()).unwrap(), e);
        assert!(matches!(EmbeddingMatrix::read_binary(&buf[..20]), Err(Error::Format(_))));
        assert!(matches!(EmbeddingMatrix::read_binary(&b"NOPE"[..]), Err(Error::Format(_))));
        assert_eq!(e.to_text().lines().count(), 2);
    }

    #[test]
    fn shape_checks() {
        assert!(matches!(EmbeddingMatrix::new(2, 3, vec![0.0; 5]), Err(Error::Shape(_))));
        assert!(matches!(EmbeddingMatrix::new(1, 1, vec![f32::NAN]), Err(Error::Format(_))));
    }
}
