//! Embedding persistence.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! ```text
//! "SSWE" | version u32 | |V| u64 | D u64
//! |V| tokens, each u32 byte length + UTF-8
//! M column-major: for each word, its D components (f64)
//! H u64 | n u64 | W_hi (H x nD, row-major) | b_h (H)
//! W_context (H) | b_context | W_score (H) | b_score
//! metadata: u32 byte length + UTF-8 `key=value` lines
//! ```

use std::path::Path;

use ndarray::Array1;

use super::SsweParams;
use crate::binio::{write_atomic, Reader, Writer};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SSWE";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub vocab: Vocabulary,
    pub params: SsweParams,
    /// `key=value` metadata, e.g. the config hash.
    pub metadata: Vec<(String, String)>,
}

pub(crate) fn encode_metadata(meta: &[(String, String)]) -> String {
    meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub(crate) fn decode_metadata(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn save_embeddings(path: &Path, file: &EmbeddingFile) -> Result<()> {
    let p = &file.params;
    if file.vocab.len() != p.vocab_len() {
        return Err(Error::Shape(format!(
            "vocabulary has {} entries but the embedding matrix has {} columns",
            file.vocab.len(),
            p.vocab_len()
        )));
    }
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u64(p.vocab_len() as u64);
    w.u64(p.dim() as u64);
    for tok in file.vocab.tokens() {
        w.str(tok);
    }
    w.f64s(p.embeddings.iter());
    w.u64(p.hidden() as u64);
    w.u64(p.window() as u64);
    w.f64s(p.w_hidden.iter());
    w.f64s(p.b_hidden.iter());
    w.f64s(p.w_context.iter());
    w.f64(p.b_context);
    w.f64s(p.w_score.iter());
    w.f64(p.b_score);
    let mut meta = file.metadata.clone();
    meta.retain(|(k, _)| k != "min_count");
    meta.push(("min_count".into(), file.vocab.min_count().to_string()));
    w.str(&encode_metadata(&meta));
    write_atomic(path, &w.buf)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(r.err(format!(
            "bad magic {:?}, expected an SSWE embedding file",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported embedding file version {version}")));
    }
    let v = r.len()?;
    let d = r.len()?;
    let mut tokens = Vec::with_capacity(v);
    for _ in 0..v {
        tokens.push(r.str()?);
    }
    let embeddings = r.array2(v, d)?;
    let h = r.len()?;
    let n = r.len()?;
    let w_hidden = r.array2(h, n * d)?;
    let b_hidden = r.array1(h)?;
    let w_context = r.array1(h)?;
    let b_context = r.f64()?;
    let w_score = r.array1(h)?;
    let b_score = r.f64()?;
    let metadata = decode_metadata(&r.str()?);
    r.finish()?;

    let min_count = metadata
        .iter()
        .find(|(k, _)| k == "min_count")
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(1);
    let vocab = Vocabulary::from_tokens(tokens, min_count)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let params = SsweParams {
        embeddings,
        w_hidden,
        b_hidden,
        w_context,
        b_context,
        w_score,
        b_score,
    };
    params.validate()?;
    Ok(EmbeddingFile {
        vocab,
        params,
        metadata: metadata.into_iter().filter(|(k, _)| k != "min_count").collect(),
    })
}

/// One `token v1 ... vD` line per vocabulary entry.
pub fn export_text(path: &Path, vocab: &Vocabulary, params: &SsweParams) -> Result<()> {
    let mut out = String::new();
    for (id, tok) in vocab.tokens().iter().enumerate() {
        out.push_str(tok);
        for v in params.embeddings.row(id) {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Parses a text export back into `(token, vector)` pairs.
pub fn import_text(text: &str) -> Result<Vec<(String, Array1<f64>)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let mut parts = l.split(' ');
            let tok = parts.next().unwrap_or_default().to_string();
            let vals: std::result::Result<Vec<f64>, _> = parts.map(str::parse).collect();
            vals.map(|v| (tok, Array1::from(v)))
                .map_err(|_| Error::Data(format!("line {}: malformed embedding row", i + 1)))
        })
        .collect()
}
