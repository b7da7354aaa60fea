//! Scorer persistence.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! "SATS" | version u32
//! dim u64 | units u64 | layers u8 | bidirectional u8 | peephole u8 | dropout f64
//! |V| u64 | |V| tokens (u32 length + UTF-8)
//! scaling u8 | range count u64 | per set: id u32, min f64, max f64
//! embeddings (|V| x dim, row-major)
//! per layer, forward then backward: the 15 LSTM tensors in declaration order
//! head weights | head bias
//! metadata: u32 length + UTF-8 `key=value` lines
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::lstm::{LstmLayer, Peephole};
use super::model::{Architecture, LayerStack, SeqModel};
use crate::binio::{write_atomic, Reader, Writer};
use crate::corpus::{ScoreRange, ScoreRanges, ScoreScaling, Vocabulary};
use crate::error::{Error, Result};
use crate::sswe::{decode_metadata, encode_metadata};

const MAGIC: &[u8; 4] = b"SATS";
const VERSION: u32 = 1;

/// A trained scorer with everything needed to score new text.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub vocab: Vocabulary,
    pub ranges: ScoreRanges,
    pub model: SeqModel,
    pub metadata: Vec<(String, String)>,
}

pub fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    let m = &file.model;
    m.validate()?;
    if file.vocab.len() != m.vocab_len() {
        return Err(Error::Shape(format!(
            "vocabulary has {} entries but the model embeds {}",
            file.vocab.len(),
            m.vocab_len()
        )));
    }
    let a = &m.arch;
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u64(a.dim as u64);
    w.u64(a.units as u64);
    w.u8(a.layers as u8);
    w.u8(a.bidirectional as u8);
    w.u8(a.peephole.code());
    w.f64(m.dropout);
    w.u64(file.vocab.len() as u64);
    for tok in file.vocab.tokens() {
        w.str(tok);
    }
    w.u8(match file.ranges.scaling {
        ScoreScaling::Normalized => 0,
        ScoreScaling::Raw => 1,
    });
    w.u64(file.ranges.ranges.len() as u64);
    for (&set, r) in &file.ranges.ranges {
        w.u32(set);
        w.f64(r.min);
        w.f64(r.max);
    }
    w.f64s(m.embeddings.iter());
    for s in m.dense_slices() {
        w.f64s(s);
    }
    let mut meta = file.metadata.clone();
    meta.retain(|(k, _)| k != "min_count");
    meta.push(("min_count".into(), file.vocab.min_count().to_string()));
    w.str(&encode_metadata(&meta));
    write_atomic(path, &w.buf)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(r.err(format!(
            "bad magic {:?}, expected a SATS model file",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported model file version {version}")));
    }
    let dim = r.len()?;
    let units = r.len()?;
    let layers = r.u8()? as usize;
    let bidirectional = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(r.err(format!("bad direction flag {b}"))),
    };
    let code = r.u8()?;
    let peephole =
        Peephole::from_code(code).ok_or_else(|| r.err(format!("bad peephole mode {code}")))?;
    let dropout = r.f64()?;
    let arch = Architecture {
        dim,
        units,
        layers,
        bidirectional,
        peephole,
    };
    arch.validate().map_err(|e| r.err(e.to_string()))?;

    let v = r.len()?;
    let mut tokens = Vec::with_capacity(v);
    for _ in 0..v {
        tokens.push(r.str()?);
    }
    let scaling = match r.u8()? {
        0 => ScoreScaling::Normalized,
        1 => ScoreScaling::Raw,
        b => return Err(r.err(format!("bad scaling flag {b}"))),
    };
    let n_ranges = r.len()?;
    let mut ranges = BTreeMap::new();
    for _ in 0..n_ranges {
        let set = r.u32()?;
        let min = r.f64()?;
        let max = r.f64()?;
        ranges.insert(set, ScoreRange { min, max });
    }
    let embeddings = r.array2(v, dim)?;
    let mut stacks = Vec::with_capacity(layers);
    for l in 0..layers {
        let input = if l == 0 { dim } else { arch.output_width() };
        let mut read_layer = || -> Result<LstmLayer> {
            let mut layer = LstmLayer::zeros(input, units);
            for s in layer.slices_mut() {
                for x in s.iter_mut() {
                    *x = r.f64()?;
                }
            }
            Ok(layer)
        };
        let forward = read_layer()?;
        let backward = if bidirectional { Some(read_layer()?) } else { None };
        stacks.push(LayerStack { forward, backward });
    }
    let head_w = r.array1(arch.output_width())?;
    let head_b = r.f64()?;
    let metadata = decode_metadata(&r.str()?);
    r.finish()?;

    let min_count = metadata
        .iter()
        .find(|(k, _)| k == "min_count")
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(1);
    let vocab = Vocabulary::from_tokens(tokens, min_count)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let model = SeqModel {
        arch,
        dropout,
        embeddings,
        layers: stacks,
        head_w,
        head_b,
    };
    model.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(ModelFile {
        vocab,
        ranges: ScoreRanges { ranges, scaling },
        model,
        metadata: metadata.into_iter().filter(|(k, _)| k != "min_count").collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::sswe::{save_embeddings, EmbeddingFile, SsweParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(bidirectional: bool, layers: usize) -> ModelFile {
        let vocab = Vocabulary::build([tokenize("a b c a d e")], 1);
        let arch = Architecture {
            dim: 3,
            units: 2,
            layers,
            bidirectional,
            peephole: Peephole::Diagonal,
        };
        ModelFile {
            model: SeqModel::new(arch, 0.25, vocab.len(), 11).unwrap(),
            vocab,
            ranges: ScoreRanges {
                ranges: BTreeMap::from([(1, ScoreRange { min: 2.0, max: 12.0 })]),
                scaling: ScoreScaling::Normalized,
            },
            metadata: vec![("config_hash".into(), "abc".into())],
        }
    }

    #[test]
    fn round_trip_all_architectures() {
        let dir = tempfile::tempdir().unwrap();
        for (bi, layers) in [(false, 1), (true, 1), (false, 2), (true, 2)] {
            let file = sample(bi, layers);
            let path = dir.path().join(format!("m{bi}{layers}.sats"));
            save_model(&path, &file).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back, file);
            let p1 = file.model.predict_raw(&[3, 4, 5]).unwrap();
            let p2 = back.model.predict_raw(&[3, 4, 5]).unwrap();
            assert_eq!(p1.to_bits(), p2.to_bits());
        }
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sats");
        save_model(&path, &sample(true, 2)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [3, 20, bytes.len() / 2, bytes.len() - 1] {
            std::fs::write(&path, &bytes[..cut]).unwrap();
            assert!(matches!(load_model(&path), Err(Error::Format { .. })), "cut {cut}");
        }
    }

    #[test]
    fn embedding_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.sswe");
        let vocab = Vocabulary::build([tokenize("a b c")], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = SsweParams::init(vocab.len(), 2, 2, 3, &mut rng);
        save_embeddings(
            &path,
            &EmbeddingFile {
                vocab,
                params,
                metadata: vec![],
            },
        )
        .unwrap();
        match load_model(&path) {
            Err(Error::Format { reason, .. }) => assert!(reason.contains("magic")),
            other => panic!("expected a magic error, got {other:?}"),
        }
    }
}
