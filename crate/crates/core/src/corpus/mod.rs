//! Corpus handling: tokenisation, vocabulary, TSV ingestion, score scaling,
//! deterministic splits and window extraction for embedding training.

mod ingest;
mod split;
mod tokenize;
mod vocab;
pub(crate) mod window;

pub use ingest::{ingest_asap_tsv, read_score_ranges, EssayRecord, Ingested, RowError};
pub use split::{split_corpus, HasIds, Split, SplitSpec};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, BOUNDARY, PAD, SPECIAL_COUNT, UNK};
pub use window::{corrupt_centers, corrupt_window, extract_windows, WindowSample};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// How raw scores are mapped into the space the networks train on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreScaling {
    /// Per-set min/max scaling into `[0, 1]`.
    #[default]
    Normalized,
    /// Train directly on raw scores.
    Raw,
}

/// Inclusive score range of one essay set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRange {
    pub min: f64,
    pub max: f64,
}

/// Per-set score ranges plus the scaling mode shared by every stage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreRanges {
    pub ranges: BTreeMap<u32, ScoreRange>,
    pub scaling: ScoreScaling,
}

impl ScoreRanges {
    pub fn get(&self, set_id: u32) -> Result<ScoreRange> {
        self.ranges
            .get(&set_id)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("no score range for essay set {set_id}")))
    }

    pub fn scale(&self, set_id: u32, raw: f64) -> Result<f64> {
        let r = self.get(set_id)?;
        Ok(match self.scaling {
            ScoreScaling::Raw => raw,
            ScoreScaling::Normalized => {
                let width = r.max - r.min;
                if width == 0.0 {
                    0.0
                } else {
                    (raw - r.min) / width
                }
            }
        })
    }

    pub fn unscale(&self, set_id: u32, scaled: f64) -> Result<f64> {
        let r = self.get(set_id)?;
        Ok(match self.scaling {
            ScoreScaling::Raw => scaled,
            ScoreScaling::Normalized => r.min + scaled * (r.max - r.min),
        })
    }

    /// Bounds of the training space for `set_id`; predictions are clamped here.
    pub fn scaled_bounds(&self, set_id: u32) -> Result<(f64, f64)> {
        let r = self.get(set_id)?;
        Ok(match self.scaling {
            ScoreScaling::Raw => (r.min, r.max),
            ScoreScaling::Normalized => (0.0, 1.0),
        })
    }

    /// Smallest and largest score over all sets.
    pub fn global(&self) -> Option<ScoreRange> {
        let mut it = self.ranges.values();
        let first = *it.next()?;
        Some(it.fold(first, |acc, r| ScoreRange {
            min: acc.min.min(r.min),
            max: acc.max.max(r.max),
        }))
    }
}

/// A scored essay encoded against a vocabulary. Never contains [`PAD`].
#[derive(Debug, Clone, PartialEq)]
pub struct Essay {
    pub essay_id: u64,
    pub set_id: u32,
    pub tokens: Vec<usize>,
    pub raw_score: f64,
    pub scaled_score: f64,
}

impl Essay {
    pub fn encode(record: &EssayRecord, vocab: &Vocabulary, ranges: &ScoreRanges) -> Result<Self> {
        if record.tokens.is_empty() {
            return Err(Error::Data(format!("essay {} has no tokens", record.essay_id)));
        }
        Ok(Essay {
            essay_id: record.essay_id,
            set_id: record.set_id,
            tokens: vocab.encode(&record.tokens),
            raw_score: record.raw_score,
            scaled_score: ranges.scale(record.set_id, record.raw_score)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranges(min: f64, max: f64) -> ScoreRanges {
        let mut r = ScoreRanges::default();
        r.ranges.insert(1, ScoreRange { min, max });
        r
    }

    proptest! {
        #[test]
        fn scaling_round_trip(min in -50.0f64..50.0, width in 0.5f64..60.0, t in 0.0f64..=1.0) {
            let r = ranges(min, min + width);
            let raw = min + t * width;
            let back = r.unscale(1, r.scale(1, raw).unwrap()).unwrap();
            prop_assert!((raw - back).abs() <= 1e-12);
        }
    }

    #[test]
    fn scaled_score_endpoints() {
        let r = ranges(2.0, 12.0);
        assert_eq!(r.scale(1, 2.0).unwrap(), 0.0);
        assert_eq!(r.scale(1, 12.0).unwrap(), 1.0);
        assert!(r.scale(9, 2.0).is_err());
    }

    #[test]
    fn raw_mode_is_identity() {
        let mut r = ranges(0.0, 10.0);
        r.scaling = ScoreScaling::Raw;
        assert_eq!(r.scale(1, 7.0).unwrap(), 7.0);
        assert_eq!(r.scaled_bounds(1).unwrap(), (0.0, 10.0));
    }

    #[test]
    fn empty_record_is_rejected() {
        let vocab = Vocabulary::build(std::iter::empty::<&[String]>(), 1);
        let rec = EssayRecord {
            essay_id: 1,
            set_id: 1,
            tokens: vec![],
            raw_score: 3.0,
        };
        assert!(Essay::encode(&rec, &vocab, &ranges(0.0, 10.0)).is_err());
    }
}
