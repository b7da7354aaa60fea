use std::collections::{BTreeMap, BTreeSet};

use super::{Essay, EssayRecord};
use crate::error::{Error, Result};

/// Train/validation/test proportions and the seed that fixes membership.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.64,
            validation: 0.16,
            test: 0.20,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative, got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Essay ids per bucket, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<u64>,
    pub validation: Vec<u64>,
    pub test: Vec<u64>,
}

impl Split {
    /// Selects the items of `items` whose ids are in `ids`, keeping input order.
    pub fn select<'a, T: HasIds>(items: &'a [T], ids: &[u64]) -> Vec<&'a T> {
        let wanted: BTreeSet<u64> = ids.iter().copied().collect();
        items.iter().filter(|e| wanted.contains(&e.essay_id())).collect()
    }
}

pub trait HasIds {
    fn essay_id(&self) -> u64;
    fn set_id(&self) -> u32;
}

impl HasIds for Essay {
    fn essay_id(&self) -> u64 {
        self.essay_id
    }
    fn set_id(&self) -> u32 {
        self.set_id
    }
}

impl HasIds for EssayRecord {
    fn essay_id(&self) -> u64 {
        self.essay_id
    }
    fn set_id(&self) -> u32 {
        self.set_id
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stratified split: every essay set is shuffled by a keyed hash of
/// `(seed, essay_id)` and cut at the same ratios; rounding remainders go to
/// the training bucket.
pub fn split_corpus<T: HasIds>(items: &[T], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut by_set: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item.essay_id()) {
            return Err(Error::Data(format!("duplicate essay_id {}", item.essay_id())));
        }
        by_set.entry(item.set_id()).or_default().push(item.essay_id());
    }

    let mut split = Split::default();
    for (_, mut ids) in by_set {
        ids.sort_by_key(|&id| (mix64(spec.seed ^ mix64(id)), id));
        let n = ids.len() as f64;
        let n_val = (spec.validation * n + 1e-9).floor() as usize;
        let n_test = (spec.test * n + 1e-9).floor() as usize;
        split.validation.extend_from_slice(&ids[..n_val]);
        split.test.extend_from_slice(&ids[n_val..n_val + n_test]);
        split.train.extend_from_slice(&ids[n_val + n_test..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn records(n: u64, sets: u32) -> Vec<EssayRecord> {
        (0..n)
            .map(|i| EssayRecord {
                essay_id: 1000 + i,
                set_id: (i % sets as u64) as u32 + 1,
                tokens: vec!["x".into()],
                raw_score: 1.0,
            })
            .collect()
    }

    #[test]
    fn default_ratios_on_hundred() {
        let s = split_corpus(&records(100, 1), &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (64, 16, 20));
    }

    #[test]
    fn same_seed_same_partition() {
        let r = records(100, 2);
        let spec = SplitSpec { seed: 7, ..Default::default() };
        assert_eq!(split_corpus(&r, &spec).unwrap(), split_corpus(&r, &spec).unwrap());
    }

    #[test]
    fn seed_change_moves_an_essay() {
        let r = records(100, 1);
        let a = split_corpus(&r, &SplitSpec { seed: 1, ..Default::default() }).unwrap();
        let b = split_corpus(&r, &SplitSpec { seed: 2, ..Default::default() }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn stratified_by_set() {
        let r = records(200, 2);
        let s = split_corpus(&r, &SplitSpec::default()).unwrap();
        let in_set = |ids: &[u64], set: u32| ids.iter().filter(|&&id| (id - 1000) % 2 == (set - 1) as u64).count();
        for set in [1, 2] {
            assert_eq!(in_set(&s.validation, set), 16);
            assert_eq!(in_set(&s.test, set), 20);
        }
    }

    #[test]
    fn bad_ratios_rejected() {
        let spec = SplitSpec { train: 0.5, validation: 0.2, test: 0.2, seed: 0 };
        assert!(matches!(split_corpus(&records(10, 1), &spec), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut r = records(3, 1);
        r[2].essay_id = r[0].essay_id;
        assert!(split_corpus(&r, &SplitSpec::default()).is_err());
    }

    proptest! {
        #[test]
        fn partition_property(n in 0u64..150, sets in 1u32..5, seed in any::<u64>()) {
            let r = records(n, sets);
            let s = split_corpus(&r, &SplitSpec { seed, ..Default::default() }).unwrap();
            let mut all: Vec<u64> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            let expected: Vec<u64> = r.iter().map(|e| e.essay_id).collect();
            prop_assert_eq!(all, expected);
        }
    }
}
