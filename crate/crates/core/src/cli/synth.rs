//! Deterministic synthetic corpora for desk-scale experiments.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// 16 essays scored 0 to 10; every score is recoverable from word choice.
    Overfit16,
    /// Correct/misspelled pairs in identical contexts; misspellings only in
    /// bottom-quartile essays.
    Misspell,
    /// Many rare good and bad words sharing contexts.
    Ablation,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overfit16" => Ok(Profile::Overfit16),
            "misspell" => Ok(Profile::Misspell),
            "ablation" => Ok(Profile::Ablation),
            other => Err(Error::Config(format!(
                "unknown synth profile `{other}` (expected overfit16, misspell or ablation)"
            ))),
        }
    }
}

pub const TSV_HEADER: &str = "essay_id\tessay_set\tessay\tdomain1_score";

const NEUTRAL: [&str; 16] = [
    "the", "student", "wrote", "about", "school", "and", "then", "it", "was", "a", "day", "with",
    "friends", "in", "town", "we",
];

const OVERFIT_GOOD: [&str; 6] = ["excellent", "insightful", "coherent", "eloquent", "vivid", "precise"];
const OVERFIT_BAD: [&str; 6] = ["vague", "sloppy", "dull", "messy", "weak", "confusing"];

/// Tokens that occur only in minimum-score `overfit16` essays.
pub const MIN_ONLY: [&str; 3] = ["asdf", "qwerty", "zxcv"];

/// Planted `(correct, misspelled)` pairs of the `misspell` profile.
pub const PLANTED_PAIRS: [(&str, &str); 6] = [
    ("because", "becuase"),
    ("their", "thier"),
    ("receive", "recieve"),
    ("separate", "seperate"),
    ("definitely", "definately"),
    ("believe", "beleive"),
];

/// One scored synthetic essay.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthEssay {
    pub id: u64,
    pub words: Vec<String>,
    pub score: f64,
}

pub fn generate(profile: Profile, seed: u64) -> Vec<SynthEssay> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match profile {
        Profile::Overfit16 => overfit16(&mut rng),
        Profile::Misspell => misspell(&mut rng),
        Profile::Ablation => ablation(&mut rng),
    }
}

/// ASAP-style TSV text with a single essay set.
pub fn to_tsv(essays: &[SynthEssay]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for e in essays {
        let _ = writeln!(out, "{}\t1\t{}\t{}", e.id, e.words.join(" "), e.score);
    }
    out
}

pub fn synth_tsv(profile: Profile, seed: u64) -> String {
    to_tsv(&generate(profile, seed))
}

fn filler<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| NEUTRAL.choose(rng).expect("non-empty").to_string())
        .collect()
}

fn overfit16<R: Rng>(rng: &mut R) -> Vec<SynthEssay> {
    const SCORES: [f64; 16] = [
        0.0, 0.0, 1.0, 2.0, 3.0, 3.0, 4.0, 5.0, 5.0, 6.0, 7.0, 7.0, 8.0, 9.0, 10.0, 10.0,
    ];
    const SLOTS: usize = 10;
    SCORES
        .iter()
        .enumerate()
        .map(|(i, &score)| {
            let good = (score as usize * SLOTS) / 10;
            let mut words: Vec<String> = (0..SLOTS)
                .map(|k| {
                    let pool = if k < good { &OVERFIT_GOOD } else { &OVERFIT_BAD };
                    pool.choose(rng).expect("non-empty").to_string()
                })
                .collect();
            if score == 0.0 {
                for (k, tok) in MIN_ONLY.iter().enumerate() {
                    words[(i + 3 * k) % SLOTS] = tok.to_string();
                }
            }
            words.shuffle(rng);
            SynthEssay {
                id: i as u64 + 1,
                words,
                score,
            }
        })
        .collect()
}

fn misspell<R: Rng>(rng: &mut R) -> Vec<SynthEssay> {
    const N: usize = 80;
    const SENTENCES: usize = 6;
    let mut scores: Vec<f64> = (0..N).map(|i| (i * 11 / N) as f64).collect();
    scores.shuffle(rng);
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let quartile = sorted[N / 4];
    scores
        .iter()
        .enumerate()
        .map(|(i, &score)| {
            let low = score < quartile;
            let mut words = Vec::new();
            for _ in 0..SENTENCES {
                let (right, wrong) = *PLANTED_PAIRS.choose(rng).expect("non-empty");
                let target = if low && rng.random_bool(0.7) { wrong } else { right };
                let quality = if rng.random_bool(score / 10.0) {
                    OVERFIT_GOOD.choose(rng)
                } else {
                    OVERFIT_BAD.choose(rng)
                };
                words.extend(["i", "think", target, "it", "was"].map(String::from));
                words.push(quality.expect("non-empty").to_string());
                words.extend(filler(rng, 2));
                words.push(".".into());
            }
            SynthEssay {
                id: i as u64 + 1,
                words,
                score,
            }
        })
        .collect()
}

fn ablation<R: Rng>(rng: &mut R) -> Vec<SynthEssay> {
    const N: usize = 200;
    const SLOTS: usize = 8;
    const WORDS: usize = 30;
    let good: Vec<String> = (0..WORDS).map(|k| format!("good{}", alpha_suffix(k))).collect();
    let bad: Vec<String> = (0..WORDS).map(|k| format!("bad{}", alpha_suffix(k))).collect();
    (0..N)
        .map(|i| {
            let n_good = rng.random_range(0..=SLOTS);
            let mut marked: Vec<&String> = (0..SLOTS)
                .map(|k| {
                    let pool = if k < n_good { &good } else { &bad };
                    pool.choose(rng).expect("non-empty")
                })
                .collect();
            marked.shuffle(rng);
            let mut words = Vec::new();
            for m in marked {
                words.extend(["the", "essay", "is"].map(String::from));
                words.push(m.clone());
                words.extend(filler(rng, 1));
            }
            SynthEssay {
                id: i as u64 + 1,
                words,
                score: (n_good * 10 / SLOTS) as f64,
            }
        })
        .collect()
}

/// `0 -> "a"`, `25 -> "z"`, `26 -> "ba"`: letters only, so every word stays
/// a single token.
fn alpha_suffix(mut k: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (k % 26) as u8);
        k /= 26;
        if k == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn overfit16_contract() {
        let essays = generate(Profile::Overfit16, 1);
        assert_eq!(essays.len(), 16);
        let min = essays.iter().map(|e| e.score).fold(f64::INFINITY, f64::min);
        let max = essays.iter().map(|e| e.score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((min, max), (0.0, 10.0));
        for e in &essays {
            let has_min_only = e.words.iter().any(|w| MIN_ONLY.contains(&w.as_str()));
            assert_eq!(has_min_only, e.score == min, "essay {}", e.id);
        }
    }

    #[test]
    fn misspellings_only_below_median() {
        let essays = generate(Profile::Misspell, 4);
        let mut scores: Vec<f64> = essays.iter().map(|e| e.score).collect();
        scores.sort_by(f64::total_cmp);
        let median = (scores[scores.len() / 2 - 1] + scores[scores.len() / 2]) / 2.0;
        let mut planted = 0;
        for e in &essays {
            for (_, wrong) in PLANTED_PAIRS {
                if e.words.iter().any(|w| w == wrong) {
                    planted += 1;
                    assert!(e.score < median);
                }
            }
        }
        assert!(planted > 0);
    }

    #[test]
    fn same_seed_same_bytes() {
        for p in [Profile::Overfit16, Profile::Misspell, Profile::Ablation] {
            assert_eq!(synth_tsv(p, 9), synth_tsv(p, 9));
        }
        assert_ne!(synth_tsv(Profile::Ablation, 1), synth_tsv(Profile::Ablation, 2));
    }

    #[test]
    fn words_survive_tokenization() {
        for p in [Profile::Overfit16, Profile::Misspell, Profile::Ablation] {
            for e in generate(p, 3) {
                assert_eq!(tokenize(&e.words.join(" ")), e.words);
            }
        }
    }

    #[test]
    fn unknown_profile() {
        assert!("overfit17".parse::<Profile>().is_err());
        assert_eq!(alpha_suffix(0), "a");
        assert_eq!(alpha_suffix(27), "bb");
    }
}
